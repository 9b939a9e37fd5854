//! C interface to `equidist`.
//!
//! Objects cross the boundary as opaque handles made by constructors such
//! as `eq_family_from_preset` and `eq_sieve_run`, and are released with the
//! matching `*_free`. Every fallible function returns an `EqStatus`; on failure `eq_last_error` describes the
//! most recent error on the calling thread. Strings returned through `char**`
//! out-parameters are owned by the caller and released with `eq_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use equidist::cli::{preset, SpecFile};
use equidist::criterion::{wud_membership, Verdict, DEFAULT_PRIME_BUDGET};
use equidist::resring::{admissible_k, MultFnSpec};
use equidist::sieve::{sieve_run, EquidistReport, FilterSpec};
use equidist::Error;

/// Status codes; the non-zero values mirror the library's error kinds.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqStatus {
    Ok = 0,
    NullPointer = 1,
    Utf8 = 2,
    InvalidInput = 3,
    BudgetExceeded = 4,
    ModulusTooLarge = 5,
    NotAdmissible = 6,
    BeyondVUndefined = 7,
    ZeroDensity = 8,
    ConstantInput = 9,
    Math = 10,
    Panic = 11,
}

/// Opaque family of multiplicative functions.
pub struct EqFamily {
    spec: MultFnSpec,
}

/// Opaque result of a sieve run.
pub struct EqSieveReport {
    report: EquidistReport,
}

/// Verdict of the equidistribution criterion.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqVerdict {
    In = 0,
    Out = 1,
    Unknown = 2,
    NotAdmissible = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EqStatus {
    match e {
        Error::Invalid(_) | Error::RegimeMismatch { .. } => EqStatus::InvalidInput,
        Error::BudgetExceeded(_) => EqStatus::BudgetExceeded,
        Error::ModulusTooLarge(_) => EqStatus::ModulusTooLarge,
        Error::NotAdmissible(_) | Error::EmptyRk { .. } => EqStatus::NotAdmissible,
        Error::BeyondVUndefined { .. } => EqStatus::BeyondVUndefined,
        Error::ZeroDensity(_) => EqStatus::ZeroDensity,
        Error::ConstantInput => EqStatus::ConstantInput,
        _ => EqStatus::Math,
    }
}

fn guard<F: FnOnce() -> Result<(), EqStatus>>(f: F) -> EqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            EqStatus::Panic
        }
    }
}

fn lift<T>(r: equidist::Result<T>) -> Result<T, EqStatus> {
    r.map_err(|e| {
        set_error(&format!("{}: {e}", e.code()));
        status_of(&e)
    })
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, EqStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(EqStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        EqStatus::Utf8
    })
}

fn check_out<T>(out: *mut T) -> Result<(), EqStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(EqStatus::NullPointer);
    }
    Ok(())
}

unsafe fn write_json(out: *mut *mut c_char, v: &impl serde::Serialize) -> Result<(), EqStatus> {
    let text = serde_json::to_string(v).map_err(|e| {
        set_error(&format!("serialize: {e}"));
        EqStatus::Math
    })?;
    *out = CString::new(text).unwrap_or_default().into_raw();
    Ok(())
}

/// Message for the last failed call on this thread. Valid until the next call.
#[no_mangle]
pub extern "C" fn eq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a family from a preset name (phi, sigma, sigma_r:<r>, phi_sigma_joint) with `v` levels.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eq_family_from_preset(name: *const c_char, v: usize, out: *mut *mut EqFamily) -> EqStatus {
    guard(|| {
        check_out(out)?;
        let name = read_str(name)?;
        let spec = lift(preset(name, v))?;
        *out = Box::into_raw(Box::new(EqFamily { spec }));
        Ok(())
    })
}

/// Create a family from the text of a TOML spec file.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eq_family_from_toml(toml: *const c_char, out: *mut *mut EqFamily) -> EqStatus {
    guard(|| {
        check_out(out)?;
        let text = read_str(toml)?;
        let spec = lift(SpecFile::parse(text).and_then(|s| s.to_spec()))?;
        *out = Box::into_raw(Box::new(EqFamily { spec }));
        Ok(())
    })
}

/// # Safety
/// `family` must come from an `eq_family_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eq_family_free(family: *mut EqFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Number of functions K in the family.
///
/// # Safety
/// `family` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn eq_family_k(family: *const EqFamily) -> usize {
    family.as_ref().map_or(0, |f| f.spec.k())
}

/// Least admissible index k for q, or 0 when none exists up to V.
///
/// # Safety
/// `family` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn eq_admissible_k(family: *const EqFamily, q: u64) -> usize {
    family
        .as_ref()
        .and_then(|f| admissible_k(&f.spec, q).k)
        .unwrap_or(0)
}

/// Decide weak equidistribution mod q. `prime_budget` 0 selects the default.
/// `json_out` may be null; otherwise it receives the full verdict as JSON.
///
/// # Safety
/// `family` must be a live handle, `verdict` a valid pointer and `json_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn eq_check_criterion(
    family: *const EqFamily,
    q: u64,
    prime_budget: u64,
    verdict: *mut EqVerdict,
    json_out: *mut *mut c_char,
) -> EqStatus {
    guard(|| {
        check_out(verdict)?;
        let fam = family.as_ref().ok_or_else(|| {
            set_error("null family");
            EqStatus::NullPointer
        })?;
        let budget = if prime_budget == 0 { DEFAULT_PRIME_BUDGET } else { prime_budget };
        let v = lift(wud_membership(&fam.spec, q, budget, None))?;
        *verdict = match v.status {
            Verdict::In => EqVerdict::In,
            Verdict::Out => EqVerdict::Out,
            Verdict::Unknown => EqVerdict::Unknown,
            Verdict::NotAdmissible => EqVerdict::NotAdmissible,
        };
        if !json_out.is_null() {
            write_json(json_out, &v)?;
        }
        Ok(())
    })
}

/// Sieve n <= x and tabulate the residues mod q. `filter` uses the CLI syntax
/// (none, pr:R, pt-nk:T, convenient, prime-power); null means none.
///
/// # Safety
/// `family` must be a live handle, `filter` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_run(
    family: *const EqFamily,
    x: u64,
    q: u64,
    k: u32,
    filter: *const c_char,
    out: *mut *mut EqSieveReport,
) -> EqStatus {
    guard(|| {
        check_out(out)?;
        let fam = family.as_ref().ok_or_else(|| {
            set_error("null family");
            EqStatus::NullPointer
        })?;
        let filter: FilterSpec = if filter.is_null() {
            FilterSpec::None
        } else {
            lift(read_str(filter)?.parse())?
        };
        let report = lift(sieve_run(&fam.spec, x, q, k, filter))?;
        *out = Box::into_raw(Box::new(EqSieveReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_report_coprime_total(report: *const EqSieveReport) -> u64 {
    report.as_ref().map_or(0, |r| r.report.coprime_total)
}

/// Max relative deviation; negative when nothing passed the filter.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_report_discrepancy(report: *const EqSieveReport) -> f64 {
    report
        .as_ref()
        .and_then(|r| r.report.discrepancy)
        .unwrap_or(-1.0)
}

/// Count of the residue tuple `tuple[0..len]`.
///
/// # Safety
/// `report` must be a live handle and `tuple` point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_report_count(report: *const EqSieveReport, tuple: *const u64, len: usize) -> u64 {
    match (report.as_ref(), tuple.is_null()) {
        (Some(r), false) => r.report.count(std::slice::from_raw_parts(tuple, len)),
        _ => 0,
    }
}

/// The whole report as JSON.
///
/// # Safety
/// `report` must be a live handle and `json_out` valid.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_report_json(report: *const EqSieveReport, json_out: *mut *mut c_char) -> EqStatus {
    guard(|| {
        check_out(json_out)?;
        let r = report.as_ref().ok_or_else(|| {
            set_error("null report");
            EqStatus::NullPointer
        })?;
        write_json(json_out, &r.report)
    })
}

/// # Safety
/// `report` must come from `eq_sieve_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eq_sieve_report_free(report: *mut EqSieveReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn eq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn family(name: &str) -> *mut EqFamily {
        let mut f = ptr::null_mut();
        let c = CString::new(name).unwrap();
        assert_eq!(unsafe { eq_family_from_preset(c.as_ptr(), 4, &mut f) }, EqStatus::Ok);
        f
    }

    #[test]
    fn criterion_through_handles() {
        let f = family("phi");
        let mut v = EqVerdict::Unknown;
        let mut js = ptr::null_mut();
        unsafe {
            assert_eq!(eq_check_criterion(f, 35, 0, &mut v, &mut js), EqStatus::Ok);
            assert_eq!(v, EqVerdict::In);
            let text = CStr::from_ptr(js).to_str().unwrap();
            assert!(text.contains("\"status\":\"IN\""), "{text}");
            eq_string_free(js);
            assert_eq!(eq_check_criterion(f, 6, 0, &mut v, ptr::null_mut()), EqStatus::Ok);
            assert_eq!(v, EqVerdict::NotAdmissible);
            assert_eq!(eq_admissible_k(f, 9), 1);
            eq_family_free(f);
        }
    }

    #[test]
    fn sieve_through_handles() {
        let f = family("phi");
        let mut r = ptr::null_mut();
        let none = CString::new("none").unwrap();
        unsafe {
            assert_eq!(eq_sieve_run(f, 10, 5, 1, none.as_ptr(), &mut r), EqStatus::Ok);
            assert_eq!(eq_sieve_report_coprime_total(r), 10);
            assert_eq!(eq_sieve_report_count(r, [1u64].as_ptr(), 1), 4);
            let mut js = ptr::null_mut();
            assert_eq!(eq_sieve_report_json(r, &mut js), EqStatus::Ok);
            eq_string_free(js);
            eq_sieve_report_free(r);
            eq_family_free(f);
        }
    }

    #[test]
    fn errors_map_to_codes() {
        let mut f = ptr::null_mut();
        let bad = CString::new("tau").unwrap();
        unsafe {
            assert_eq!(eq_family_from_preset(bad.as_ptr(), 4, &mut f), EqStatus::InvalidInput);
            let msg = CStr::from_ptr(eq_last_error()).to_str().unwrap();
            assert!(msg.starts_with("INVALID_INPUT"), "{msg}");
            assert_eq!(eq_family_from_preset(ptr::null(), 4, &mut f), EqStatus::NullPointer);
        }
        let f = family("sigma");
        let mut r = ptr::null_mut();
        unsafe {
            assert_eq!(eq_sieve_run(f, 10, 1_000_000, 1, ptr::null(), &mut r), EqStatus::ModulusTooLarge);
            let filt = CString::new("pr:x").unwrap();
            assert_eq!(eq_sieve_run(f, 10, 5, 1, filt.as_ptr(), &mut r), EqStatus::InvalidInput);
            eq_family_free(f);
        }
    }

    #[test]
    fn toml_family() {
        let text = CString::new("preset = \"sigma_r:3\"\nV = 2\n").unwrap();
        let mut f = ptr::null_mut();
        unsafe {
            assert_eq!(eq_family_from_toml(text.as_ptr(), &mut f), EqStatus::Ok);
            assert_eq!(eq_family_k(f), 1);
            eq_family_free(f);
        }
    }

    #[test]
    fn header_lists_the_api() {
        let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/equidist.h")).unwrap();
        for name in ["eq_family_from_preset", "eq_sieve_run", "eq_check_criterion", "eq_string_free", "EqStatus"] {
            assert!(h.contains(name), "{name} missing from header");
        }
    }
}
