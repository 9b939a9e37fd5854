//! Character sums with polynomial arguments: l-critical data, numerical
//! checks of the Weil and Cochrane bounds, and point counts on the small
//! varieties V_{2,1} and V_{3,2}.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith::{euler_phi, is_prime};
use crate::cyclo::{int_group_ring_is_zero, CycloSum};
use crate::dirichlet::{characters_mod, DirichletChar};
use crate::error::{Error, Result};
use crate::fpoly::FpPoly;
use crate::intmat::is_mult_independent;
use crate::intpoly::IntPoly;
use crate::resring::{unit_group, UnitGroup};

/// Gap between a sum and its bound below which the comparison is redone
/// exactly where possible.
const NEAR_MISS: f64 = 1e-6;
const RENDER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CriticalData {
    pub ell: u64,
    pub t: u32,
    pub critical_poly: IntPoly,
    pub critical_points: Vec<(u64, u32)>,
    pub max_multiplicity: u32,
}

impl CriticalData {
    pub fn total_multiplicity(&self) -> u32 {
        self.critical_points.iter().map(|&(_, m)| m).sum()
    }
}

pub fn critical_data(g: &IntPoly, ell: u64) -> Result<CriticalData> {
    if g.is_constant() {
        return Err(Error::DerivativeVanishes(ell));
    }
    if g.ord_ell(ell) != Some(0) {
        return Err(Error::PolyVanishesModEll(ell));
    }
    let dg = g.derivative();
    let t = dg.ord_ell(ell).expect("nonconstant g has g' != 0");
    let scale = num_traits::pow(BigInt::from(ell), t as usize);
    let critical_poly = IntPoly::new(dg.coeffs().iter().map(|c| c / &scale).collect());
    let cp = FpPoly::from_int(&critical_poly, ell);
    let gm = g.to_mod(ell);
    let critical_points: Vec<(u64, u32)> = cp
        .roots_with_multiplicity()
        .into_iter()
        .filter(|&(theta, _)| gm.eval(theta) != 0)
        .collect();
    let max_multiplicity = critical_points.iter().map(|&(_, m)| m).max().unwrap_or(0);
    Ok(CriticalData {
        ell,
        t,
        critical_poly,
        critical_points,
        max_multiplicity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Weil,
    Cochrane,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub ell: u64,
    pub e: u32,
    pub character: Vec<u64>,
    pub poly: IntPoly,
    pub sum_abs: f64,
    pub bound: f64,
    pub margin: f64,
    pub satisfied: bool,
    /// Within 1e-6 of the bound and not settled exactly.
    pub near_miss: bool,
    pub exact_checked: bool,
}

/// Sum of chi(g(u)) over all u mod ell^e, exactly, as a histogram of
/// exponents of zeta_m with m the group exponent.
struct ExactSum {
    m: u64,
    hist: Vec<i64>,
}

impl ExactSum {
    fn new(grp: &UnitGroup, chi: &DirichletChar, g: &IntPoly) -> Self {
        // chi takes values in the order-o roots of unity, so fold onto Z[C_o].
        let step = grp.exponent() / chi.order(grp);
        let m = grp.exponent() / step;
        let gm = g.to_mod(grp.q);
        let mut hist = vec![0i64; m as usize];
        for u in 0..grp.q {
            if let Some(e) = chi.value_exp(grp, gm.eval(u)) {
                hist[(e / step) as usize] += 1;
            }
        }
        ExactSum { m, hist }
    }

    /// S * conj(S) == b2 in Z[zeta_m], with integer group-ring arithmetic.
    fn norm_is(&self, b2: i64) -> bool {
        let m = self.m as usize;
        let nz: Vec<(usize, i64)> = self.hist.iter().copied().enumerate().filter(|&(_, c)| c != 0).collect();
        let mut prod = vec![0i64; m];
        for &(i, a) in &nz {
            for &(j, b) in &nz {
                prod[(i + m - j) % m] += a * b;
            }
        }
        prod[0] -= b2;
        int_group_ring_is_zero(&prod, self.m)
    }

    fn is_zero(&self) -> bool {
        int_group_ring_is_zero(&self.hist, self.m)
    }

    fn cyclo(&self) -> CycloSum {
        CycloSum::from_int_hist(self.m, &self.hist)
    }
}

struct Judgement {
    sum_abs: f64,
    satisfied: bool,
    near_miss: bool,
    exact_checked: bool,
}

/// Decide |S| <= bound from a floating value, redoing ties exactly: S = 0
/// always, and |S|^2 = bound^2 when bound^2 is a known rational.
fn judge(
    approx: f64,
    bound: f64,
    bound_sq: Option<BigRational>,
    exact: impl FnOnce() -> ExactSum,
) -> Judgement {
    let close = (approx - bound).abs() <= NEAR_MISS || approx <= NEAR_MISS;
    if !close {
        return Judgement {
            sum_abs: approx,
            satisfied: approx <= bound + RENDER_TOL,
            near_miss: false,
            exact_checked: false,
        };
    }
    let hist = exact();
    if hist.is_zero() {
        return Judgement {
            sum_abs: 0.0,
            satisfied: bound >= 0.0,
            near_miss: false,
            exact_checked: true,
        };
    }
    if let Some(b2) = bound_sq {
        let tie = match (b2.is_integer(), b2.to_integer().to_i64()) {
            (true, Some(b)) => hist.norm_is(b),
            _ => {
                let s = hist.cyclo();
                s.mul(&s.conj()).sub(&CycloSum::from_rational(1, b2)).is_zero()
            }
        };
        if tie {
            return Judgement {
                sum_abs: bound,
                satisfied: true,
                near_miss: false,
                exact_checked: true,
            };
        }
    }
    let v = hist.cyclo().abs_f64();
    Judgement {
        sum_abs: v,
        satisfied: v <= bound + RENDER_TOL,
        near_miss: (v - bound).abs() <= NEAR_MISS,
        exact_checked: true,
    }
}

/// Factorization data of F mod ell needed by the Weil check.
struct WeilShape {
    radical_degree: usize,
    multiplicities: Vec<u64>,
}

fn weil_shape(f: &IntPoly, ell: u64) -> Result<WeilShape> {
    let fp = FpPoly::from_int(f, ell);
    if fp.is_zero() {
        return Err(Error::PolyVanishesModEll(ell));
    }
    let layers = fp.squarefree_layers();
    Ok(WeilShape {
        radical_degree: layers.iter().map(|(g, _)| g.degree().unwrap_or(0)).sum(),
        multiplicities: layers.iter().map(|&(_, m)| m).collect(),
    })
}

impl WeilShape {
    fn excluded(&self, order: u64) -> bool {
        self.multiplicities.iter().all(|m| m % order == 0)
    }
}

pub fn verify_weil(ell: u64, chi: &DirichletChar, f: &IntPoly) -> Result<BoundReport> {
    if !is_prime(ell) {
        return Err(Error::Invalid(format!("{ell} is not prime")));
    }
    let grp = unit_group(ell)?;
    let shape = weil_shape(f, ell)?;
    if shape.excluded(chi.order(&grp)) {
        return Err(Error::ExcludedForm(ell));
    }
    let d = shape.radical_degree as f64;
    let bound = (d - 1.0) * (ell as f64).sqrt();
    let b2 = BigRational::from_integer(BigInt::from((shape.radical_degree as u64 - 1).pow(2) * ell));
    let s = ExactSum::new(&grp, chi, f);
    let approx = s.cyclo().abs_f64();
    let j = judge(approx, bound, Some(b2), || s);
    Ok(BoundReport {
        kind: BoundKind::Weil,
        ell,
        e: 1,
        character: chi.exponents.clone(),
        poly: f.clone(),
        sum_abs: j.sum_abs,
        bound,
        margin: bound - j.sum_abs,
        satisfied: j.satisfied,
        near_miss: j.near_miss,
        exact_checked: j.exact_checked,
    })
}

/// The right-hand side of the Cochrane bound, given the critical data.
pub fn cochrane_bound(cd: &CriticalData, e: u32) -> f64 {
    let ell = cd.ell as f64;
    let m1 = (cd.max_multiplicity + 1) as f64;
    let shape = ell.powf(cd.t as f64 / m1) * ell.powf(e as f64 * (1.0 - 1.0 / m1));
    if cd.critical_points.is_empty() {
        0.0
    } else if cd.ell == 2 {
        12.5 * shape
    } else {
        cd.total_multiplicity() as f64 * shape
    }
}

fn cochrane_precondition(cd: &CriticalData, e: u32) -> Result<()> {
    let need = cd.t + if cd.ell == 2 { 3 } else { 2 };
    if e < need {
        return Err(Error::PreconditionETooSmall { e, t: cd.t });
    }
    Ok(())
}

pub fn verify_cochrane(ell: u64, e: u32, chi: &DirichletChar, g: &IntPoly) -> Result<BoundReport> {
    if !is_prime(ell) {
        return Err(Error::Invalid(format!("{ell} is not prime")));
    }
    let grp = unit_group(ell.pow(e))?;
    if !chi.is_primitive(&grp) {
        return Err(Error::Invalid("character is not primitive".into()));
    }
    let cd = critical_data(g, ell)?;
    cochrane_precondition(&cd, e)?;
    let bound = cochrane_bound(&cd, e);
    let s = ExactSum::new(&grp, chi, g);
    let approx = s.cyclo().abs_f64();
    let j = judge(approx, bound, None, || s);
    Ok(BoundReport {
        kind: BoundKind::Cochrane,
        ell,
        e,
        character: chi.exponents.clone(),
        poly: g.clone(),
        sum_abs: j.sum_abs,
        bound,
        margin: bound - j.sum_abs,
        satisfied: j.satisfied,
        near_miss: j.near_miss,
        exact_checked: j.exact_checked,
    })
}

/// All character sums sum_u chi(g(u)) mod a prime power at once, in the
/// order of `characters_mod`.
fn spectrum(grp: &UnitGroup, g: &IntPoly, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    assert!(grp.components.len() <= 1);
    let gm = g.to_mod(grp.q);
    let Some(comp) = grp.components.first() else {
        return vec![Complex64::new(grp.q as f64, 0.0)];
    };
    let orders = &comp.orders;
    let fft_inverse = |planner: &mut FftPlanner<f64>, data: &mut Vec<Complex64>| {
        if data.len() > 1 {
            planner.plan_fft_inverse(data.len()).process(data);
        }
    };
    match orders.len() {
        0 => {
            let n = (0..grp.q).filter(|&u| comp.dlog(gm.eval(u)).is_some()).count();
            vec![Complex64::new(n as f64, 0.0)]
        }
        1 => {
            let n = orders[0] as usize;
            let mut h = vec![Complex64::new(0.0, 0.0); n];
            for u in 0..grp.q {
                if let Some(x) = comp.dlog(gm.eval(u)) {
                    h[x[0] as usize].re += 1.0;
                }
            }
            fft_inverse(planner, &mut h);
            h
        }
        _ => {
            let n = orders[1] as usize;
            let mut h0 = vec![Complex64::new(0.0, 0.0); n];
            let mut h1 = h0.clone();
            for u in 0..grp.q {
                if let Some(x) = comp.dlog(gm.eval(u)) {
                    if x[0] == 0 {
                        h0[x[1] as usize].re += 1.0;
                    } else {
                        h1[x[1] as usize].re += 1.0;
                    }
                }
            }
            fft_inverse(planner, &mut h0);
            fft_inverse(planner, &mut h1);
            let mut out: Vec<Complex64> = h0.iter().zip(&h1).map(|(a, b)| a + b).collect();
            out.extend(h0.iter().zip(&h1).map(|(a, b)| a - b));
            out
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepSummary {
    pub checked: usize,
    pub skipped: usize,
    pub violations: Vec<BoundReport>,
    pub near_misses: usize,
    pub exact_checks: usize,
    /// Largest sum_abs / bound over cases with a positive bound.
    pub max_ratio: f64,
    #[serde(skip)]
    pub rows: Vec<BoundRow>,
}

/// One CSV line of the verify-bounds output.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub ell: u64,
    pub e: u32,
    pub char_id: usize,
    pub poly_id: usize,
    pub sum_abs: f64,
    pub bound: f64,
    pub margin: f64,
    pub status: String,
}

impl SweepSummary {
    fn record(&mut self, row: BoundRow, report: Option<BoundReport>, j: &Judgement, keep_rows: bool) {
        self.checked += 1;
        if j.near_miss {
            self.near_misses += 1;
        }
        if j.exact_checked {
            self.exact_checks += 1;
        }
        if row.bound > 0.0 {
            self.max_ratio = self.max_ratio.max(row.sum_abs / row.bound);
        }
        if !j.satisfied {
            if let Some(r) = report {
                self.violations.push(r);
            }
        }
        if keep_rows {
            self.rows.push(row);
        }
    }

    fn skip(&mut self, row: BoundRow, keep_rows: bool) {
        self.skipped += 1;
        if keep_rows {
            self.rows.push(row);
        }
    }
}

fn status(j: &Judgement) -> String {
    match (j.satisfied, j.near_miss) {
        (true, false) => "ok".into(),
        (true, true) => "ok_near_miss".into(),
        (false, _) => "violated".into(),
    }
}

/// Weil check for every prime in `primes`, every nontrivial character and
/// every polynomial of the corpus.
pub fn weil_sweep(primes: &[u64], corpus: &[IntPoly], keep_rows: bool) -> Result<SweepSummary> {
    let mut out = SweepSummary::default();
    let mut planner = FftPlanner::new();
    for &ell in primes {
        let grp = unit_group(ell)?;
        let chars = characters_mod(&grp);
        for (pid, f) in corpus.iter().enumerate() {
            let shape = match weil_shape(f, ell) {
                Ok(s) => s,
                Err(_) => {
                    for cid in 1..chars.len() {
                        out.skip(skip_row(ell, 1, cid, pid, "vanishes_mod_ell"), keep_rows);
                    }
                    continue;
                }
            };
            let spec = spectrum(&grp, f, &mut planner);
            let d = shape.radical_degree as u64;
            let bound = (d as f64 - 1.0) * (ell as f64).sqrt();
            let b2 = BigRational::from_integer(BigInt::from((d.max(1) - 1).pow(2) * ell));
            for (cid, chi) in chars.iter().enumerate().skip(1) {
                if shape.excluded(chi.order(&grp)) {
                    out.skip(skip_row(ell, 1, cid, pid, "excluded_form"), keep_rows);
                    continue;
                }
                let j = judge(spec[cid].norm(), bound, Some(b2.clone()), || ExactSum::new(&grp, chi, f));
                let row = BoundRow {
                    ell,
                    e: 1,
                    char_id: cid,
                    poly_id: pid,
                    sum_abs: j.sum_abs,
                    bound,
                    margin: bound - j.sum_abs,
                    status: status(&j),
                };
                let report = (!j.satisfied).then(|| BoundReport {
                    kind: BoundKind::Weil,
                    ell,
                    e: 1,
                    character: chi.exponents.clone(),
                    poly: f.clone(),
                    sum_abs: j.sum_abs,
                    bound,
                    margin: bound - j.sum_abs,
                    satisfied: false,
                    near_miss: j.near_miss,
                    exact_checked: j.exact_checked,
                });
                out.record(row, report, &j, keep_rows);
            }
        }
    }
    Ok(out)
}

fn skip_row(ell: u64, e: u32, cid: usize, pid: usize, why: &str) -> BoundRow {
    BoundRow {
        ell,
        e,
        char_id: cid,
        poly_id: pid,
        sum_abs: f64::NAN,
        bound: f64::NAN,
        margin: f64::NAN,
        status: format!("skipped_{why}"),
    }
}

/// Cochrane check for every (ell, e), primitive character and corpus
/// polynomial meeting the preconditions.
pub fn cochrane_sweep(prime_powers: &[(u64, u32)], corpus: &[IntPoly], keep_rows: bool) -> Result<SweepSummary> {
    let mut out = SweepSummary::default();
    let mut planner = FftPlanner::new();
    for &(ell, e) in prime_powers {
        let grp = unit_group(ell.pow(e))?;
        let chars = characters_mod(&grp);
        for (pid, g) in corpus.iter().enumerate() {
            let cd = match critical_data(g, ell) {
                Ok(cd) => cd,
                Err(err) => {
                    out.skip(skip_row(ell, e, 0, pid, &err.code().to_lowercase()), keep_rows);
                    continue;
                }
            };
            if let Err(err) = cochrane_precondition(&cd, e) {
                out.skip(skip_row(ell, e, 0, pid, &err.code().to_lowercase()), keep_rows);
                continue;
            }
            let bound = cochrane_bound(&cd, e);
            let spec = spectrum(&grp, g, &mut planner);
            for (cid, chi) in chars.iter().enumerate() {
                if !chi.is_primitive(&grp) {
                    continue;
                }
                let j = judge(spec[cid].norm(), bound, None, || ExactSum::new(&grp, chi, g));
                let row = BoundRow {
                    ell,
                    e,
                    char_id: cid,
                    poly_id: pid,
                    sum_abs: j.sum_abs,
                    bound,
                    margin: bound - j.sum_abs,
                    status: status(&j),
                };
                let report = (!j.satisfied).then(|| BoundReport {
                    kind: BoundKind::Cochrane,
                    ell,
                    e,
                    character: chi.exponents.clone(),
                    poly: g.clone(),
                    sum_abs: j.sum_abs,
                    bound,
                    margin: bound - j.sum_abs,
                    satisfied: false,
                    near_miss: j.near_miss,
                    exact_checked: j.exact_checked,
                });
                out.record(row, report, &j, keep_rows);
            }
        }
    }
    Ok(out)
}

/// Twenty polynomials of degree at most 4 used by the bound sweeps.
pub fn bound_corpus() -> Vec<IntPoly> {
    let p = IntPoly::from_i64s;
    vec![
        p(&[0, 1]),
        p(&[1, 1]),
        p(&[-1, 1]),
        p(&[2, 1]),
        p(&[1, 2]),
        p(&[1, 0, 1]),
        p(&[-2, 0, 1]),
        p(&[1, 1, 1]),
        p(&[-1, -1, 1]),
        p(&[3, 0, 1]),
        p(&[0, 1, 1]),
        p(&[1, 2, 1]),
        p(&[0, 1, 0, 1]),
        p(&[2, 0, 0, 1]),
        p(&[1, -1, 0, 1]),
        p(&[1, 0, 1, 1]),
        p(&[1, 0, 0, 0, 1]),
        p(&[1, 1, 0, 0, 1]),
        p(&[1, 0, 2, 0, 1]),
        p(&[0, 0, 1, 2, 1]),
    ]
}

fn dlog_table(ell: u64) -> Result<(std::sync::Arc<UnitGroup>, Vec<Option<usize>>)> {
    let grp = unit_group(ell)?;
    let table = (0..ell)
        .map(|x| grp.components.first().and_then(|c| c.dlog(x)).map(|v| v[0] as usize).or(if ell == 2 && x == 1 { Some(0) } else { None }))
        .collect();
    Ok((grp, table))
}

/// #V_{2,1}(w) = #{(v1, v2) in U_l^2 : F(v1) F(v2) = w} for every unit w,
/// as (w, count) pairs in increasing w.
pub fn v21_counts(ell: u64, f: &IntPoly) -> Result<Vec<(u64, u64)>> {
    if f.is_squarefull()? {
        return Err(Error::SquarefullF);
    }
    let (grp, dl) = dlog_table(ell)?;
    let n = (ell - 1) as usize;
    let fm = f.to_mod(ell);
    let mut h = vec![0u64; n];
    for v in 1..ell {
        if let Some(x) = dl[fm.eval(v) as usize] {
            h[x] += 1;
        }
    }
    let mut conv = vec![0u64; n];
    for (a, &ha) in h.iter().enumerate().filter(|(_, &c)| c > 0) {
        for (b, &hb) in h.iter().enumerate() {
            conv[(a + b) % n] += ha * hb;
        }
    }
    let mut out: Vec<(u64, u64)> = (0..n)
        .map(|x| (grp.exp(&[x as u64]) % ell.max(1), conv[x]))
        .collect();
    if ell == 2 {
        out = vec![(1, conv[0])];
    }
    out.sort_unstable();
    Ok(out)
}

pub fn v21_count(ell: u64, f: &IntPoly, w: u64) -> Result<u64> {
    let all = v21_counts(ell, f)?;
    all.iter()
        .find(|&&(x, _)| x == w % ell)
        .map(|&(_, c)| c)
        .ok_or_else(|| Error::Invalid(format!("{w} is not a unit mod {ell}")))
}

/// #V_{3,2}(u, w) = #{(v1, v2, v3) in U_l^3 : prod F(v_i) = u, prod G(v_i) = w}
/// for every pair of units, as ((u, w), count).
pub fn v32_counts(ell: u64, f: &IntPoly, g: &IntPoly) -> Result<Vec<((u64, u64), u64)>> {
    if f.is_squarefull()? {
        return Err(Error::SquarefullF);
    }
    if !is_mult_independent(&[f.clone(), g.clone()])? {
        return Err(Error::MultDependent);
    }
    let (grp, dl) = dlog_table(ell)?;
    let n = (ell - 1) as usize;
    let (fm, gm) = (f.to_mod(ell), g.to_mod(ell));
    let mut pts: std::collections::BTreeMap<(usize, usize), u64> = Default::default();
    for v in 1..ell {
        if let (Some(a), Some(b)) = (dl[fm.eval(v) as usize], dl[gm.eval(v) as usize]) {
            *pts.entry((a, b)).or_default() += 1;
        }
    }
    let mut h2 = vec![0u64; n * n];
    for (&(a1, b1), &c1) in &pts {
        for (&(a2, b2), &c2) in &pts {
            h2[((a1 + a2) % n) * n + (b1 + b2) % n] += c1 * c2;
        }
    }
    let mut h3 = vec![0u64; n * n];
    for (i, &c) in h2.iter().enumerate().filter(|(_, &c)| c > 0) {
        let (a, b) = (i / n, i % n);
        for (&(a3, b3), &c3) in &pts {
            h3[((a + a3) % n) * n + (b + b3) % n] += c * c3;
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let u = grp.exp(&[a as u64]) % ell;
            let w = grp.exp(&[b as u64]) % ell;
            out.push(((u, w), h3[a * n + b]));
        }
    }
    if ell == 2 {
        out = vec![((1, 1), h3[0])];
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarietyReport {
    pub ell: u64,
    pub phi: u64,
    pub max_v21: u64,
    /// max #V21 - phi(l), compared with C sqrt(l)
    pub v21_excess_over_sqrt: f64,
    pub max_v32: Option<u64>,
    /// max #V32 / phi(l)
    pub v32_ratio: Option<f64>,
}

pub fn variety_count(ell: u64, f: &IntPoly, g: Option<&IntPoly>) -> Result<VarietyReport> {
    let phi = euler_phi(ell);
    let v21 = v21_counts(ell, f)?;
    let max_v21 = v21.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let (max_v32, v32_ratio) = match g {
        Some(g) => {
            let m = v32_counts(ell, f, g)?.iter().map(|&(_, c)| c).max().unwrap_or(0);
            (Some(m), Some(m as f64 / phi as f64))
        }
        None => (None, None),
    };
    Ok(VarietyReport {
        ell,
        phi,
        max_v21,
        v21_excess_over_sqrt: (max_v21 as f64 - phi as f64) / (ell as f64).sqrt(),
        max_v32,
        v32_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrdDerivOutcome {
    pub ell: u64,
    pub r: u32,
    /// ord_l of (T^phi(l^r) prod F_i^A_i)'
    pub tau: u32,
    /// ord_l of F~ = sum_i A_i F_i' prod_{j != i} F_j
    pub ord_ftilde: u32,
    /// Multiplicities of the roots of l^-tau (...)' off the zeros of T prod F_i
    /// agree with those in l^-tau F~.
    pub roots_agree: bool,
}

/// Expand the derivative coefficientwise and compare with F~.
pub fn ord_deriv_check(fs: &[IntPoly], a: &[u32], ell: u64, r: u32) -> Result<OrdDerivOutcome> {
    let prod = fs.iter().fold(IntPoly::one(), |acc, f| &acc * f);
    if prod.ord_ell(ell) != Some(0) {
        return Err(Error::PolyVanishesModEll(ell));
    }
    let n = euler_phi(ell.pow(r)) as usize;
    let powered = fs
        .iter()
        .zip(a)
        .fold(IntPoly::one(), |acc, (f, &ai)| &acc * &f.pow(ai));
    // (T^N P)' = T^(N-1) * sum_i (N + i) p_i T^i; the power of T is a unit
    // off T = 0 and has ord_l zero, so only the cofactor is kept.
    let deriv = IntPoly::new(
        powered
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * BigInt::from(n + i))
            .collect(),
    );
    let tau = deriv.ord_ell(ell).ok_or(Error::DerivativeVanishes(ell))?;
    let mut ftilde = IntPoly::zero();
    for i in 0..fs.len() {
        let mut term = fs[i].derivative().scale(&BigInt::from(a[i]));
        for (j, f) in fs.iter().enumerate() {
            if j != i {
                term = &term * f;
            }
        }
        ftilde = &ftilde + &term;
    }
    let ord_ftilde = ftilde.ord_ell(ell).ok_or(Error::DerivativeVanishes(ell))?;

    let strip = |p: &IntPoly, t: u32| {
        let s = num_traits::pow(BigInt::from(ell), t as usize);
        FpPoly::from_int(&IntPoly::new(p.coeffs().iter().map(|c| c / &s).collect()), ell)
    };
    let c = strip(&deriv, tau);
    let ft = strip(&ftilde, tau.min(ord_ftilde));
    let avoid = (&IntPoly::x() * &prod).to_mod(ell);
    let ft_roots: std::collections::HashMap<u64, u32> = ft.roots_with_multiplicity().into_iter().collect();
    let roots_agree = c
        .roots_with_multiplicity()
        .into_iter()
        .filter(|&(theta, _)| avoid.eval(theta) != 0)
        .all(|(theta, mult)| ft_roots.get(&theta) == Some(&mult));
    Ok(OrdDerivOutcome {
        ell,
        r,
        tau,
        ord_ftilde,
        roots_agree,
    })
}
