//! Deciding joint weak equidistribution modulo q through the vanishing of
//! the local factors sum_j prod_i chi_i(f_i(p^j)) p^(-j/k).
//!
//! For a fixed character tuple the term sequence depends on p only through
//! p mod q and is eventually periodic, so the local factor is
//! N(t) / (1 - t^period) at t = p^(-1/k) with N a polynomial over Z[zeta_m].
//! Each residue class of primes is settled exactly: N vanishes at some
//! p^(-1/k) only if p divides a leading coefficient of a power-basis
//! coordinate of N (k = 1) or of the norm prod_a N(zeta_k^a t) (k >= 2).

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd, is_prime, lcm};
use crate::cyclo::{reduce_mod_cyclotomic, CycloSum};
use crate::dirichlet::{annihilator_tuples, generates_full, CharTuple, DirichletChar};
use crate::error::{Error, Result};
use crate::resring::{admissible_k, unit_group, BeyondRule, ClosedForm, MultFnSpec, UnitGroup};

pub const DEFAULT_PRIME_BUDGET: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ZeroStatus {
    Zero,
    Nonzero,
    Unknown,
}

/// Default cap on the exponent j searched for a repeat of the value state.
pub fn default_j_max(spec: &MultFnSpec, g: &UnitGroup) -> usize {
    8 * (spec.v_max() + (g.q as usize) * (g.exponent() as usize))
}

/// Per-function state beyond V; the tuple of states determines every later value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum State {
    Const,
    Cycle(usize),
    /// p^(v-1)
    Totient(u64),
    /// (p^(rv), sum_{j<=v} p^(rj))
    DivPow(u64, u64),
}

fn mulm(a: u64, b: u64, q: u64) -> u64 {
    (a as u128 * b as u128 % q as u128) as u64
}

/// The residues f_i(p^v) mod q for v >= 1, split into a prefix and a cycle
/// that repeats forever, for any prime p = c (mod q).
fn value_cycle(spec: &MultFnSpec, c: u64, q: u64, j_max: usize) -> Result<(Vec<Vec<u64>>, Vec<Vec<u64>>)> {
    let vmax = spec.v_max();
    let kk = spec.k();
    let direct = |v: usize| -> Vec<u64> { (0..kk).map(|i| spec.poly(i, v).to_mod(q).eval(c)).collect() };
    let mut values: Vec<Vec<u64>> = (1..=vmax).map(direct).collect();
    let v0 = vmax + 1;
    let mut states: Vec<State> = match &spec.beyond {
        BeyondRule::Undefined => {
            return Err(Error::BeyondVUndefined {
                exponent: v0 as u32,
                v_max: vmax,
            })
        }
        BeyondRule::ConstantOne => vec![State::Const; kk],
        BeyondRule::Periodic { start, period } => vec![State::Cycle((v0 - start) % period); kk],
        BeyondRule::ClosedForm { forms } => forms
            .iter()
            .map(|f| match *f {
                ClosedForm::Totient => State::Totient(crate::arith::pow_mod(c, v0 as u64 - 1, q)),
                ClosedForm::DivisorPower(r) => {
                    let pr = crate::arith::pow_mod(c, r as u64, q);
                    let mut t = 1 % q;
                    let mut acc = 0;
                    for _ in 0..=v0 {
                        acc = (acc + t) % q;
                        t = mulm(t, pr, q);
                    }
                    State::DivPow(crate::arith::pow_mod(pr, v0 as u64, q), acc)
                }
            })
            .collect(),
    };
    let value_of = |i: usize, s: &State| -> u64 {
        match s {
            State::Const => 1 % q,
            State::Cycle(idx) => {
                let BeyondRule::Periodic { start, .. } = spec.beyond else { unreachable!() };
                spec.poly(i, start + idx).to_mod(q).eval(c)
            }
            State::Totient(pw) => mulm(*pw, (c + q - 1) % q, q),
            State::DivPow(_, acc) => *acc,
        }
    };
    let step = |i: usize, s: &State| -> State {
        match (s, &spec.beyond) {
            (State::Cycle(idx), BeyondRule::Periodic { period, .. }) => State::Cycle((idx + 1) % period),
            (State::Totient(pw), _) => State::Totient(mulm(*pw, c, q)),
            (State::DivPow(t, acc), BeyondRule::ClosedForm { forms }) => {
                let ClosedForm::DivisorPower(r) = forms[i] else { unreachable!() };
                let t2 = mulm(*t, crate::arith::pow_mod(c, r as u64, q), q);
                State::DivPow(t2, (acc + t2) % q)
            }
            (s, _) => s.clone(),
        }
    };
    let mut seen: HashMap<Vec<State>, usize> = HashMap::new();
    let mut v = v0;
    loop {
        if let Some(&first) = seen.get(&states) {
            let cycle = values.split_off(first - 1);
            return Ok((values, cycle));
        }
        if v > j_max.max(v0) {
            return Err(Error::BudgetExceeded(format!("no period of the value sequence within j <= {j_max}")));
        }
        seen.insert(states.clone(), v);
        values.push(states.iter().enumerate().map(|(i, s)| value_of(i, s)).collect());
        states = states.iter().enumerate().map(|(i, s)| step(i, s)).collect();
        v += 1;
    }
}

/// Character-value exponents c_j (mod m), `None` for a zero term, as a
/// prefix and a repeating block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermSequence {
    pub m: u64,
    pub pre: Vec<Option<u64>>,
    pub cycle: Vec<Option<u64>>,
}

impl TermSequence {
    pub fn build(spec: &MultFnSpec, g: &UnitGroup, chis: &[DirichletChar], c: u64, j_max: usize) -> Result<Self> {
        let (pre_vals, cyc_vals) = value_cycle(spec, c, g.q, j_max)?;
        let m = g.exponent();
        let term = |vals: &Vec<u64>| -> Option<u64> {
            let mut e = 0;
            for (chi, &x) in chis.iter().zip(vals) {
                e = (e + chi.value_exp(g, x)?) % m;
            }
            Some(e)
        };
        let mut pre = vec![Some(0)];
        pre.extend(pre_vals.iter().map(term));
        let cycle: Vec<Option<u64>> = cyc_vals.iter().map(term).collect();
        let mut s = TermSequence { m, pre, cycle };
        s.minimize();
        Ok(s)
    }

    fn minimize(&mut self) {
        let n = self.cycle.len();
        if let Some(d) = (1..=n).find(|&d| n % d == 0 && (d..n).all(|i| self.cycle[i] == self.cycle[i - d])) {
            self.cycle.truncate(d);
        }
        while self.pre.len() > 1 && self.pre.last() == self.cycle.last() {
            let x = self.pre.pop().unwrap();
            self.cycle.rotate_right(1);
            debug_assert_eq!(self.cycle[0], x);
        }
    }

    pub fn period(&self) -> usize {
        self.cycle.len()
    }

    pub fn term(&self, j: usize) -> Option<u64> {
        if j < self.pre.len() {
            self.pre[j]
        } else {
            self.cycle[(j - self.pre.len()) % self.cycle.len()]
        }
    }

    /// N(t) = (1 - t^pi) sum_{j<P} c_j t^j + t^P sum_{r<pi} c_{P+r} t^r.
    fn numerator(&self) -> Vec<Gr> {
        let (pl, pi) = (self.pre.len(), self.cycle.len());
        let mut n: Vec<Gr> = vec![Gr::new(); pl + pi];
        let mut add = |deg: usize, e: Option<u64>, sign: i64| {
            if let Some(e) = e {
                let slot = n[deg].entry(e).or_insert(0);
                *slot += sign;
                if *slot == 0 {
                    n[deg].remove(&e);
                }
            }
        };
        for (j, &c) in self.pre.iter().enumerate() {
            add(j, c, 1);
            add(j + pi, c, -1);
        }
        for (r, &c) in self.cycle.iter().enumerate() {
            add(pl + r, c, 1);
        }
        while n.last().is_some_and(|x| x.is_empty()) {
            n.pop();
        }
        n
    }
}

/// Sparse element of Z[C_m]: exponent -> coefficient.
type Gr = BTreeMap<u64, i64>;

/// Coordinates in the power basis 1, zeta, ..., zeta^(phi(m)-1) of Q(zeta_m).
fn power_basis(x: &Gr, m: u64) -> Vec<BigInt> {
    let mut dense = vec![BigInt::zero(); m as usize];
    for (&e, &c) in x {
        dense[e as usize] += c;
    }
    reduce_mod_cyclotomic(&dense, m)
}

/// A polynomial over Q(zeta_m) split into integer coordinate polynomials:
/// `coords[b][n]` is the zeta^b coordinate of the t^n coefficient.
struct CoordPoly {
    coords: Vec<Vec<BigInt>>,
}

impl CoordPoly {
    fn new(poly: &[Gr], m: u64) -> Self {
        let cols: Vec<Vec<BigInt>> = poly.iter().map(|x| power_basis(x, m)).collect();
        let width = crate::cyclo::cyclotomic_poly(m).len() - 1;
        let coords = (0..width)
            .map(|b| {
                let mut row: Vec<BigInt> = cols.iter().map(|c| c[b].clone()).collect();
                while row.last().is_some_and(|x| x.is_zero()) {
                    row.pop();
                }
                row
            })
            .collect();
        CoordPoly { coords }
    }

    fn is_zero(&self) -> bool {
        self.coords.iter().all(|r| r.is_empty())
    }

    /// Primes p for which x = 1/p can be a common root: the prime divisors of
    /// the smallest leading coefficient among nonzero coordinates.
    fn candidate_primes(&self) -> Vec<u64> {
        let lead = self
            .coords
            .iter()
            .filter_map(|r| r.last())
            .min_by_key(|c| c.abs())
            .expect("nonzero polynomial");
        match lead.abs().to_u64() {
            Some(l) => factorize(l).into_iter().map(|(p, _)| p).collect(),
            None => Vec::new(),
        }
    }
}

/// Multiply polynomials over Z[C_mm].
fn gr_poly_mul(a: &[Gr], b: &[Gr], mm: u64) -> Vec<Gr> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Gr::new(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            for (&e1, &c1) in x {
                for (&e2, &c2) in y {
                    *out[i + j].entry((e1 + e2) % mm).or_insert(0) += c1 * c2;
                }
            }
        }
    }
    for x in &mut out {
        x.retain(|_, c| *c != 0);
    }
    out
}

/// prod_{a<k} N(zeta_k^a t) as a polynomial in x = t^k over Q(zeta_M),
/// M = lcm(m, k).
fn norm_in_x(n: &[Gr], m: u64, k: usize) -> (Vec<Gr>, u64) {
    let mm = lcm(m, k as u64);
    let lift = mm / m;
    let step = mm / k as u64;
    let mut acc: Vec<Gr> = vec![Gr::from([(0, 1)])];
    for a in 0..k as u64 {
        let twisted: Vec<Gr> = n
            .iter()
            .enumerate()
            .map(|(deg, x)| x.iter().map(|(&e, &c)| ((e * lift + a * step * deg as u64) % mm, c)).collect())
            .collect();
        acc = gr_poly_mul(&acc, &twisted, mm);
    }
    let mut out = Vec::new();
    for (deg, x) in acc.into_iter().enumerate() {
        if deg % k == 0 {
            out.push(x);
        } else {
            debug_assert!(power_basis(&x, mm).iter().all(|c| c.is_zero()));
        }
    }
    (out, mm)
}

/// Exact coordinates of A_r(1/p) * p^D for r < k, where
/// N(s) = sum_{r<k} s^r A_r(s^k).
fn split_at_prime(n: &[Gr], m: u64, k: usize, p: u64) -> Vec<Vec<BigInt>> {
    let d = n.len().div_ceil(k);
    let pb = BigInt::from(p);
    let width = crate::cyclo::cyclotomic_poly(m).len() - 1;
    let mut out = vec![vec![BigInt::zero(); width]; k];
    for (deg, x) in n.iter().enumerate() {
        let (a, r) = (deg / k, deg % k);
        let w = num_traits::pow(pb.clone(), d - a);
        for (b, c) in power_basis(x, m).into_iter().enumerate() {
            out[r][b] += c * &w;
        }
    }
    out
}

fn coords_to_cyclo(coords: &[BigInt], m: u64) -> CycloSum {
    let mut s = CycloSum::zero(m);
    for (b, c) in coords.iter().enumerate() {
        if !c.is_zero() {
            s = s.add(&CycloSum::root(m, b as u64).scale(&num_rational::BigRational::from_integer(c.clone())));
        }
    }
    s
}

fn eval_numeric(n: &[Gr], m: u64, s: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut sp = 1.0;
    for x in n {
        for (&e, &c) in x {
            let ang = 2.0 * std::f64::consts::PI * e as f64 / m as f64;
            re += c as f64 * sp * ang.cos();
            im += c as f64 * sp * ang.sin();
        }
        sp *= s;
    }
    (re, im)
}

/// Exact vanishing of N(p^(-1/k)).
fn zero_at_prime(n: &[Gr], m: u64, k: usize, p: u64) -> ZeroStatus {
    if n.iter().all(|x| power_basis(x, m).iter().all(|c| c.is_zero())) {
        return ZeroStatus::Zero;
    }
    let parts = split_at_prime(n, m, k, p);
    let nonzero: Vec<usize> = (0..k).filter(|&r| parts[r].iter().any(|c| !c.is_zero())).collect();
    match nonzero.len() {
        0 => return ZeroStatus::Zero,
        1 => return ZeroStatus::Nonzero,
        _ => {}
    }
    let s = (p as f64).powf(-1.0 / k as f64);
    let (re, im) = eval_numeric(n, m, s);
    let scale: f64 = n.iter().flat_map(|x| x.values()).map(|c| c.unsigned_abs() as f64).sum::<f64>() + 1.0;
    let numerically_nonzero = re.hypot(im) > 1e-9 * scale;
    if k == 2 {
        // a0 + s a1 = 0 forces p a0^2 = a1^2; when that holds the value is 0 or 2 a0.
        let a0 = coords_to_cyclo(&parts[0], m);
        let a1 = coords_to_cyclo(&parts[1], m);
        let lhs = a0.mul(&a0).scale(&num_rational::BigRational::from_integer(p.into()));
        if !lhs.sub(&a1.mul(&a1)).is_zero() {
            return ZeroStatus::Nonzero;
        }
        return if numerically_nonzero { ZeroStatus::Nonzero } else { ZeroStatus::Zero };
    }
    let (norm, mm) = norm_in_x(n, m, k);
    let x = BigInt::from(p);
    let d = norm.len();
    let mut acc = vec![BigInt::zero(); crate::cyclo::cyclotomic_poly(mm).len() - 1];
    for (b, coef) in norm.iter().enumerate() {
        let w = num_traits::pow(x.clone(), d - b);
        for (i, c) in power_basis(coef, mm).into_iter().enumerate() {
            acc[i] += c * &w;
        }
    }
    if acc.iter().any(|c| !c.is_zero()) || numerically_nonzero {
        ZeroStatus::Nonzero
    } else {
        ZeroStatus::Unknown
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalFactor {
    pub p: u64,
    pub q: u64,
    pub k: usize,
    pub period: usize,
    pub pre_period: Vec<CycloSum>,
    pub periodic_block: Vec<CycloSum>,
    pub closed_form_zero: ZeroStatus,
    /// N(p^(-1/k)) / (1 - p^(-period/k)), diagnostic
    pub value: [f64; 2],
    /// The next three periods recomputed term by term agree with the cycle.
    pub replay_ok: bool,
}

fn cyclo_term(e: Option<u64>, m: u64) -> CycloSum {
    match e {
        Some(e) => CycloSum::root(m, e),
        None => CycloSum::zero(m),
    }
}

fn numeric_value(seq: &TermSequence, n: &[Gr], k: usize, p: u64) -> [f64; 2] {
    let s = (p as f64).powf(-1.0 / k as f64);
    let (re, im) = eval_numeric(n, seq.m, s);
    let den = 1.0 - s.powi(seq.period() as i32);
    [re / den, im / den]
}

pub fn local_factor(spec: &MultFnSpec, p: u64, chis: &[DirichletChar], k: usize, j_max: Option<usize>) -> Result<LocalFactor> {
    if !is_prime(p) {
        return Err(Error::Invalid(format!("{p} is not prime")));
    }
    if chis.len() != spec.k() || k == 0 {
        return Err(Error::Invalid("need one character per function and k >= 1".into()));
    }
    let q = chis[0].q;
    let g = unit_group(q)?;
    let j_max = j_max.unwrap_or_else(|| default_j_max(spec, &g));
    let seq = TermSequence::build(spec, &g, chis, p % q, j_max)?;
    let n = seq.numerator();
    let last = seq.pre.len() + 4 * seq.period();
    let mut replay_ok = true;
    for j in 1..last {
        let mut e = Some(0u64);
        for (i, chi) in chis.iter().enumerate() {
            let x = spec.value_mod(i, p, j as u32, q)?;
            e = e.and_then(|a| chi.value_exp(&g, x).map(|b| (a + b) % seq.m));
        }
        replay_ok &= e == seq.term(j);
    }
    Ok(LocalFactor {
        p,
        q,
        k,
        period: seq.period(),
        pre_period: seq.pre.iter().map(|&e| cyclo_term(e, seq.m)).collect(),
        periodic_block: seq.cycle.iter().map(|&e| cyclo_term(e, seq.m)).collect(),
        closed_form_zero: zero_at_prime(&n, seq.m, k, p),
        value: numeric_value(&seq, &n, k, p),
        replay_ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassStatus {
    /// Some prime in the class has a vanishing local factor.
    Zero,
    /// No prime in the class has a vanishing local factor.
    Never,
    Unknown,
}

/// What is known about the primes p = residue (mod q), or about the single
/// prime `residue` when it divides q.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassEvidence {
    pub residue: u64,
    pub prime_divisor: bool,
    pub status: ClassStatus,
    /// Primes for which vanishing was not excluded a priori and were checked.
    pub candidates: Vec<u64>,
    pub witness: Option<u64>,
    pub sample_prime: Option<u64>,
    pub sample_value: Option<[f64; 2]>,
}

fn smallest_prime_in_class(c: u64, q: u64, budget: u64) -> Option<u64> {
    let mut p = if c == 0 { q } else { c };
    let step = q.max(1);
    while p <= budget.max(q * q + q) {
        if is_prime(p) {
            return Some(p);
        }
        p += step;
    }
    None
}

fn class_evidence(
    spec: &MultFnSpec,
    g: &UnitGroup,
    chis: &[DirichletChar],
    k: usize,
    residue: u64,
    prime_divisor: bool,
    prime_budget: u64,
    j_max: usize,
) -> Result<ClassEvidence> {
    let q = g.q;
    let seq = TermSequence::build(spec, g, chis, residue % q, j_max)?;
    let n = seq.numerator();
    let m = seq.m;
    let sample_prime = if prime_divisor {
        Some(residue)
    } else {
        smallest_prime_in_class(residue, q, prime_budget)
    };
    let sample_value = sample_prime.map(|p| numeric_value(&seq, &n, k, p));
    let mut ev = ClassEvidence {
        residue,
        prime_divisor,
        status: ClassStatus::Never,
        candidates: Vec::new(),
        witness: None,
        sample_prime,
        sample_value,
    };
    if prime_divisor {
        ev.candidates.push(residue);
        match zero_at_prime(&n, m, k, residue) {
            ZeroStatus::Zero => {
                ev.status = ClassStatus::Zero;
                ev.witness = Some(residue);
            }
            ZeroStatus::Nonzero => {}
            ZeroStatus::Unknown => ev.status = ClassStatus::Unknown,
        }
        return Ok(ev);
    }
    let coords = if k == 1 {
        CoordPoly::new(&n, m)
    } else {
        let (norm, mm) = norm_in_x(&n, m, k);
        CoordPoly::new(&norm, mm)
    };
    if coords.is_zero() {
        ev.status = ClassStatus::Zero;
        ev.witness = sample_prime;
        if sample_prime.is_none() {
            ev.status = ClassStatus::Unknown;
        }
        return Ok(ev);
    }
    for p in coords.candidate_primes() {
        if p % q != residue % q || gcd(p, q) != 1 {
            continue;
        }
        ev.candidates.push(p);
        match zero_at_prime(&n, m, k, p) {
            ZeroStatus::Zero => {
                ev.status = ClassStatus::Zero;
                ev.witness = Some(p);
                return Ok(ev);
            }
            ZeroStatus::Nonzero => {}
            ZeroStatus::Unknown => ev.status = ClassStatus::Unknown,
        }
    }
    Ok(ev)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TupleStatus {
    Zero,
    NonzeroAllPrimes,
    Unresolved,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TupleReport {
    /// Exponent vectors of chi_1, ..., chi_K.
    pub characters: Vec<Vec<u64>>,
    pub status: TupleStatus,
    pub witness_prime: Option<u64>,
    /// Every residue class on OUT or UNKNOWN; only the witness class on ZERO.
    pub classes: Vec<ClassEvidence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    In,
    Out,
    Unknown,
    NotAdmissible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WudVerdict {
    pub family: String,
    pub q: u64,
    pub status: Verdict,
    pub k: Option<usize>,
    pub generates_full: bool,
    pub nontrivial_tuples: usize,
    /// On IN: one ZERO report per nontrivial tuple.
    pub witnesses: Vec<TupleReport>,
    /// On OUT: a tuple whose local factor vanishes at no prime.
    pub exhaustive_certificate: Option<TupleReport>,
    pub unresolved: Vec<TupleReport>,
}

fn tuple_report(
    spec: &MultFnSpec,
    g: &UnitGroup,
    tuple: &CharTuple,
    k: usize,
    classes: &[(u64, bool)],
    prime_budget: u64,
    j_max: usize,
) -> Result<TupleReport> {
    let mut all = Vec::with_capacity(classes.len());
    let mut unresolved = false;
    for &(c, pd) in classes {
        let ev = class_evidence(spec, g, &tuple.0, k, c, pd, prime_budget, j_max)?;
        match ev.status {
            ClassStatus::Zero => {
                return Ok(TupleReport {
                    characters: tuple.0.iter().map(|c| c.exponents.clone()).collect(),
                    status: TupleStatus::Zero,
                    witness_prime: ev.witness,
                    classes: vec![ev],
                })
            }
            ClassStatus::Unknown => unresolved = true,
            ClassStatus::Never => {}
        }
        all.push(ev);
    }
    Ok(TupleReport {
        characters: tuple.0.iter().map(|c| c.exponents.clone()).collect(),
        status: if unresolved { TupleStatus::Unresolved } else { TupleStatus::NonzeroAllPrimes },
        witness_prime: None,
        classes: all,
    })
}

pub fn wud_membership(spec: &MultFnSpec, q: u64, prime_budget: u64, j_max: Option<usize>) -> Result<WudVerdict> {
    let mut verdict = WudVerdict {
        family: spec.name.clone(),
        q,
        status: Verdict::NotAdmissible,
        k: None,
        generates_full: false,
        nontrivial_tuples: 0,
        witnesses: Vec::new(),
        exhaustive_certificate: None,
        unresolved: Vec::new(),
    };
    let Some(k) = admissible_k(spec, q).k else {
        return Ok(verdict);
    };
    verdict.k = Some(k);
    let g = unit_group(q)?;
    if generates_full(spec, &g, k)? {
        verdict.status = Verdict::In;
        verdict.generates_full = true;
        return Ok(verdict);
    }
    let j_max = j_max.unwrap_or_else(|| default_j_max(spec, &g));
    let tuples: Vec<CharTuple> = annihilator_tuples(spec, &g, k)?
        .into_iter()
        .filter(|t| !t.is_trivial())
        .collect();
    verdict.nontrivial_tuples = tuples.len();
    let mut classes: Vec<(u64, bool)> = g.units().into_iter().map(|u| (u, false)).collect();
    classes.extend(factorize(q).into_iter().map(|(p, _)| (p, true)));
    for t in &tuples {
        let rep = tuple_report(spec, &g, t, k, &classes, prime_budget, j_max)?;
        match rep.status {
            TupleStatus::Zero => verdict.witnesses.push(rep),
            TupleStatus::NonzeroAllPrimes => {
                verdict.status = Verdict::Out;
                verdict.exhaustive_certificate = Some(rep);
                verdict.witnesses.clear();
                verdict.unresolved.clear();
                return Ok(verdict);
            }
            TupleStatus::Unresolved => verdict.unresolved.push(rep),
        }
    }
    verdict.status = if verdict.unresolved.is_empty() { Verdict::In } else { Verdict::Unknown };
    Ok(verdict)
}

/// Known answers for the preset families: is f (jointly) WUD mod q?
pub fn ground_truth(family: &str, q: u64) -> Option<bool> {
    match family {
        "phi" => Some(gcd(q, 6) == 1),
        "sigma" | "sigma_1" => Some(q % 6 != 0),
        "sigma_3" => Some((q % 2 == 1 && q % 7 != 0) || (q % 2 == 0 && q % 3 != 0)),
        "phi_sigma" => Some(gcd(q, 6) == 1),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: u64,
    pub k: Option<usize>,
    pub status: Verdict,
    pub expected_wud: Option<bool>,
    pub contradiction: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub family: String,
    pub q_max: u64,
    pub rows: Vec<SweepRow>,
    pub contradictions: usize,
    pub unknown: usize,
}

pub fn classification_sweep(spec: &MultFnSpec, q_max: u64, prime_budget: u64) -> Result<ClassificationTable> {
    let mut rows = Vec::new();
    for q in 1..=q_max {
        let v = wud_membership(spec, q, prime_budget, None)?;
        let expected_wud = ground_truth(&spec.name, q);
        let contradiction = match (v.status, expected_wud) {
            (Verdict::In, Some(false)) => true,
            (Verdict::Out | Verdict::NotAdmissible, Some(true)) => true,
            _ => false,
        };
        rows.push(SweepRow {
            q,
            k: v.k,
            status: v.status,
            expected_wud,
            contradiction,
        });
    }
    Ok(ClassificationTable {
        family: spec.name.clone(),
        q_max,
        contradictions: rows.iter().filter(|r| r.contradiction).count(),
        unknown: rows.iter().filter(|r| r.status == Verdict::Unknown).count(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::characters_mod;

    fn spec(name: &str) -> MultFnSpec {
        MultFnSpec::preset(name, 4).unwrap()
    }

    #[test]
    fn term_sequence_sigma_mod_4() {
        // sigma(3^j) mod 4 = 1, 0, 1, 0, ...
        let s = spec("sigma");
        let g = unit_group(4).unwrap();
        let chi = characters_mod(&g)[1].clone();
        let seq = TermSequence::build(&s, &g, &[chi.clone()], 3, 1000).unwrap();
        let oracle = [Some(0), None, Some(0), None, Some(0), None];
        for (j, &e) in oracle.iter().enumerate() {
            assert_eq!(seq.term(j), e, "j={j}");
        }
        assert_eq!(seq.period(), 2);
        let lf = local_factor(&s, 3, &[chi], 2, None).unwrap();
        assert!(lf.replay_ok);
        // 1 + 1/3 + 1/9 + ... = 3/2 on even j
        assert!((lf.value[0] - 1.5).abs() < 1e-12);
        assert_eq!(lf.closed_form_zero, ZeroStatus::Nonzero);
    }

    #[test]
    fn trivial_tuple_is_positive() {
        let s = spec("phi_sigma");
        let g = unit_group(35).unwrap();
        let triv = vec![DirichletChar::trivial(&g); 2];
        let lf = local_factor(&s, 3, &triv, 1, None).unwrap();
        assert_eq!(lf.closed_form_zero, ZeroStatus::Nonzero);
        assert!(lf.value[0] > 1.0);
    }

    #[test]
    fn only_j_zero_survives() {
        // f(p^j) = p^j is 0 mod 5 for j >= 1 when p = 5.
        let f = MultFnSpec::new(
            "pow",
            vec![vec![crate::IntPoly::from_i64s(&[0, 1])]],
            BeyondRule::Periodic { start: 1, period: 1 },
        )
        .unwrap();
        let g = unit_group(5).unwrap();
        let chi = characters_mod(&g)[1].clone();
        let lf = local_factor(&f, 5, &[chi], 1, None).unwrap();
        assert_eq!(lf.value, [1.0, 0.0]);
        assert_eq!(lf.closed_form_zero, ZeroStatus::Nonzero);
    }

    #[test]
    fn replay_across_presets() {
        for name in ["phi", "sigma", "sigma_2", "sigma_3", "phi_sigma"] {
            let s = spec(name);
            for q in [7u64, 9, 12, 16, 25] {
                let g = unit_group(q).unwrap();
                let chars = characters_mod(&g);
                for p in [2u64, 3, 5, 7, 11, 13, 97] {
                    let chis: Vec<DirichletChar> = (0..s.k()).map(|i| chars[(i + 1) % chars.len()].clone()).collect();
                    let lf = local_factor(&s, p, &chis, 1, None).unwrap();
                    assert!(lf.replay_ok, "{name} q={q} p={p}");
                }
            }
        }
    }

    #[test]
    fn membership_examples() {
        assert_eq!(wud_membership(&spec("phi"), 5, DEFAULT_PRIME_BUDGET, None).unwrap().status, Verdict::In);
        assert_eq!(wud_membership(&spec("sigma"), 9, DEFAULT_PRIME_BUDGET, None).unwrap().status, Verdict::In);
        assert_eq!(wud_membership(&spec("sigma"), 15, DEFAULT_PRIME_BUDGET, None).unwrap().status, Verdict::In);
        let v = wud_membership(&spec("phi"), 9, DEFAULT_PRIME_BUDGET, None).unwrap();
        assert_eq!(v.status, Verdict::Out);
        let cert = v.exhaustive_certificate.unwrap();
        assert_eq!(cert.classes.len(), 6 + 1);
        assert_eq!(
            wud_membership(&spec("phi"), 8, DEFAULT_PRIME_BUDGET, None).unwrap().status,
            Verdict::NotAdmissible
        );
        let v = wud_membership(&spec("sigma"), 6, DEFAULT_PRIME_BUDGET, None).unwrap();
        assert_eq!((v.status, v.k), (Verdict::Out, Some(2)));
        let v = wud_membership(&spec("sigma"), 4, DEFAULT_PRIME_BUDGET, None).unwrap();
        assert_eq!((v.status, v.k), (Verdict::In, Some(2)));
    }

    #[test]
    fn joint_family_never_in_at_odd_multiples_of_three() {
        for q in [3u64, 9, 15, 21] {
            let v = wud_membership(&spec("phi_sigma"), q, DEFAULT_PRIME_BUDGET, None).unwrap();
            assert_eq!(v.k, Some(2));
            assert_ne!(v.status, Verdict::In, "q={q}");
        }
    }

    #[test]
    fn small_sweeps_agree_with_ground_truth() {
        for name in ["phi", "sigma", "sigma_3", "phi_sigma"] {
            let t = classification_sweep(&spec(name), 40, DEFAULT_PRIME_BUDGET).unwrap();
            let bad: Vec<_> = t.rows.iter().filter(|r| r.contradiction).map(|r| (r.q, r.status)).collect();
            assert!(bad.is_empty(), "{name}: {bad:?}");
        }
    }
}
