//! Segmented sieving of (f_1(n), ..., f_K(n)) mod q for all n <= x,
//! with the anatomical input filters and the counterexample families.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{euler_phi, factorize, gcd, is_prime, primes_up_to};
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::resring::{admissible_k, alpha_polys, unit_group, BeyondRule, MultFnSpec};

pub const SEGMENT: u64 = 1 << 20;
pub const X_MAX: u64 = 100_000_000;
pub const Q_MAX: u64 = 100_000;
const DENSE_LIMIT: u64 = 1 << 22;
const TUPLE_BUDGET: u64 = 10_000_000;

/// Factorization of one n with the derived anatomy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Anatomy {
    pub n: u64,
    /// Ascending primes with exponents.
    pub factors: Vec<(u64, u32)>,
}

impl Anatomy {
    pub fn naive(n: u64) -> Self {
        let factors = if n <= 1 { Vec::new() } else { factorize(n) };
        Anatomy { n, factors }
    }

    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// r-th largest prime factor counted with multiplicity; 1 when Omega(n) < r.
    pub fn p_r(&self, r: usize) -> u64 {
        let mut left = r;
        for &(p, e) in self.factors.iter().rev() {
            if left <= e as usize {
                return p;
            }
            left -= e as usize;
        }
        1
    }

    /// Largest m with m^k a unitary divisor of n.
    pub fn n_k(&self, k: u32) -> u64 {
        self.factors
            .iter()
            .filter(|&&(_, e)| e % k == 0)
            .map(|&(p, e)| p.pow(e / k))
            .product()
    }

    /// Product of the p^e || n with e < k.
    pub fn k_free_part(&self, k: u32) -> u64 {
        self.factors
            .iter()
            .filter(|&&(_, e)| e < k)
            .map(|&(p, e)| p.pow(e))
            .product()
    }

    /// n = m (P_J ... P_1)^k with max(y, P(m)) < P_J < ... < P_1.
    pub fn is_convenient(&self, k: u32, j: u32, y: f64) -> bool {
        let j = j as usize;
        if self.factors.len() < j {
            return false;
        }
        self.factors
            .iter()
            .rev()
            .take(j)
            .all(|&(p, e)| e == k && p as f64 > y)
    }
}

/// Factor every n in [lo, hi) with a segmented sieve.
pub fn factor_range(lo: u64, hi: u64) -> Vec<Anatomy> {
    let lo = lo.max(1);
    if hi <= lo {
        return Vec::new();
    }
    let primes = primes_up_to(isqrt(hi - 1));
    let mut out = Vec::with_capacity((hi - lo) as usize);
    let mut start = lo;
    while start < hi {
        let end = (start + SEGMENT).min(hi);
        let len = (end - start) as usize;
        let mut rem: Vec<u64> = (start..end).collect();
        let mut facs: Vec<Vec<(u64, u32)>> = vec![Vec::new(); len];
        for &p in &primes {
            if p * p >= end {
                break;
            }
            let mut m = start.div_ceil(p) * p;
            while m < end {
                let idx = (m - start) as usize;
                let mut e = 0;
                while rem[idx] % p == 0 {
                    rem[idx] /= p;
                    e += 1;
                }
                facs[idx].push((p, e));
                m += p;
            }
        }
        for (idx, f) in facs.into_iter().enumerate() {
            let mut factors = f;
            if rem[idx] > 1 {
                factors.push((rem[idx], 1));
            }
            out.push(Anatomy {
                n: start + idx as u64,
                factors,
            });
        }
        start = end;
    }
    out
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Parameters J and y of the convenient-n decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvenientParams {
    pub eps: f64,
    pub j: u32,
    pub y: f64,
}

impl ConvenientParams {
    /// J = floor(log log log x), y = exp((log x)^(eps/2)).
    pub fn new(x: u64, eps: f64) -> Self {
        let l1 = (x.max(2) as f64).ln();
        let l3 = if l1 > 1.0 { l1.ln().ln() } else { f64::NEG_INFINITY };
        let j = if l3.is_finite() && l3 > 0.0 { l3.floor() as u32 } else { 0 };
        ConvenientParams {
            eps,
            j,
            y: l1.powf(eps / 2.0).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterSpec {
    None,
    /// P_R(n) > q
    PrGtQ(u32),
    /// P_T(n_k) > q
    PtOfNkGtQ(u32),
    Convenient { eps: f64 },
    /// n = P^k for a prime P
    PrimePower,
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::None => write!(f, "none"),
            FilterSpec::PrGtQ(r) => write!(f, "pr:{r}"),
            FilterSpec::PtOfNkGtQ(t) => write!(f, "pt-nk:{t}"),
            FilterSpec::Convenient { eps } if *eps == 1.0 => write!(f, "convenient"),
            FilterSpec::Convenient { eps } => write!(f, "convenient:{eps}"),
            FilterSpec::PrimePower => write!(f, "prime-power"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Invalid(format!("unknown filter '{s}'"));
        let num = |t: &str| t.parse::<u32>().map_err(|_| bad());
        Ok(match s.as_str() {
            "none" | "" => FilterSpec::None,
            "convenient" => FilterSpec::Convenient { eps: 1.0 },
            "prime-power" | "prime_power" => FilterSpec::PrimePower,
            _ => {
                if let Some(r) = s.strip_prefix("pr:") {
                    FilterSpec::PrGtQ(num(r)?)
                } else if let Some(t) = s.strip_prefix("pt-nk:") {
                    FilterSpec::PtOfNkGtQ(num(t)?)
                } else if let Some(e) = s.strip_prefix("convenient:") {
                    let eps: f64 = e.parse().map_err(|_| bad())?;
                    if !(eps > 0.0 && eps <= 1.0) {
                        return Err(Error::Invalid(format!("convenient eps {eps} outside (0, 1]")));
                    }
                    FilterSpec::Convenient { eps }
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything the sieve knows about one n after factoring it.
#[derive(Clone, Copy, Debug)]
pub struct NState<'a> {
    pub n: u64,
    pub residues: &'a [u32],
    pub unit: bool,
    /// Number of prime factors > q, with multiplicity.
    pub big: u32,
    /// Number of prime factors of n_k exceeding q, with multiplicity.
    pub nk_big: u32,
    pub n_k: u64,
    pub k_free: u64,
    /// Length of the run of largest primes with exponent k above y.
    pub run: u32,
    pub omega: u32,
    pub first_e: u32,
}

struct Engine {
    q: u64,
    kf: usize,
    k: u32,
    emax: usize,
    /// table[(i * (emax + 1) + e) * q + (p mod q)] = f_i(p^e) mod q
    table: Vec<u32>,
    y: f64,
}

impl Engine {
    fn new(spec: &MultFnSpec, x: u64, q: u64, k: u32, y: f64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Invalid("q must be >= 1".into()));
        }
        if q > Q_MAX {
            return Err(Error::ModulusTooLarge(q));
        }
        if x > X_MAX {
            return Err(Error::BudgetExceeded(format!("x = {x} exceeds {X_MAX}")));
        }
        if k == 0 {
            return Err(Error::Invalid("k must be >= 1".into()));
        }
        let mut emax = 1usize;
        while 1u128 << (emax + 1) <= x as u128 {
            emax += 1;
        }
        if matches!(spec.beyond, BeyondRule::Undefined) && emax > spec.v_max() && x >= 2 {
            return Err(Error::BeyondVUndefined {
                exponent: spec.v_max() as u32 + 1,
                v_max: spec.v_max(),
            });
        }
        let kf = spec.k();
        let qs = q as usize;
        let mut table = vec![0u32; kf * (emax + 1) * qs];
        for i in 0..kf {
            let mods: Vec<_> = spec.polys[i].iter().map(|w| w.to_mod(q)).collect();
            for e in 0..=emax {
                let base = (i * (emax + 1) + e) * qs;
                for r in 0..q {
                    let v = if e == 0 {
                        1 % q
                    } else if e <= spec.v_max() {
                        mods[e - 1].eval(r)
                    } else {
                        match &spec.beyond {
                            BeyondRule::Periodic { start, period } => {
                                mods[start + (e - start) % period - 1].eval(r)
                            }
                            _ => spec.value_mod(i, r, e as u32, q)?,
                        }
                    };
                    table[base + r as usize] = v as u32;
                }
            }
        }
        Ok(Engine {
            q,
            kf,
            k,
            emax,
            table,
            y,
        })
    }

    /// Fold `visit` over n in [1, x], segment by segment in parallel.
    fn scan<A, I, V, M>(&self, x: u64, init: I, visit: V, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        V: Fn(&mut A, &NState) + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        if x == 0 {
            return init();
        }
        let primes = primes_up_to(isqrt(x));
        let nseg = x.div_ceil(SEGMENT);
        (0..nseg)
            .into_par_iter()
            .fold(&init, |mut acc, s| {
                let lo = 1 + s * SEGMENT;
                let hi = (lo + SEGMENT).min(x + 1);
                self.segment(lo, hi, &primes, &mut acc, &visit);
                acc
            })
            .reduce(&init, &merge)
    }

    fn segment<A, V: Fn(&mut A, &NState)>(&self, lo: u64, hi: u64, primes: &[u64], acc: &mut A, visit: &V) {
        let len = (hi - lo) as usize;
        let kf = self.kf;
        let q = self.q;
        let one = (1 % q) as u32;
        let mut rem: Vec<u64> = (lo..hi).collect();
        let mut res = vec![one; len * kf];
        let mut big = vec![0u32; len];
        let mut nk_big = vec![0u32; len];
        let mut n_k = vec![1u64; len];
        let mut k_free = vec![1u64; len];
        let mut run = vec![0u32; len];
        let mut omega = vec![0u32; len];
        let mut first_e = vec![0u32; len];
        let stride = (self.emax + 1) * q as usize;
        let mut apply = |idx: usize, p: u64, e: u32| {
            let r = (p % q) as usize;
            for i in 0..kf {
                let t = self.table[i * stride + e as usize * q as usize + r] as u64;
                let slot = &mut res[idx * kf + i];
                *slot = (*slot as u64 * t % q) as u32;
            }
            if p > q {
                big[idx] += e;
            }
            if e % self.k == 0 {
                n_k[idx] *= p.pow(e / self.k);
                if p > q {
                    nk_big[idx] += e / self.k;
                }
            }
            if e < self.k {
                k_free[idx] *= p.pow(e);
            }
            if e == self.k && p as f64 > self.y {
                run[idx] += 1;
            } else {
                run[idx] = 0;
            }
            if omega[idx] == 0 {
                first_e[idx] = e;
            }
            omega[idx] += 1;
        };
        for &p in primes {
            if p * p >= hi {
                break;
            }
            let mut m = lo.div_ceil(p) * p;
            while m < hi {
                let idx = (m - lo) as usize;
                let mut e = 0;
                let mut r = rem[idx];
                while r % p == 0 {
                    r /= p;
                    e += 1;
                }
                rem[idx] = r;
                apply(idx, p, e);
                m += p;
            }
        }
        for idx in 0..len {
            if rem[idx] > 1 {
                let p = rem[idx];
                apply(idx, p, 1);
            }
        }
        for idx in 0..len {
            let residues = &res[idx * kf..(idx + 1) * kf];
            let unit = residues.iter().all(|&r| gcd(r as u64, q) == 1);
            visit(
                acc,
                &NState {
                    n: lo + idx as u64,
                    residues,
                    unit,
                    big: big[idx],
                    nk_big: nk_big[idx],
                    n_k: n_k[idx],
                    k_free: k_free[idx],
                    run: run[idx],
                    omega: omega[idx],
                    first_e: first_e[idx],
                },
            );
        }
    }
}

fn passes(filter: &FilterSpec, st: &NState, k: u32, j: u32) -> bool {
    match *filter {
        FilterSpec::None => true,
        FilterSpec::PrGtQ(r) => st.big >= r,
        FilterSpec::PtOfNkGtQ(t) => st.nk_big >= t,
        FilterSpec::Convenient { .. } => st.run >= j,
        FilterSpec::PrimePower => st.omega == 1 && st.first_e == k,
    }
}

/// Residues and anatomy of each n in [1, x] as the sieve computes them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SievedValue {
    pub n: u64,
    pub residues: Vec<u64>,
    pub big: u32,
    pub nk_big: u32,
    pub n_k: u64,
    pub k_free: u64,
    pub convenient: bool,
}

pub fn sieve_values(spec: &MultFnSpec, x: u64, q: u64, k: u32, eps: f64) -> Result<Vec<SievedValue>> {
    let cp = ConvenientParams::new(x, eps);
    let eng = Engine::new(spec, x, q, k, cp.y)?;
    let mut out = eng.scan(
        x,
        Vec::new,
        |acc: &mut Vec<SievedValue>, st| {
            acc.push(SievedValue {
                n: st.n,
                residues: st.residues.iter().map(|&r| r as u64).collect(),
                big: st.big,
                nk_big: st.nk_big,
                n_k: st.n_k,
                k_free: st.k_free,
                convenient: st.run >= cp.j,
            })
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    out.sort_by_key(|v| v.n);
    Ok(out)
}

/// f_i(n) mod q from a trial-division factorization and exact values.
pub fn naive_values(spec: &MultFnSpec, n: u64, q: u64) -> Result<Vec<u64>> {
    let an = Anatomy::naive(n);
    let qb = BigInt::from(q);
    (0..spec.k())
        .map(|i| {
            let mut acc = BigInt::from(1) % &qb;
            for &(p, e) in &an.factors {
                acc = acc * spec.value_int(i, p, e)? % &qb;
            }
            Ok(acc.mod_floor(&qb).to_u64().unwrap())
        })
        .collect()
}

/// phi(n) mod q for n <= x via sum_{d | n} phi(d) = n.
pub fn totient_oracle(x: u64, q: u64) -> Vec<u64> {
    let x = x as usize;
    let mut phi: Vec<i64> = (0..=x as i64).collect();
    for d in 1..=x {
        let pd = phi[d];
        let mut m = 2 * d;
        while m <= x {
            phi[m] -= pd;
            m += d;
        }
    }
    phi.into_iter().map(|v| v as u64 % q).collect()
}

/// sigma_r(n) mod q for n <= x as a direct divisor sum.
pub fn divisor_sum_oracle(r: u32, x: u64, q: u64) -> Vec<u64> {
    let x = x as usize;
    let mut s = vec![0u64; x + 1];
    for d in 1..=x {
        let dr = crate::arith::pow_mod(d as u64, r as u64, q);
        let mut m = d;
        while m <= x {
            s[m] = (s[m] + dr) % q;
            m += d;
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TupleCount {
    pub tuple: Vec<u64>,
    pub count: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquidistReport {
    pub family: String,
    pub x: u64,
    pub q: u64,
    pub k: u32,
    pub filter: FilterSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convenient: Option<ConvenientParams>,
    /// Nonzero counts only, in lexicographic tuple order.
    pub counts: Vec<TupleCount>,
    pub coprime_total: u64,
    pub classes: u64,
    pub empty_classes: u64,
    /// max_a |count(a) phi(q)^K / coprime_total - 1|; `None` when nothing passed.
    pub discrepancy: Option<f64>,
    pub chi_square: Option<f64>,
}

impl EquidistReport {
    pub fn count(&self, tuple: &[u64]) -> u64 {
        self.counts
            .binary_search_by(|c| c.tuple.as_slice().cmp(tuple))
            .map(|i| self.counts[i].count)
            .unwrap_or(0)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let kf = self.counts.first().map(|c| c.tuple.len()).unwrap_or(0);
        let mut header: Vec<String> = (1..=kf).map(|i| format!("a{i}")).collect();
        header.push("count".into());
        wr.write_record(&header).map_err(csv_err)?;
        for c in &self.counts {
            let mut row: Vec<String> = c.tuple.iter().map(|v| v.to_string()).collect();
            row.push(c.count.to_string());
            wr.write_record(&row).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

impl Counts {
    fn new(size: u64) -> Self {
        if size <= DENSE_LIMIT {
            Counts::Dense(vec![0; size as usize])
        } else {
            Counts::Sparse(HashMap::new())
        }
    }

    fn add(&mut self, key: u64, c: u64) {
        match self {
            Counts::Dense(v) => v[key as usize] += c,
            Counts::Sparse(m) => *m.entry(key).or_insert(0) += c,
        }
    }

    fn merge(self, other: Self) -> Self {
        match (self, other) {
            (Counts::Dense(mut a), Counts::Dense(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Counts::Dense(a)
            }
            (Counts::Sparse(mut a), Counts::Sparse(b)) => {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                Counts::Sparse(a)
            }
            _ => unreachable!(),
        }
    }

    fn get(&self, key: u64) -> u64 {
        match self {
            Counts::Dense(v) => v[key as usize],
            Counts::Sparse(m) => m.get(&key).copied().unwrap_or(0),
        }
    }
}

fn encode(res: &[u32], q: u64) -> u64 {
    res.iter().rev().fold(0u64, |acc, &r| acc * q + r as u64)
}

fn key_space(q: u64, kf: usize) -> Result<u64> {
    (0..kf)
        .try_fold(1u64, |acc, _| acc.checked_mul(q))
        .ok_or_else(|| Error::BudgetExceeded(format!("q^K with q = {q}, K = {kf} overflows")))
}

pub fn sieve_run(spec: &MultFnSpec, x: u64, q: u64, k: u32, filter: FilterSpec) -> Result<EquidistReport> {
    let kf = spec.k();
    let space = key_space(q, kf)?;
    let phi = euler_phi(q);
    let classes = (0..kf)
        .try_fold(1u64, |acc, _| acc.checked_mul(phi))
        .filter(|&c| c <= TUPLE_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded(format!("phi(q)^K exceeds {TUPLE_BUDGET}")))?;
    let eps = match filter {
        FilterSpec::Convenient { eps } => eps,
        _ => 1.0,
    };
    let cp = ConvenientParams::new(x, eps);
    let eng = Engine::new(spec, x, q, k, cp.y)?;
    let counts = eng.scan(
        x,
        || Counts::new(space),
        |acc, st| {
            if st.unit && passes(&filter, st, k, cp.j) {
                acc.add(encode(st.residues, q), 1);
            }
        },
        Counts::merge,
    );

    let units: Vec<u64> = unit_group(q)?.units();
    let mut out = Vec::new();
    let mut total = 0u64;
    let mut tuple = vec![0usize; kf];
    let mut all = Vec::with_capacity(classes as usize);
    loop {
        let vals: Vec<u64> = tuple.iter().map(|&t| units[t]).collect();
        let key = vals.iter().rev().fold(0u64, |acc, &r| acc * q + r);
        let c = counts.get(key);
        total += c;
        all.push(c);
        if c > 0 {
            out.push(TupleCount { tuple: vals, count: c });
        }
        let mut pos = kf;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < units.len() {
                break;
            }
            tuple[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX || kf == 0 {
            break;
        }
    }
    let (discrepancy, chi_square) = if total == 0 {
        (None, None)
    } else {
        let expect = total as f64 / classes as f64;
        let mut dmax = 0f64;
        let mut chi = 0f64;
        for &c in &all {
            dmax = dmax.max((c as f64 / expect - 1.0).abs());
            chi += (c as f64 - expect).powi(2) / expect;
        }
        (Some(dmax), Some(chi))
    };
    let empty = all.iter().filter(|&&c| c == 0).count() as u64;
    Ok(EquidistReport {
        family: spec.name.clone(),
        x,
        q,
        k,
        filter,
        convenient: matches!(filter, FilterSpec::Convenient { .. }).then_some(cp),
        counts: out,
        coprime_total: total,
        classes,
        empty_classes: empty,
        discrepancy,
        chi_square,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub x: u64,
    pub coprime_total: u64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub intercept: f64,
    pub log_x: f64,
    pub log_log_x: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthTable {
    pub family: String,
    pub q: u64,
    pub k: u32,
    pub alpha_k: f64,
    /// Predicted coefficients: 1/k on log x and -(1 - alpha_k) on log log x.
    pub predicted: GrowthFit,
    pub fit: GrowthFit,
    pub rows: Vec<GrowthRow>,
}

/// Count n <= x with gcd(f(n), q) = 1 at every x in `xs` in one pass.
pub fn coprime_counts(spec: &MultFnSpec, q: u64, xs: &[u64]) -> Result<Vec<u64>> {
    let mut grid = xs.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let xmax = grid.last().copied().unwrap_or(0);
    let eng = Engine::new(spec, xmax, q, 1, f64::INFINITY)?;
    let buckets = eng.scan(
        xmax,
        || vec![0u64; grid.len()],
        |acc, st| {
            if st.unit {
                acc[grid.partition_point(|&g| g < st.n)] += 1;
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
    );
    let mut run = 0;
    let prefix: Vec<u64> = buckets
        .iter()
        .map(|&b| {
            run += b;
            run
        })
        .collect();
    Ok(xs
        .iter()
        .map(|x| prefix[grid.binary_search(x).unwrap()])
        .collect())
}

pub fn coprime_growth_check(spec: &MultFnSpec, q: u64, k: u32, xs: &[u64]) -> Result<GrowthTable> {
    let adm = admissible_k(spec, q);
    if adm.k != Some(k as usize) {
        return Err(Error::NotAdmissible(q));
    }
    if xs.len() < 3 || xs.iter().any(|&x| x < 16) {
        return Err(Error::Invalid("growth fit needs at least three x >= 16".into()));
    }
    let alpha = adm.alpha_k.unwrap().to_f64().unwrap_or(0.0);
    let totals = coprime_counts(spec, q, xs)?;
    if totals.iter().any(|&t| t == 0) {
        return Err(Error::ZeroDensity(q));
    }
    let rows_x: Vec<[f64; 3]> = xs
        .iter()
        .map(|&x| {
            let l = (x as f64).ln();
            [1.0, l, l.ln()]
        })
        .collect();
    let ys: Vec<f64> = totals.iter().map(|&t| (t as f64).ln()).collect();
    let beta = least_squares3(&rows_x, &ys)?;
    let rows = xs
        .iter()
        .zip(&totals)
        .zip(rows_x.iter().zip(&ys))
        .map(|((&x, &t), (r, &y))| GrowthRow {
            x,
            coprime_total: t,
            residual: y - (beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2]),
        })
        .collect();
    Ok(GrowthTable {
        family: spec.name.clone(),
        q,
        k,
        alpha_k: alpha,
        predicted: GrowthFit {
            intercept: f64::NAN,
            log_x: 1.0 / k as f64,
            log_log_x: -(1.0 - alpha),
        },
        fit: GrowthFit {
            intercept: beta[0],
            log_x: beta[1],
            log_log_x: beta[2],
        },
        rows,
    })
}

/// Normal equations for a 3-column design, solved by Gaussian elimination.
fn least_squares3(a: &[[f64; 3]], y: &[f64]) -> Result<[f64; 3]> {
    let mut m = [[0f64; 4]; 3];
    for (row, &yy) in a.iter().zip(y) {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * yy;
        }
    }
    for c in 0..3 {
        let piv = (c..3)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if m[piv][c].abs() < 1e-12 {
            return Err(Error::Invalid("degenerate regression grid".into()));
        }
        m.swap(c, piv);
        for r in 0..3 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for j in c..4 {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    Ok([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

#[derive(Clone, Debug, Serialize)]
pub struct KFreeRow {
    pub x: u64,
    pub distinct: usize,
    pub largest: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KFreeReport {
    pub family: String,
    pub q: u64,
    pub k: u32,
    pub rows: Vec<KFreeRow>,
    /// The k-free parts seen up to the largest x.
    pub parts: Vec<u64>,
}

/// The k-free parts of n <= x with gcd(f(n), q) = 1, tracked on a grid of x.
pub fn k_free_parts(spec: &MultFnSpec, q: u64, k: u32, xs: &[u64]) -> Result<KFreeReport> {
    let xmax = xs.iter().copied().max().unwrap_or(0);
    let eng = Engine::new(spec, xmax, q, k, f64::INFINITY)?;
    // first n at which each k-free part shows up
    let first: HashMap<u64, u64> = eng.scan(
        xmax,
        HashMap::new,
        |acc: &mut HashMap<u64, u64>, st| {
            if st.unit {
                acc.entry(st.k_free).or_insert(st.n);
            }
        },
        |mut a, b| {
            for (part, n) in b {
                let e = a.entry(part).or_insert(n);
                *e = (*e).min(n);
            }
            a
        },
    );
    let rows = xs
        .iter()
        .map(|&x| {
            let seen: Vec<u64> = first.iter().filter(|&(_, &n)| n <= x).map(|(&p, _)| p).collect();
            KFreeRow {
                x,
                distinct: seen.len(),
                largest: seen.iter().copied().max().unwrap_or(0),
            }
        })
        .collect();
    let parts: BTreeSet<u64> = first.keys().copied().collect();
    Ok(KFreeReport {
        family: spec.name.clone(),
        q,
        k,
        rows,
        parts: parts.into_iter().collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimeSumRow {
    pub x: u64,
    pub sum: f64,
    pub main: f64,
    pub difference: f64,
}

/// sum_{p <= x, (G(p), q) = 1} 1/p against alpha_G(q) log log x.
pub fn prime_reciprocal_check(g: &IntPoly, q: u64, xs: &[u64]) -> Result<Vec<PrimeSumRow>> {
    if g.degree().unwrap_or(0) == 0 {
        return Err(Error::ConstantInput);
    }
    let xmax = xs.iter().copied().max().unwrap_or(0);
    if xmax > X_MAX {
        return Err(Error::BudgetExceeded(format!("x = {xmax} exceeds {X_MAX}")));
    }
    let alpha = alpha_polys(std::slice::from_ref(g), q).to_f64().unwrap_or(0.0);
    let gm = g.to_mod(q);
    let good: Vec<bool> = (0..q).map(|r| gcd(gm.eval(r), q) == 1).collect();
    let primes = primes_up_to(xmax);
    let mut grid: Vec<u64> = xs.to_vec();
    grid.sort_unstable();
    let mut sums = Vec::with_capacity(grid.len());
    let mut acc = 0f64;
    let mut it = primes.iter().peekable();
    for &x in &grid {
        while let Some(&&p) = it.peek() {
            if p > x {
                break;
            }
            if good[(p % q) as usize] {
                acc += 1.0 / p as f64;
            }
            it.next();
        }
        sums.push((x, acc));
    }
    Ok(xs
        .iter()
        .map(|&x| {
            let sum = sums[grid.binary_search(&x).unwrap()].1;
            let main = alpha * (x.max(3) as f64).ln().ln();
            PrimeSumRow {
                x,
                sum,
                main,
                difference: sum - main,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Construction {
    LinearOverrep,
    EisensteinFamily,
    IfhViolation,
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "LINEAR_OVERREP" => Ok(Construction::LinearOverrep),
            "EISENSTEIN_FAMILY" => Ok(Construction::EisensteinFamily),
            "IFH_VIOLATION" => Ok(Construction::IfhViolation),
            _ => Err(Error::Invalid(format!("unknown construction '{s}'"))),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Construction::LinearOverrep => "LINEAR_OVERREP",
            Construction::EisensteinFamily => "EISENSTEIN_FAMILY",
            Construction::IfhViolation => "IFH_VIOLATION",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    /// Degree d of the deforming factor; d = 1 removes the mechanism.
    pub d: u32,
    /// Number of functions K.
    pub kf: usize,
    /// Override the constructed modulus.
    pub q: Option<u64>,
    /// Override the default input filter.
    pub filter: Option<FilterSpec>,
    /// Number of prime factors of the constructed modulus.
    pub primes: usize,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            d: 2,
            kf: 0,
            q: None,
            filter: None,
            primes: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleReport {
    pub kind: Construction,
    pub spec: MultFnSpec,
    pub q: u64,
    pub x: u64,
    pub filter: FilterSpec,
    pub target: Vec<u64>,
    pub target_count: u64,
    pub coprime_total: u64,
    /// coprime_total / phi(q)^K
    pub expected: f64,
    pub observed_ratio: f64,
    /// Heuristic prediction of count(target)/expected from the local densities.
    pub predicted_ratio: Option<f64>,
    pub report: EquidistReport,
}

fn rough_product(lo: u64, count: usize, modulus: u64) -> u64 {
    (lo..)
        .filter(|&l| is_prime(l) && (l - 1) % modulus == 0)
        .take(count)
        .product()
}

/// Build one of the optimality constructions and measure it.
pub fn counterexample_build(kind: Construction, params: &CounterexampleParams, x: u64) -> Result<CounterexampleReport> {
    let d = params.d.max(1);
    let one_rule = BeyondRule::Periodic { start: 1, period: 1 };
    let (spec, q, target, filter) = match kind {
        Construction::LinearOverrep => {
            // W_i = T + i, b = 1, q = 5 * 7 * 11
            let kf = if params.kf == 0 { 2 } else { params.kf };
            let polys = (1..=kf as i64).map(|i| vec![IntPoly::from_i64s(&[i, 1])]).collect();
            let spec = MultFnSpec::new("linear_overrep", polys, one_rule)?;
            let q = params.q.unwrap_or(5 * 7 * 11);
            let target = (1..=kf as u64).map(|i| (1 + i) % q).collect();
            (spec, q, target, params.filter.unwrap_or(FilterSpec::None))
        }
        Construction::EisensteinFamily => {
            // W_i = prod_{j<=d} (T - 2j) + 2(2i - 1)
            let kf = if params.kf == 0 { 1 } else { params.kf };
            let mut base = IntPoly::from_i64s(&[1]);
            for j in 1..=d as i64 {
                base = &base * &IntPoly::linear_root(2 * j);
            }
            let polys = (1..=kf as i64)
                .map(|i| vec![&base + &IntPoly::from_i64s(&[2 * (2 * i - 1)])])
                .collect();
            let spec = MultFnSpec::new("eisenstein_family", polys, one_rule)?;
            let q = params
                .q
                .unwrap_or_else(|| rough_product(4 * kf as u64 * d as u64 + 1, params.primes, 1));
            let target = (1..=kf as u64).map(|i| 2 * (2 * i - 1) % q).collect();
            (spec, q, target, params.filter.unwrap_or(FilterSpec::PrimePower))
        }
        Construction::IfhViolation => {
            // W_i = T - i for i < K, W_K = (T - K)^d
            let kf = if params.kf == 0 { 2 } else { params.kf.max(2) };
            let polys = (1..=kf as i64)
                .map(|i| {
                    let w = IntPoly::linear_root(i);
                    vec![if i == kf as i64 { w.pow(d) } else { w }]
                })
                .collect();
            let spec = MultFnSpec::new("ifh_violation", polys, one_rule)?;
            let q = params
                .q
                .unwrap_or_else(|| rough_product(4 * kf as u64 * d as u64 + 1, params.primes, d as u64));
            let target = vec![1 % q; kf];
            (spec, q, target, params.filter.unwrap_or(FilterSpec::PrGtQ(2)))
        }
    };
    if target.iter().any(|&a| gcd(a, q) != 1) {
        return Err(Error::Invalid(format!("target {target:?} is not a unit tuple mod {q}")));
    }
    let report = sieve_run(&spec, x, q, 1, filter)?;
    let expected = report.coprime_total as f64 / report.classes as f64;
    let target_count = report.count(&target);
    let observed_ratio = if expected > 0.0 {
        target_count as f64 / expected
    } else {
        0.0
    };
    Ok(CounterexampleReport {
        kind,
        predicted_ratio: predicted_ratio(kind, &spec, q, d, &target),
        spec,
        q,
        x,
        filter,
        target,
        target_count,
        coprime_total: report.coprime_total,
        expected,
        observed_ratio,
        report,
    })
}

/// The same construction with d = 1, measured mod the least prime above the
/// constructed modulus with the same filter.
pub fn counterexample_control(kind: Construction, params: &CounterexampleParams, x: u64) -> Result<CounterexampleReport> {
    let built = counterexample_build(kind, params, 1)?;
    let q = (built.q + 1..).find(|&l| is_prime(l)).unwrap();
    let control = CounterexampleParams {
        d: 1,
        q: Some(q),
        filter: Some(built.filter),
        ..params.clone()
    };
    counterexample_build(kind, &control, x)
}

/// Local-density heuristics: fibre size over alpha for the Eisenstein family
/// on primes, the index of the d-th powers for the IFH family. The linear
/// family's excess grows with x, so it has none.
fn predicted_ratio(kind: Construction, spec: &MultFnSpec, q: u64, d: u32, target: &[u64]) -> Option<f64> {
    let level = spec.level(1);
    let alpha = alpha_polys(&level, q).to_f64().unwrap_or(0.0);
    match kind {
        Construction::EisensteinFamily => {
            // fibre of the target over U_q relative to the mean fibre alpha
            let w = level[0].to_mod(q);
            let fibre = (0..q)
                .filter(|&u| gcd(u, q) == 1 && w.eval(u) == target[0])
                .count() as f64;
            (alpha > 0.0).then(|| fibre / alpha)
        }
        Construction::IfhViolation => {
            let facs = factorize(q);
            Some(
                facs.iter()
                    .map(|&(ell, _)| gcd(d as u64, ell - 1) as f64)
                    .product(),
            )
        }
        Construction::LinearOverrep => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_mod_5_small() {
        let r = sieve_run(&MultFnSpec::phi(4), 10, 5, 1, FilterSpec::None).unwrap();
        // phi(n) for n = 1..10: 1 1 2 2 4 2 6 4 6 4
        assert_eq!(r.count(&[1]), 4);
        assert_eq!(r.count(&[2]), 3);
        assert_eq!(r.coprime_total, 10);
    }

    #[test]
    fn only_n_equal_one() {
        let r = sieve_run(&MultFnSpec::sigma(3), 1, 2, 1, FilterSpec::None).unwrap();
        assert_eq!(r.counts, vec![TupleCount { tuple: vec![1], count: 1 }]);
        assert_eq!(r.coprime_total, 1);
    }

    #[test]
    fn modulus_one_counts_everything() {
        let r = sieve_run(&MultFnSpec::phi(4), 12345, 1, 1, FilterSpec::None).unwrap();
        assert_eq!(r.coprime_total, 12345);
        assert_eq!(r.discrepancy, Some(0.0));
    }

    #[test]
    fn values_match_oracles() {
        let x = 20_000;
        let q = 9973;
        let phi = totient_oracle(x, q);
        let sig: Vec<_> = (1..=3).map(|r| divisor_sum_oracle(r, x, q)).collect();
        let got = sieve_values(&MultFnSpec::phi(4), x, q, 1, 1.0).unwrap();
        for v in &got {
            assert_eq!(v.residues[0], phi[v.n as usize], "phi({})", v.n);
        }
        for r in 1..=3u32 {
            let got = sieve_values(&MultFnSpec::sigma_r(r, 4), x, q, 1, 1.0).unwrap();
            for v in &got {
                assert_eq!(v.residues[0], sig[r as usize - 1][v.n as usize], "sigma_{r}({})", v.n);
            }
        }
        for n in [1u64, 2, 360, 1024, 19_999] {
            assert_eq!(naive_values(&MultFnSpec::phi_sigma(4), n, q).unwrap(), vec![phi[n as usize], sig[0][n as usize]]);
        }
    }

    #[test]
    fn anatomy_matches_naive() {
        let fr = factor_range(1, 30_000);
        for a in &fr {
            let b = Anatomy::naive(a.n);
            assert_eq!(a, &b);
            let prod: u64 = a.factors.iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(prod, a.n);
        }
        let q = 7;
        for k in 1..=3u32 {
            let sv = sieve_values(&MultFnSpec::phi(4), 30_000 - 1, q, k, 1.0).unwrap();
            let cp = ConvenientParams::new(30_000 - 1, 1.0);
            for (v, a) in sv.iter().zip(&fr) {
                assert_eq!(v.n_k, a.n_k(k));
                assert_eq!(v.k_free, a.k_free_part(k));
                let big = (1..=40).filter(|&r| a.p_r(r) > q).count() as u32;
                assert_eq!(v.big, big);
                assert_eq!(v.convenient, a.is_convenient(k, cp.j, cp.y), "n = {}", a.n);
            }
        }
    }

    #[test]
    fn anatomy_examples() {
        let a = Anatomy::naive(2 * 2 * 3 * 3 * 3 * 5);
        assert_eq!(a.p_r(1), 5);
        assert_eq!(a.p_r(2), 3);
        assert_eq!(a.p_r(4), 3);
        assert_eq!(a.p_r(5), 2);
        assert_eq!(a.p_r(7), 1);
        assert_eq!(a.n_k(2), 2);
        assert_eq!(a.n_k(3), 3);
        assert_eq!(a.k_free_part(2), 5);
        assert_eq!(Anatomy::naive(1).p_r(1), 1);
    }

    #[test]
    fn filter_roundtrip() {
        for s in ["none", "pr:6", "pt-nk:3", "convenient", "convenient:0.5", "prime-power"] {
            let f: FilterSpec = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("pr:x".parse::<FilterSpec>().is_err());
        assert!("convenient:2".parse::<FilterSpec>().is_err());
    }

    #[test]
    fn pr_filter_monotone_and_helps() {
        let spec = MultFnSpec::sigma(4);
        let mut last = u64::MAX;
        for r in 0..=4 {
            let rep = sieve_run(&spec, 200_000, 5, 1, FilterSpec::PrGtQ(r)).unwrap();
            assert!(rep.coprime_total <= last);
            last = rep.coprime_total;
            let s: u64 = rep.counts.iter().map(|c| c.count).sum();
            assert_eq!(s, rep.coprime_total);
        }
    }

    #[test]
    fn undefined_beyond_v_is_reported() {
        let spec = MultFnSpec::new("w", vec![vec![IntPoly::linear_root(1)]], BeyondRule::Undefined).unwrap();
        assert!(matches!(
            sieve_run(&spec, 100, 5, 1, FilterSpec::None),
            Err(Error::BeyondVUndefined { .. })
        ));
        assert!(sieve_run(&spec, 3, 5, 1, FilterSpec::None).is_ok());
    }

    #[test]
    fn growth_requires_admissible() {
        let xs = [1000, 10_000, 100_000];
        assert!(matches!(
            coprime_growth_check(&MultFnSpec::sigma(4), 4, 1, &xs),
            Err(Error::NotAdmissible(4))
        ));
        let t = coprime_growth_check(&MultFnSpec::phi(4), 1, 1, &xs).unwrap();
        for r in &t.rows {
            assert_eq!(r.coprime_total, r.x);
        }
    }

    #[test]
    fn eisenstein_small() {
        let rep = counterexample_build(Construction::EisensteinFamily, &CounterexampleParams::default(), 300_000).unwrap();
        assert_eq!(rep.q, 143);
        assert_eq!(rep.target, vec![2]);
        assert!((rep.predicted_ratio.unwrap() - 4.8).abs() < 1e-9);
        assert!(rep.observed_ratio > 3.5, "{}", rep.observed_ratio);
    }

    #[test]
    fn k_free_parts_of_sigma_mod_4() {
        // sigma(n) odd needs every odd prime to an even power, so n has 2-part times a square
        let rep = k_free_parts(&MultFnSpec::sigma(4), 4, 2, &[1000, 100_000]).unwrap();
        assert!(rep.parts.iter().all(|&p| p <= 2), "{:?}", rep.parts);
    }

    #[test]
    fn prime_sum_tracks_alpha() {
        let rows = prime_reciprocal_check(&IntPoly::from_i64s(&[1, 1]), 3, &[1000, 1_000_000]).unwrap();
        let spread = (rows[0].difference - rows[1].difference).abs();
        assert!(spread < 0.1, "{rows:?}");
    }
}
