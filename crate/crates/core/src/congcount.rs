//! Counting solutions of the multiplicative congruences
//! prod_j F_{i,j}(v_j) = w_i (mod q), v in U_q^N, by enumeration and by
//! character orthogonality.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{euler_phi, gcd, inv_mod, is_squarefree, omega};
use crate::cyclo::reduce_mod_cyclotomic;
use crate::dirichlet::{characters_mod, z_hist, DirichletChar};
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;
use crate::resring::{alpha_polys, unit_group, MultFnSpec, UnitGroup};

pub const BRUTE_BUDGET: u128 = 1_000_000_000;
pub const CHARSUM_BUDGET: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VCountQuery {
    pub q: u64,
    /// `slots[j][i]` is F_{i,j}; N = slots.len(), K = targets.len().
    pub slots: Vec<Vec<IntPoly>>,
    pub targets: Vec<u64>,
}

impl VCountQuery {
    pub fn new(q: u64, slots: Vec<Vec<IntPoly>>, targets: Vec<u64>) -> Result<Self> {
        let query = VCountQuery { q, slots, targets };
        query.validate()?;
        Ok(query)
    }

    /// Every slot uses the level-v polynomials (W_{1,v}, ..., W_{K,v}).
    pub fn from_family(spec: &MultFnSpec, v: usize, q: u64, n: usize, targets: Vec<u64>) -> Result<Self> {
        if v == 0 || v > spec.v_max() {
            return Err(Error::Invalid(format!("level {v} outside 1..={}", spec.v_max())));
        }
        Self::new(q, vec![spec.level(v); n], targets)
    }

    pub fn n(&self) -> usize {
        self.slots.len()
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    /// Largest degree among the slot polynomials.
    pub fn max_degree(&self) -> usize {
        self.slots
            .iter()
            .flatten()
            .filter_map(|f| f.degree())
            .max()
            .unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Invalid("q must be positive".into()));
        }
        if self.slots.is_empty() || self.targets.is_empty() {
            return Err(Error::Invalid("need N >= 1 slots and K >= 1 targets".into()));
        }
        if let Some(j) = self.slots.iter().position(|s| s.len() != self.k()) {
            return Err(Error::Invalid(format!("slot {j} does not have K = {} polynomials", self.k())));
        }
        if let Some(&w) = self.targets.iter().find(|&&w| gcd(w, self.q) != 1) {
            return Err(Error::Invalid(format!("target {w} is not a unit mod {}", self.q)));
        }
        Ok(())
    }

    fn reduced_targets(&self) -> Vec<u64> {
        self.targets.iter().map(|&w| w % self.q).collect()
    }
}

/// For each slot, the value tuples (F_{1,j}(v), ..., F_{K,j}(v)) over units v
/// at which all values are units.
fn slot_values(query: &VCountQuery, g: &UnitGroup) -> Vec<Vec<Vec<u64>>> {
    let units = g.units();
    query
        .slots
        .iter()
        .map(|col| {
            let mods: Vec<_> = col.iter().map(|f| f.to_mod(query.q)).collect();
            units
                .iter()
                .filter_map(|&v| {
                    let vals: Vec<u64> = mods.iter().map(|m| m.eval(v)).collect();
                    vals.iter().all(|&x| gcd(x, query.q) == 1).then_some(vals)
                })
                .collect()
        })
        .collect()
}

fn key(vals: &[u64], q: u64) -> u128 {
    vals.iter().fold(0u128, |acc, &x| acc * q as u128 + x as u128)
}

/// Number of v in U_q^N solving the system, by running through U_q^{N-1}
/// and looking up the last coordinate.
pub fn v_count_brute(query: &VCountQuery) -> Result<u64> {
    query.validate()?;
    let g = unit_group(query.q)?;
    let phi = g.phi as u128;
    let work = phi.checked_pow(query.n() as u32).unwrap_or(u128::MAX);
    if work > BRUTE_BUDGET {
        return Err(Error::BudgetExceeded(format!("phi(q)^N = {phi}^{} enumeration", query.n())));
    }
    let q = query.q;
    let kk = query.k();
    let vals = slot_values(query, &g);
    let targets = query.reduced_targets();
    let (init, last) = vals.split_at(vals.len() - 1);
    let mut last_hist: HashMap<u128, u64> = HashMap::new();
    for t in &last[0] {
        *last_hist.entry(key(t, q)).or_default() += 1;
    }
    let inverse = |x: u64| inv_mod(x, q).expect("unit");
    let mut total = 0u64;
    let mut stack: Vec<Vec<u64>> = vec![vec![1 % q; kk]];
    let mut idx: Vec<usize> = Vec::with_capacity(init.len());
    // Depth-first walk over U_q^(N-1) with running products.
    loop {
        let depth = idx.len();
        if depth == init.len() {
            let prod = stack.last().unwrap();
            let need: Vec<u64> = (0..kk)
                .map(|i| (targets[i] as u128 * inverse(prod[i]) as u128 % q as u128) as u64)
                .collect();
            total += last_hist.get(&key(&need, q)).copied().unwrap_or(0);
            // advance
            loop {
                let Some(i) = idx.pop() else {
                    return Ok(total);
                };
                stack.pop();
                let d = idx.len();
                if i + 1 < init[d].len() {
                    push(&mut idx, &mut stack, init, d, i + 1, q);
                    break;
                }
            }
        } else if init[depth].is_empty() {
            return Ok(0);
        } else {
            push(&mut idx, &mut stack, init, depth, 0, q);
        }
    }
}

fn push(idx: &mut Vec<usize>, stack: &mut Vec<Vec<u64>>, init: &[Vec<Vec<u64>>], d: usize, i: usize, q: u64) {
    let top = stack.last().unwrap();
    let next: Vec<u64> = top
        .iter()
        .zip(&init[d][i])
        .map(|(&a, &b)| (a as u128 * b as u128 % q as u128) as u64)
        .collect();
    idx.push(i);
    stack.push(next);
}

/// All target tuples at once: counts keyed by (w_1, ..., w_K), built slot by
/// slot as a convolution over U_q^K.
pub fn v_count_table(query: &VCountQuery) -> Result<HashMap<Vec<u64>, u64>> {
    query.validate()?;
    let g = unit_group(query.q)?;
    let q = query.q;
    let vals = slot_values(query, &g);
    let mut table: HashMap<Vec<u64>, u64> = HashMap::new();
    table.insert(vec![1 % q; query.k()], 1);
    for slot in &vals {
        let work = table.len() as u128 * slot.len() as u128;
        if work > BRUTE_BUDGET {
            return Err(Error::BudgetExceeded("target table convolution".into()));
        }
        let mut next: HashMap<Vec<u64>, u64> = HashMap::with_capacity(table.len());
        for (w, &c) in &table {
            for t in slot {
                let prod: Vec<u64> = w
                    .iter()
                    .zip(t)
                    .map(|(&a, &b)| (a as u128 * b as u128 % q as u128) as u64)
                    .collect();
                *next.entry(prod).or_default() += c;
            }
        }
        table = next;
    }
    Ok(table)
}

fn cyclic_mul(a: &[i128], b: &[i128]) -> Option<Vec<i128>> {
    let m = a.len();
    let mut out = vec![0i128; m];
    for (i, &x) in a.iter().enumerate().filter(|(_, &x)| x != 0) {
        for (j, &y) in b.iter().enumerate().filter(|(_, &y)| y != 0) {
            let k = (i + j) % m;
            out[k] = out[k].checked_add(x.checked_mul(y)?)?;
        }
    }
    Some(out)
}

/// (1/phi(q)^K) sum over K-tuples of characters of
/// prod_i conj(chi_i)(w_i) * prod_j Z_{q; chi}(F_{1,j}, ..., F_{K,j}).
pub fn v_count_charsum(query: &VCountQuery) -> Result<BigRational> {
    query.validate()?;
    let g = unit_group(query.q)?;
    let chars = characters_mod(&g);
    let phi = g.phi;
    let kk = query.k();
    let tuples = (phi as u128).checked_pow(kk as u32).unwrap_or(u128::MAX);
    if tuples.saturating_mul(query.n() as u128) > CHARSUM_BUDGET {
        return Err(Error::BudgetExceeded(format!("{tuples} character tuples")));
    }
    let m = g.exponent() as usize;
    let targets = query.reduced_targets();
    let overflow = || Error::BudgetExceeded("group ring coefficients overflow i128".into());

    let tuple_term = |t: u128| -> Result<Vec<i128>> {
        let mut rest = t;
        let chis: Vec<DirichletChar> = (0..kk)
            .map(|_| {
                let c = chars[(rest % phi as u128) as usize].clone();
                rest /= phi as u128;
                c
            })
            .collect();
        let shift = chis
            .iter()
            .zip(&targets)
            .map(|(c, &w)| c.value_exp(&g, w).expect("unit target") as usize)
            .sum::<usize>()
            % m;
        let mut acc = vec![0i128; m];
        acc[(m - shift) % m] = 1;
        for col in &query.slots {
            let h: Vec<i128> = z_hist(&g, &chis, col).into_iter().map(i128::from).collect();
            acc = cyclic_mul(&acc, &h).ok_or_else(overflow)?;
        }
        Ok(acc)
    };
    let sum = (0..tuples)
        .into_par_iter()
        .map(tuple_term)
        .try_reduce(
            || vec![0i128; m],
            |a, b| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| x.checked_add(*y))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(overflow)
            },
        )?;
    let big: Vec<BigInt> = sum.into_iter().map(BigInt::from).collect();
    let red = reduce_mod_cyclotomic(&big, m as u64);
    if red.iter().skip(1).any(|c| !c.is_zero()) {
        return Err(Error::Invalid("orthogonality sum is not rational".into()));
    }
    let c0 = red.first().cloned().unwrap_or_default();
    Ok(BigRational::new(c0, BigInt::from(phi).pow(kk as u32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    LargeN,
    SmallN,
    Sqfree,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "large_n" => Ok(Regime::LargeN),
            "small_n" => Ok(Regime::SmallN),
            "sqfree" => Ok(Regime::Sqfree),
            _ => Err(Error::Invalid(format!("unknown regime {s}"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::LargeN => "LARGE_N",
            Regime::SmallN => "SMALL_N",
            Regime::Sqfree => "SQFREE",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VCountReport {
    pub q: u64,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub regime: Regime,
    pub exact_count: u64,
    #[serde(with = "crate::ser::rational_opt")]
    pub charsum_count: Option<BigRational>,
    /// prod_j alpha_j(q) * phi(q)^(N-K)
    #[serde(with = "crate::ser::rational")]
    pub predicted_main: BigRational,
    /// exact_count / predicted_main for LARGE_N, exact_count / envelope otherwise
    pub ratio: f64,
    /// D^omega(q) * phi(q)^N * q^(-min(K, N/D)), for the bound regimes
    pub envelope: Option<f64>,
    pub within_envelope: Option<bool>,
}

pub fn estimate_check(query: &VCountQuery, regime: Regime) -> Result<VCountReport> {
    query.validate()?;
    let (q, n, kk, d) = (query.q, query.n(), query.k(), query.max_degree());
    let ok = match regime {
        Regime::LargeN => n > kk * d,
        Regime::SmallN => n <= kk * d,
        Regime::Sqfree => is_squarefree(q),
    };
    if !ok {
        return Err(Error::RegimeMismatch {
            regime: regime.to_string(),
            n,
            kd: kk * d,
        });
    }
    let phi = euler_phi(q);
    let exact_count = match v_count_brute(query) {
        Ok(c) => c,
        Err(Error::BudgetExceeded(_)) => {
            let t = v_count_table(query)?;
            t.get(&query.reduced_targets()).copied().unwrap_or(0)
        }
        Err(e) => return Err(e),
    };
    let charsum_count = match v_count_charsum(query) {
        Ok(c) => Some(c),
        Err(Error::BudgetExceeded(_)) => None,
        Err(e) => return Err(e),
    };
    let mut predicted_main = BigRational::one();
    for col in &query.slots {
        predicted_main *= alpha_polys(col, q) * BigRational::from_integer(phi.into());
    }
    predicted_main /= BigRational::from_integer(BigInt::from(phi).pow(kk as u32));
    let (ratio, envelope) = match regime {
        Regime::LargeN => {
            let r = if predicted_main.is_zero() {
                if exact_count == 0 { 1.0 } else { f64::INFINITY }
            } else {
                exact_count as f64 / predicted_main.to_f64().unwrap_or(f64::NAN)
            };
            (r, None)
        }
        Regime::SmallN | Regime::Sqfree => {
            let expo = if d == 0 { kk as f64 } else { (kk as f64).min(n as f64 / d as f64) };
            let env = (d.max(1) as f64).powi(omega(q) as i32) * (phi as f64).powi(n as i32) * (q as f64).powf(-expo);
            (exact_count as f64 / env, Some(env))
        }
    };
    Ok(VCountReport {
        q,
        k: kk,
        n,
        d,
        regime,
        exact_count,
        charsum_count,
        predicted_main,
        ratio,
        envelope,
        within_envelope: envelope.map(|e| exact_count as f64 <= e + 1e-9),
    })
}

/// Degree-at-most-2 slot polynomials for the oracle sweeps.
pub fn slot_corpus() -> Vec<IntPoly> {
    [
        &[0, 1][..],
        &[1, 1],
        &[-1, 1],
        &[2, 1],
        &[1, 2],
        &[3, -1],
        &[1, 0, 1],
        &[1, 1, 1],
        &[-2, 0, 1],
        &[0, 1, 1],
        &[1, 2, 1],
        &[-1, 0, 3],
    ]
    .iter()
    .map(|c| IntPoly::from_i64s(c))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[i64]) -> IntPoly {
        IntPoly::from_i64s(c)
    }

    #[test]
    fn brute_examples() {
        let q = VCountQuery::new(5, vec![vec![p(&[1, 1])]; 2], vec![1]).unwrap();
        assert_eq!(v_count_brute(&q).unwrap(), 3);
        assert_eq!(v_count_charsum(&q).unwrap(), BigRational::from_integer(3.into()));
        let q = VCountQuery::new(5, vec![vec![p(&[0, 1])]], vec![2]).unwrap();
        assert_eq!(v_count_brute(&q).unwrap(), 1);
        let q = VCountQuery::new(2, vec![vec![p(&[1, 1]), p(&[0, 3])]; 3], vec![1, 1]).unwrap();
        assert_eq!(v_count_brute(&q).unwrap(), 0);
        let q = VCountQuery::new(2, vec![vec![p(&[0, 1]), p(&[0, 3])]; 3], vec![1, 1]).unwrap();
        assert_eq!(v_count_brute(&q).unwrap(), 1);
        let q = VCountQuery::new(1, vec![vec![p(&[0, 1])]; 2], vec![0]).unwrap();
        assert_eq!(v_count_brute(&q).unwrap(), 1);
        assert_eq!(v_count_charsum(&q).unwrap(), BigRational::one());
    }

    #[test]
    fn non_unit_target_rejected() {
        assert!(VCountQuery::new(6, vec![vec![p(&[0, 1])]], vec![3]).is_err());
    }

    #[test]
    fn budget_enforced() {
        let q = VCountQuery::new(9_999_991, vec![vec![p(&[0, 1])]; 3], vec![1]).unwrap();
        assert!(matches!(v_count_brute(&q), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn eight_two_three() {
        for (a, b) in [(1u64, 1u64), (3, 5), (7, 3), (5, 5)] {
            let q = VCountQuery::new(8, vec![vec![p(&[-1, 1]), p(&[1, 1])]; 3], vec![a, b]).unwrap();
            let brute = v_count_brute(&q).unwrap();
            assert_eq!(v_count_charsum(&q).unwrap(), BigRational::from_integer(brute.into()));
        }
    }

    #[test]
    fn large_n_phi_sigma() {
        let spec = MultFnSpec::phi_sigma(1);
        let q = VCountQuery::from_family(&spec, 1, 25, 5, vec![1, 1]).unwrap();
        let r = estimate_check(&q, Regime::LargeN).unwrap();
        assert_eq!(r.charsum_count, Some(BigRational::from_integer(r.exact_count.into())));
        // Mod 5 only four classes are reachable with N = 5, so (1,1) gets nothing
        // while the reachable classes average four times the main term.
        assert_eq!(r.exact_count, 0);
        let table = v_count_table(&q).unwrap();
        let mass: u64 = table.values().sum();
        assert_eq!(BigRational::from_integer(mass.into()), &r.predicted_main * BigRational::from_integer(400.into()));
        let r13 = estimate_check(&VCountQuery::from_family(&spec, 1, 25, 5, vec![1, 3]).unwrap(), Regime::LargeN).unwrap();
        assert!(r13.ratio > 2.0 && r13.ratio < 3.0, "{}", r13.ratio);
        let q4 = VCountQuery::from_family(&spec, 1, 25, 2, vec![1, 1]).unwrap();
        assert!(matches!(estimate_check(&q4, Regime::LargeN), Err(Error::RegimeMismatch { .. })));
    }

    #[test]
    fn small_n_prime() {
        let q = VCountQuery::new(13, vec![vec![p(&[1, 0, 1])]], vec![2]).unwrap();
        let r = estimate_check(&q, Regime::SmallN).unwrap();
        assert!(r.exact_count <= 2);
        assert_eq!(r.within_envelope, Some(true));
        let r = estimate_check(&q, Regime::Sqfree).unwrap();
        assert_eq!(r.within_envelope, Some(true));
    }

    #[test]
    fn trivial_modulus() {
        let q = VCountQuery::new(1, vec![vec![p(&[1, 1])]; 3], vec![0]).unwrap();
        let r = estimate_check(&q, Regime::LargeN).unwrap();
        assert_eq!(r.exact_count, 1);
        assert_eq!(r.predicted_main, BigRational::one());
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn total_mass() {
        for q in [7u64, 12, 15, 16] {
            let corpus = slot_corpus();
            let slots = vec![vec![corpus[1].clone(), corpus[6].clone()], vec![corpus[2].clone(), corpus[7].clone()]];
            let query = VCountQuery::new(q, slots.clone(), vec![1, 1]).unwrap();
            let table = v_count_table(&query).unwrap();
            let total: u64 = table.values().sum();
            let mut expect = BigRational::one();
            for col in &slots {
                expect *= alpha_polys(col, q) * BigRational::from_integer(euler_phi(q).into());
            }
            assert_eq!(BigRational::from_integer(total.into()), expect);
            let g = unit_group(q).unwrap();
            for a in g.units() {
                for b in g.units() {
                    let qq = VCountQuery::new(q, slots.clone(), vec![a, b]).unwrap();
                    assert_eq!(table.get(&vec![a, b]).copied().unwrap_or(0), v_count_brute(&qq).unwrap());
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn brute_equals_charsum(q in 1u64..40, n in 1usize..4, kk in 1usize..3, picks in prop::collection::vec(0usize..12, 6), seed in any::<u64>()) {
            let corpus = slot_corpus();
            let slots: Vec<Vec<IntPoly>> = (0..n)
                .map(|j| (0..kk).map(|i| corpus[picks[(j * kk + i) % 6]].clone()).collect())
                .collect();
            let g = unit_group(q).unwrap();
            let units = g.units();
            let targets: Vec<u64> = (0..kk).map(|i| units[(seed as usize >> (8 * i)) % units.len()]).collect();
            let query = VCountQuery::new(q, slots.clone(), targets).unwrap();
            let b = v_count_brute(&query).unwrap();
            prop_assert_eq!(v_count_charsum(&query).unwrap(), BigRational::from_integer(b.into()));
            // permuting the slots leaves the count unchanged
            let mut rev = slots;
            rev.reverse();
            let query2 = VCountQuery::new(q, rev, query.targets.clone()).unwrap();
            prop_assert_eq!(v_count_brute(&query2).unwrap(), b);
        }
    }
}
