//! Dirichlet characters as exponent vectors over the unit-group generators,
//! conductors, the character sums Z, and annihilators of T_k(q).

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, lcm};
use crate::cyclo::{CycloSum, RootOfUnity};
use crate::error::{Error, Result};
use crate::intmat::{integer_kernel, IntMatrix};
use crate::intpoly::IntPoly;
use crate::resring::{r_v_set, MultFnSpec, UnitGroup};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirichletChar {
    pub q: u64,
    pub exponents: Vec<u64>,
}

impl DirichletChar {
    pub fn trivial(g: &UnitGroup) -> Self {
        DirichletChar {
            q: g.q,
            exponents: vec![0; g.rank()],
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.exponents.iter().all(|&a| a == 0)
    }

    /// chi(u) = zeta_m^e with m = exponent of U_q, or `None` off the units.
    #[inline]
    pub fn value_exp(&self, g: &UnitGroup, u: u64) -> Option<u64> {
        let m = g.exponent();
        let mut acc = 0u64;
        let mut j = 0usize;
        for c in &g.components {
            let x = c.dlog(u)?;
            for t in 0..c.local_gens.len() {
                let n = g.orders[j];
                acc = (acc + (self.exponents[j] * x[t] % n) * (m / n)) % m;
                j += 1;
            }
        }
        Some(acc)
    }

    pub fn value(&self, g: &UnitGroup, u: u64) -> Option<RootOfUnity> {
        self.value_exp(g, u)
            .map(|e| RootOfUnity::new(e as i64, g.exponent()))
    }

    pub fn conj(&self, g: &UnitGroup) -> Self {
        DirichletChar {
            q: self.q,
            exponents: self
                .exponents
                .iter()
                .zip(&g.orders)
                .map(|(&a, &n)| (n - a) % n)
                .collect(),
        }
    }

    pub fn mul(&self, o: &Self, g: &UnitGroup) -> Self {
        DirichletChar {
            q: self.q,
            exponents: self
                .exponents
                .iter()
                .zip(&o.exponents)
                .zip(&g.orders)
                .map(|((&a, &b), &n)| (a + b) % n)
                .collect(),
        }
    }

    pub fn order(&self, g: &UnitGroup) -> u64 {
        self.exponents
            .iter()
            .zip(&g.orders)
            .fold(1, |acc, (&a, &n)| lcm(acc, n / gcd(a, n)))
    }

    pub fn conductor(&self, g: &UnitGroup) -> u64 {
        let mut f = 1u64;
        let mut j = 0usize;
        for c in &g.components {
            let ng = c.local_gens.len();
            let a = &self.exponents[j..j + ng];
            j += ng;
            f *= if c.ell != 2 {
                if a[0] == 0 {
                    1
                } else {
                    let mut e_f = 1;
                    while a[0] % c.ell.pow(c.e - e_f) != 0 {
                        e_f += 1;
                    }
                    c.ell.pow(e_f)
                }
            } else {
                match ng {
                    0 => 1,
                    1 => {
                        if a[0] == 0 {
                            1
                        } else {
                            4
                        }
                    }
                    _ => {
                        let (sign, b) = (a[0], a[1]);
                        if b == 0 {
                            if sign == 0 {
                                1
                            } else {
                                4
                            }
                        } else {
                            let v2 = b.trailing_zeros();
                            1u64 << (c.e - v2).max(3)
                        }
                    }
                }
            };
        }
        f
    }

    pub fn is_primitive(&self, g: &UnitGroup) -> bool {
        self.conductor(g) == g.q
    }
}

/// All characters mod q, lexicographic in the exponent vectors (trivial first).
pub fn characters_mod(g: &UnitGroup) -> Vec<DirichletChar> {
    let mut out = Vec::with_capacity(g.phi as usize);
    let mut cur = vec![0u64; g.rank()];
    loop {
        out.push(DirichletChar {
            q: g.q,
            exponents: cur.clone(),
        });
        let mut i = g.rank();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < g.orders[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Exponent histogram of v -> prod chi_i(F_i(v)) over units v mod q, at order
/// m = exponent of U_q.
pub fn z_hist(g: &UnitGroup, chis: &[DirichletChar], fs: &[IntPoly]) -> Vec<i64> {
    let m = g.exponent();
    let mods: Vec<_> = fs.iter().map(|f| f.to_mod(g.q)).collect();
    let mut hist = vec![0i64; m as usize];
    'units: for v in g.units() {
        let mut e = 0u64;
        for (chi, f) in chis.iter().zip(&mods) {
            let Some(x) = chi.value_exp(g, f.eval(v)) else {
                continue 'units;
            };
            e = (e + x) % m;
        }
        hist[e as usize] += 1;
    }
    hist
}

/// Z_{q; chi_1..chi_K}(F_1, ..., F_K) = sum over units v of prod chi_i(F_i(v)).
pub fn z_sum(g: &UnitGroup, chis: &[DirichletChar], fs: &[IntPoly]) -> CycloSum {
    CycloSum::from_int_hist(g.exponent(), &z_hist(g, chis, fs))
}

/// Image of T_k(q) = {(W_{1,k}(u), ..., W_{K,k}(u)) : u in R_k(q)} in
/// exponent coordinates, reduced to a Hermite basis of the subgroup it
/// generates inside prod_i U_q.
pub fn t_k_subgroup(spec: &MultFnSpec, g: &UnitGroup, k: usize) -> Result<SubgroupLattice> {
    let rk = r_v_set(spec, g.q, k);
    if rk.is_empty() {
        return Err(Error::EmptyRk { q: g.q, k });
    }
    let mods: Vec<_> = spec.level(k).iter().map(|f| f.to_mod(g.q)).collect();
    let mut moduli = Vec::new();
    for _ in 0..spec.k() {
        moduli.extend_from_slice(&g.orders);
    }
    let mut lat = SubgroupLattice::new(moduli);
    let mut buf = Vec::new();
    let mut x = Vec::with_capacity(lat.dim());
    for u in rk {
        x.clear();
        for f in &mods {
            let ok = g.dlog_into(f.eval(u), &mut buf);
            debug_assert!(ok);
            x.extend_from_slice(&buf);
        }
        lat.insert(&x);
    }
    Ok(lat)
}

/// A subgroup of prod Z/n_j, kept as an upper-triangular basis over Z of the
/// lattice it generates together with the relations n_j e_j.
#[derive(Clone, Debug)]
pub struct SubgroupLattice {
    pub moduli: Vec<u64>,
    /// rows[i] is either empty or has its leading entry at column i.
    rows: Vec<Vec<i128>>,
}

impl SubgroupLattice {
    pub fn new(moduli: Vec<u64>) -> Self {
        let d = moduli.len();
        let rows = (0..d)
            .map(|i| {
                let mut r = vec![0i128; d];
                r[i] = moduli[i] as i128;
                r
            })
            .collect();
        SubgroupLattice { moduli, rows }
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    /// Add an element and re-triangularize. Returns false when it was
    /// already in the subgroup.
    pub fn insert(&mut self, x: &[u64]) -> bool {
        let d = self.dim();
        let mut v: Vec<i128> = x.iter().map(|&a| a as i128).collect();
        let mut changed = false;
        for i in 0..d {
            if v[i] == 0 {
                continue;
            }
            let piv = self.rows[i][i];
            if v[i] % piv == 0 {
                let q = v[i] / piv;
                for j in i..d {
                    v[j] -= q * self.rows[i][j];
                }
            } else {
                // Replace the pivot row by the gcd combination of it and v.
                let (gg, s, t) = crate::arith::ext_gcd(self.rows[i][i], v[i]);
                let a = self.rows[i][i] / gg;
                let b = v[i] / gg;
                let old = self.rows[i].clone();
                let mut new_row = vec![0i128; d];
                let mut rest = vec![0i128; d];
                for j in i..d {
                    new_row[j] = s * old[j] + t * v[j];
                    rest[j] = a * v[j] - b * old[j];
                }
                self.rows[i] = new_row;
                self.reduce_row(i);
                v = rest;
                changed = true;
            }
            for j in i + 1..d {
                v[j] = v[j].rem_euclid(self.moduli[j] as i128);
            }
        }
        changed
    }

    fn reduce_row(&mut self, i: usize) {
        for j in i + 1..self.dim() {
            let m = self.moduli[j] as i128;
            self.rows[i][j] = self.rows[i][j].rem_euclid(m);
        }
    }

    /// Order of the subgroup.
    pub fn order(&self) -> u128 {
        let full: u128 = self.moduli.iter().map(|&n| n as u128).product();
        let index: u128 = (0..self.dim()).map(|i| self.rows[i][i].unsigned_abs()).product();
        full / index
    }

    pub fn basis(&self) -> Vec<Vec<i128>> {
        self.rows.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharTuple(pub Vec<DirichletChar>);

impl CharTuple {
    pub fn is_trivial(&self) -> bool {
        self.0.iter().all(|c| c.is_trivial())
    }
}

/// Every K-tuple of characters mod q killing T_k(q), trivial tuple first.
pub fn annihilator_tuples(spec: &MultFnSpec, g: &UnitGroup, k: usize) -> Result<Vec<CharTuple>> {
    let lat = t_k_subgroup(spec, g, k)?;
    Ok(annihilator_of(&lat, g, spec.k()))
}

pub fn generates_full(spec: &MultFnSpec, g: &UnitGroup, k: usize) -> Result<bool> {
    let lat = t_k_subgroup(spec, g, k)?;
    let full: u128 = (g.phi as u128).pow(spec.k() as u32);
    Ok(lat.order() == full)
}

/// Characters a of prod Z/n_j with sum_j a_j x_j (m/n_j) = 0 mod m for every
/// x in the subgroup.
pub fn annihilator_of(lat: &SubgroupLattice, g: &UnitGroup, kk: usize) -> Vec<CharTuple> {
    let d = lat.dim();
    let r = g.rank();
    if d == 0 {
        return vec![CharTuple(vec![DirichletChar::trivial(g); kk])];
    }
    let m = g.exponent() as i128;
    let basis = lat.basis();
    // Unknowns: a_1..a_d, then one slack s_i per basis row:
    // sum_j y_ij a_j + m s_i = 0, y_ij = x_ij * m / n_j.
    let rows: Vec<Vec<BigInt>> = basis
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out: Vec<BigInt> = row
                .iter()
                .zip(&lat.moduli)
                .map(|(&x, &n)| BigInt::from(x * (m / n as i128)))
                .collect();
            for t in 0..d {
                out.push(BigInt::from(if t == i { m } else { 0 }));
            }
            out
        })
        .collect();
    let mat = IntMatrix::from_rows(&rows);
    let ker = integer_kernel(&mat);
    let gens: Vec<Vec<u64>> = ker
        .iter()
        .map(|v| {
            v[..d]
                .iter()
                .zip(&lat.moduli)
                .map(|(a, &n)| {
                    let n = BigInt::from(n);
                    let r = ((a % &n) + &n) % &n;
                    r.to_u64().unwrap()
                })
                .collect()
        })
        .filter(|v: &Vec<u64>| v.iter().any(|&x| x != 0))
        .collect();
    // Close the generated subgroup of prod Z/n_j by breadth-first search.
    let zero = vec![0u64; d];
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(zero.clone());
    let mut order = vec![zero];
    let mut head = 0;
    while head < order.len() {
        let cur = order[head].clone();
        head += 1;
        for gv in &gens {
            let next: Vec<u64> = cur
                .iter()
                .zip(gv)
                .zip(&lat.moduli)
                .map(|((&a, &b), &n)| (a + b) % n)
                .collect();
            if seen.insert(next.clone()) {
                order.push(next);
            }
        }
    }
    order.sort();
    order
        .into_iter()
        .map(|v| {
            CharTuple(
                (0..kk)
                    .map(|i| DirichletChar {
                        q: g.q,
                        exponents: v[i * r..(i + 1) * r].to_vec(),
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Brute-force conductor: the least d | q such that chi is 1 on units = 1 mod d.
pub fn conductor_brute(chi: &DirichletChar, g: &UnitGroup) -> u64 {
    for d in crate::arith::divisors(g.q) {
        let ok = (0..g.q / d).all(|t| {
            let u = (1 + t * d) % g.q;
            chi.value_exp(g, u).is_none_or(|e| e == 0)
        });
        if ok {
            return d;
        }
    }
    g.q
}

/// Is the CycloSum the zero element (shorthand used by callers holding histograms).
pub fn hist_is_zero(hist: &[i64], m: u64) -> bool {
    crate::cyclo::int_group_ring_is_zero(hist, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resring::unit_group;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn character_group_examples() {
        let g = unit_group(5).unwrap();
        let chars = characters_mod(&g);
        assert_eq!(chars.len(), 4);
        assert!(chars[0].is_trivial());
        assert_eq!(g.exponent(), 4);
        assert_eq!(chars.iter().map(|c| c.order(&g)).max(), Some(4));
        let g = unit_group(8).unwrap();
        let chars = characters_mod(&g);
        assert_eq!(chars.len(), 4);
        for c in &chars {
            assert!(c.order(&g) <= 2);
        }
        let g = unit_group(1).unwrap();
        assert_eq!(characters_mod(&g), vec![DirichletChar { q: 1, exponents: vec![] }]);
    }

    #[test]
    fn conductor_examples() {
        let g = unit_group(45).unwrap();
        assert_eq!(DirichletChar::trivial(&g).conductor(&g), 1);
        // Legendre symbol mod 5 lifted to 15: component order is (3, 5).
        let g = unit_group(15).unwrap();
        let chi = DirichletChar { q: 15, exponents: vec![0, 2] };
        assert_eq!(chi.conductor(&g), 5);
        // mod 8: chi(-1) = 1, chi(5) = -1
        let g = unit_group(8).unwrap();
        let chi = DirichletChar { q: 8, exponents: vec![0, 1] };
        assert_eq!(chi.conductor(&g), 8);
        assert_eq!(conductor_brute(&chi, &g), 8);
    }

    #[test]
    fn conductors_match_brute_force() {
        for q in 1..=200u64 {
            let g = unit_group(q).unwrap();
            for chi in characters_mod(&g) {
                assert_eq!(chi.conductor(&g), conductor_brute(&chi, &g), "q={q} {:?}", chi.exponents);
            }
        }
    }

    #[test]
    fn orthogonality() {
        for q in 1..=100u64 {
            let g = unit_group(q).unwrap();
            let chars = characters_mod(&g);
            let m = g.exponent();
            let units = g.units();
            for &a in &units {
                for &b in &units {
                    let mut hist = vec![0i64; m as usize];
                    for c in &chars {
                        let e = (c.value_exp(&g, a).unwrap() + m - c.value_exp(&g, b).unwrap()) % m;
                        hist[e as usize] += 1;
                    }
                    let s = CycloSum::from_int_hist(m, &hist);
                    let expect = if a == b { g.phi as i64 } else { 0 };
                    assert_eq!(s.as_rational(), Some(rat(expect)), "q={q} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn z_sum_examples() {
        let g = unit_group(5).unwrap();
        let triv = DirichletChar::trivial(&g);
        let s = z_sum(&g, &[triv], &[IntPoly::linear_root(-1)]);
        assert_eq!(s.as_rational(), Some(rat(3)));
        let legendre = DirichletChar { q: 5, exponents: vec![2] };
        // u = 2, 3 make u^2 + 1 divisible by 5; u = 1, 4 give (2/5) = -1 each.
        let s = z_sum(&g, &[legendre], &[IntPoly::from_i64s(&[1, 0, 1])]);
        assert_eq!(s.as_rational(), Some(rat(-2)));
        let g = unit_group(4).unwrap();
        let chi = DirichletChar { q: 4, exponents: vec![1] };
        assert!(z_sum(&g, &[chi], &[IntPoly::x()]).is_zero());
    }

    #[test]
    fn induced_sums_scale_by_ell_power() {
        // Z at ell^e of a character induced from ell^e0 is ell^(e - e0) Z at ell^e0.
        let corpus = [
            IntPoly::from_i64s(&[1, 1]),
            IntPoly::from_i64s(&[1, 0, 1]),
            IntPoly::from_i64s(&[2, 1, 0, 1]),
            IntPoly::from_i64s(&[-1, 3, 1]),
        ];
        for (ell, emax) in [(2u64, 5u32), (3, 5), (5, 3), (7, 2)] {
            for e in 2..=emax {
                let big = unit_group(ell.pow(e)).unwrap();
                for e0 in 1..e {
                    let small = unit_group(ell.pow(e0)).unwrap();
                    for chi0 in characters_mod(&small) {
                        // Lift: chi(u) = chi0(u mod ell^e0); find the matching big character.
                        let lifted = characters_mod(&big).into_iter().find(|c| {
                            big.units().iter().all(|&u| {
                                let a = c.value(&big, u).unwrap();
                                let b = chi0.value(&small, u % small.q).unwrap();
                                a == b
                            })
                        }).unwrap();
                        for f in &corpus {
                            let zb = z_sum(&big, &[lifted.clone()], std::slice::from_ref(f));
                            let zs = z_sum(&small, &[chi0.clone()], std::slice::from_ref(f));
                            let scale = rat(ell.pow(e - e0) as i64);
                            assert!(zb.equals(&zs.scale(&scale)), "ell^e={}^{} e0={}", ell, e, e0);
                        }
                    }
                }
            }
        }
    }

    fn brute_subgroup_order(spec: &MultFnSpec, g: &UnitGroup, k: usize) -> u64 {
        let q = g.q;
        let gens: Vec<Vec<u64>> = r_v_set(spec, q, k)
            .iter()
            .map(|&u| spec.level(k).iter().map(|f| f.to_mod(q).eval(u)).collect())
            .collect();
        let one = vec![1 % q; spec.k()];
        let mut seen = HashSet::new();
        seen.insert(one.clone());
        let mut stack = vec![one];
        while let Some(cur) = stack.pop() {
            for t in &gens {
                let next: Vec<u64> = cur.iter().zip(t).map(|(a, b)| a * b % q).collect();
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        seen.len() as u64
    }

    #[test]
    fn annihilator_examples() {
        let joint = MultFnSpec::phi_sigma(2);
        let g = unit_group(5).unwrap();
        let ann = annihilator_tuples(&joint, &g, 1).unwrap();
        assert_eq!(ann.len(), 1);
        assert!(ann[0].is_trivial());
        assert!(generates_full(&joint, &g, 1).unwrap());

        let sigma = MultFnSpec::sigma(2);
        let g = unit_group(9).unwrap();
        let ann = annihilator_tuples(&sigma, &g, 1).unwrap();
        assert_eq!(ann.len() as u64 * brute_subgroup_order(&sigma, &g, 1), g.phi);

        let g = unit_group(2).unwrap();
        let ann = annihilator_tuples(&sigma, &g, 2).unwrap();
        assert_eq!(ann.len(), 1);

        let g = unit_group(4).unwrap();
        let full = generates_full(&sigma, &g, 2).unwrap();
        assert_eq!(full, brute_subgroup_order(&sigma, &g, 2) == 2);
        assert_eq!(annihilator_tuples(&sigma, &g, 1), Err(Error::EmptyRk { q: 4, k: 1 }));

        let ident = MultFnSpec::new(
            "id",
            vec![vec![IntPoly::x()]],
            crate::resring::BeyondRule::ConstantOne,
        )
        .unwrap();
        assert!(generates_full(&ident, &unit_group(5).unwrap(), 1).unwrap());
    }

    #[test]
    fn annihilator_duality() {
        let fams = [MultFnSpec::sigma(2), MultFnSpec::phi_sigma(2), MultFnSpec::sigma_r(2, 2)];
        for q in 1..=60u64 {
            let g = unit_group(q).unwrap();
            for spec in &fams {
                for k in 1..=2 {
                    let Ok(ann) = annihilator_tuples(spec, &g, k) else {
                        continue;
                    };
                    let h = brute_subgroup_order(spec, &g, k);
                    assert_eq!(ann.len() as u64 * h, g.phi.pow(spec.k() as u32), "q={q} k={k} {}", spec.name);
                    // Every tuple really kills T_k(q).
                    for t in &ann {
                        for u in r_v_set(spec, q, k) {
                            let m = g.exponent();
                            let e: u64 = t.0.iter().zip(spec.level(k)).map(|(c, f)| c.value_exp(&g, f.to_mod(q).eval(u)).unwrap()).sum::<u64>() % m;
                            assert_eq!(e, 0);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn characters_are_multiplicative(qi in 0usize..12, ci in 0usize..1000, a in 0u64..10_000, b in 0u64..10_000) {
            let qs = [3u64, 8, 9, 16, 20, 24, 27, 35, 64, 77, 100, 180];
            let g = unit_group(qs[qi]).unwrap();
            let chars = characters_mod(&g);
            let chi = &chars[ci % chars.len()];
            let (a, b) = (a % g.q, b % g.q);
            match (chi.value(&g, a), chi.value(&g, b)) {
                (Some(x), Some(y)) => prop_assert_eq!(chi.value(&g, a * b % g.q).unwrap(), x.mul(&y)),
                _ => prop_assert!(chi.value(&g, a * b % g.q).is_none()),
            }
            prop_assert_eq!(chi.is_trivial(), (1..g.q).all(|u| chi.value_exp(&g, u).is_none_or(|e| e == 0)));
        }

        #[test]
        fn conductor_is_multiplicative(qi in 0usize..8, ci in 0usize..1000) {
            let qs = [12u64, 40, 63, 72, 99, 120, 176, 360];
            let q = qs[qi];
            let g = unit_group(q).unwrap();
            let chars = characters_mod(&g);
            let chi = &chars[ci % chars.len()];
            let mut prod = 1;
            let mut j = 0;
            for c in &g.components {
                let local = unit_group(c.modulus).unwrap();
                let n = c.local_gens.len();
                let lc = DirichletChar { q: c.modulus, exponents: chi.exponents[j..j + n].to_vec() };
                j += n;
                prod *= lc.conductor(&local);
            }
            prop_assert_eq!(chi.conductor(&g), prod);
        }
    }
}
