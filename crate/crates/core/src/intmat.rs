//! Integer matrices and the Smith normal form.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd};
use crate::error::Result;
use crate::intpoly::{coprime_basis, IntPoly};

#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix");
        IntMatrix {
            rows: r,
            cols: c,
            entries: rows.iter().flatten().cloned().map(Into::into).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| self.entries[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    out[(i, j)] += a * &o[(k, j)];
                }
            }
        }
        out
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(swap) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, swap);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * a[(n - 1, n - 1)].clone()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.entries.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = &self[(src, j)] * k;
            self[(dst, j)] += v;
        }
    }

    fn add_col(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = &self[(i, src)] * k;
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -&self[(r, j)];
            self[(r, j)] = v;
        }
    }

    pub fn rank(&self) -> usize {
        smith_normal_form(self)
            .invariant_factors
            .iter()
            .filter(|b| !b.is_zero())
            .count()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>())
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<i64>> = self
            .to_rows()
            .iter()
            .map(|r| r.iter().map(|x| x.to_i64().unwrap_or(i64::MAX)).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<i64>> = Vec::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(IntMatrix::from_rows(&rows))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SnfResult {
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub d: IntMatrix,
    #[serde(serialize_with = "crate::intpoly::big_vec::serialize")]
    pub invariant_factors: Vec<BigInt>,
}

/// Smith normal form U*A*V = D with unimodular U, V and a divisibility chain
/// on the diagonal of D.
pub fn smith_normal_form(a: &IntMatrix) -> SnfResult {
    let (m, n) = (a.rows, a.cols);
    let mut d = a.clone();
    let mut u = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);
    let r = m.min(n);

    for t in 0..r {
        loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let mut best: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    let x = &d[(i, j)];
                    if x.is_zero() {
                        continue;
                    }
                    if best.is_none_or(|(bi, bj)| x.abs() < d[(bi, bj)].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                break;
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let mut clean = true;
            for i in t + 1..m {
                if d[(i, t)].is_zero() {
                    continue;
                }
                let q = -d[(i, t)].div_floor(&d[(t, t)]);
                d.add_row(i, t, &q);
                u.add_row(i, t, &q);
                if !d[(i, t)].is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..n {
                if d[(t, j)].is_zero() {
                    continue;
                }
                let q = -d[(t, j)].div_floor(&d[(t, t)]);
                d.add_col(j, t, &q);
                v.add_col(j, t, &q);
                if !d[(t, j)].is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // Enforce divisibility by folding an offending row into row t.
            let piv = d[(t, t)].clone();
            let offender = (t + 1..m)
                .flat_map(|i| (t + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| !(&d[(i, j)] % &piv).is_zero());
            match offender {
                Some((i, _)) => {
                    d.add_row(t, i, &BigInt::one());
                    u.add_row(t, i, &BigInt::one());
                }
                None => break,
            }
        }
        if d[(t, t)].is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    let invariant_factors = (0..r).map(|i| d[(i, i)].clone()).collect();
    SnfResult {
        u,
        v,
        d,
        invariant_factors,
    }
}

/// The exponent matrix: one row per basis element, one column per input.
pub fn exponent_matrix(fs: &[IntPoly]) -> Result<IntMatrix> {
    let dec = coprime_basis(fs)?;
    Ok(IntMatrix::from_rows(&dec.exponents))
}

/// Last invariant factor of the exponent matrix, with a flag that is set
/// when the family is multiplicatively dependent (and the value is 0).
pub fn beta(fs: &[IntPoly]) -> Result<(BigInt, bool)> {
    let e = exponent_matrix(fs)?;
    let snf = smith_normal_form(&e);
    let last = snf.invariant_factors.last().cloned().unwrap_or_else(BigInt::zero);
    let rank = snf.invariant_factors.iter().filter(|b| !b.is_zero()).count();
    let dependent = rank < fs.len();
    if dependent {
        Ok((BigInt::zero(), true))
    } else {
        Ok((last, false))
    }
}

pub fn is_mult_independent(fs: &[IntPoly]) -> Result<bool> {
    Ok(exponent_matrix(fs)?.rank() == fs.len())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IfhOutcome {
    pub holds: bool,
    pub witness: Option<u64>,
    pub beta: i64,
}

/// Invariant Factor Hypothesis: gcd(l - 1, beta) = 1 for every prime l | q
/// with l > b0. A dependent family has beta = 0, so every such l is a witness.
pub fn ifh_check(q: u64, fs: &[IntPoly], b0: f64) -> Result<IfhOutcome> {
    let (b, _) = beta(fs)?;
    let b_small = b.to_u64();
    for (ell, _) in factorize(q) {
        if (ell as f64) <= b0 {
            continue;
        }
        let g = match b_small {
            Some(0) => ell - 1,
            Some(bv) => gcd(ell - 1, bv),
            None => (&b % BigInt::from(ell - 1)).to_u64().map_or(1, |r| gcd(ell - 1, r)),
        };
        if g != 1 {
            return Ok(IfhOutcome {
                holds: false,
                witness: Some(ell),
                beta: b.to_i64().unwrap_or(i64::MAX),
            });
        }
    }
    Ok(IfhOutcome {
        holds: true,
        witness: None,
        beta: b.to_i64().unwrap_or(i64::MAX),
    })
}

/// Integer kernel basis of a matrix acting on column vectors: the columns of
/// V past the rank.
pub fn integer_kernel(a: &IntMatrix) -> Vec<Vec<BigInt>> {
    let snf = smith_normal_form(a);
    let rank = snf.invariant_factors.iter().filter(|b| !b.is_zero()).count();
    (rank..a.cols)
        .map(|j| (0..a.cols).map(|i| snf.v[(i, j)].clone()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn check_snf(a: &IntMatrix) -> SnfResult {
        let s = smith_normal_form(a);
        assert_eq!(s.u.mul(a).mul(&s.v), s.d);
        assert_eq!(s.u.det().abs(), BigInt::one());
        assert_eq!(s.v.det().abs(), BigInt::one());
        for i in 0..a.rows {
            for j in 0..a.cols {
                if i != j {
                    assert!(s.d[(i, j)].is_zero());
                }
            }
        }
        for w in s.invariant_factors.windows(2) {
            assert!(if w[0].is_zero() { w[1].is_zero() } else { (&w[1] % &w[0]).is_zero() });
        }
        s
    }

    #[test]
    fn snf_examples() {
        let s = check_snf(&IntMatrix::from_rows(&[vec![2i64, 0], vec![0, 3]]));
        assert_eq!(s.invariant_factors, ints(&[1, 6]));
        let s = check_snf(&IntMatrix::from_rows(&[vec![1i64], vec![1]]));
        assert_eq!(s.invariant_factors, ints(&[1]));
        let s = check_snf(&IntMatrix::zeros(2, 2));
        assert_eq!(s.invariant_factors, ints(&[0, 0]));
    }

    fn lin(a: i64) -> IntPoly {
        IntPoly::linear_root(a)
    }

    #[test]
    fn exponent_matrix_examples() {
        let e = exponent_matrix(&[lin(1), lin(1).pow(2)]).unwrap();
        assert_eq!(e, IntMatrix::from_rows(&[vec![1i64, 2]]));
        let e = exponent_matrix(&[lin(1), lin(-1), &lin(1) * &lin(-1)]).unwrap();
        assert_eq!(e, IntMatrix::from_rows(&[vec![1i64, 0, 1], vec![0, 1, 1]]));
        let e = exponent_matrix(&[lin(7).pow(3)]).unwrap();
        assert_eq!(e, IntMatrix::from_rows(&[vec![3i64]]));
    }

    #[test]
    fn beta_examples() {
        let fam = [lin(1), lin(2), lin(3).pow(2)];
        assert_eq!(beta(&fam).unwrap(), (BigInt::from(2), false));
        assert_eq!(beta(&[lin(1), lin(-1)]).unwrap(), (BigInt::one(), false));
        assert_eq!(
            beta(&[IntPoly::from_i64s(&[-1, 0, 1])]).unwrap(),
            (BigInt::one(), false)
        );
        assert_eq!(beta(&[lin(1), lin(1).pow(2)]).unwrap(), (BigInt::zero(), true));
    }

    #[test]
    fn independence_examples() {
        assert!(is_mult_independent(&[lin(1), lin(-1)]).unwrap());
        assert!(!is_mult_independent(&[lin(1), lin(1).pow(2)]).unwrap());
        assert!(!is_mult_independent(&[&lin(1) * &lin(-1), lin(1), lin(-1)]).unwrap());
    }

    #[test]
    fn ifh_examples() {
        let ok = ifh_check(1001, &[lin(1), lin(-1)], 1.0).unwrap();
        assert!(ok.holds);
        let fam = [lin(1), lin(2), lin(3).pow(2)];
        let r = ifh_check(7, &fam, 1.0).unwrap();
        assert_eq!((r.holds, r.witness), (false, Some(7)));
        let r = ifh_check(5, &fam, 1.0).unwrap();
        assert_eq!((r.holds, r.witness), (false, Some(5)));
        // Primes at or below B0 are ignored.
        assert!(ifh_check(5, &fam, 5.0).unwrap().holds);
        assert_eq!(ifh_check(5, &[IntPoly::from_i64s(&[3])], 1.0), Err(Error::ConstantInput));
    }

    fn minors_gcd(a: &IntMatrix, j: usize) -> BigInt {
        fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for first in 0..n {
                for mut rest in combos(n, k - 1) {
                    if rest.first().is_none_or(|&r| r > first) {
                        rest.insert(0, first);
                        out.push(rest);
                    }
                }
            }
            out
        }
        let mut g = BigInt::zero();
        for rs in combos(a.rows, j) {
            for cs in combos(a.cols, j) {
                let mut sub = IntMatrix::zeros(j, j);
                for (x, &r) in rs.iter().enumerate() {
                    for (y, &c) in cs.iter().enumerate() {
                        sub[(x, y)] = a[(r, c)].clone();
                    }
                }
                g = g.gcd(&sub.det());
            }
        }
        g
    }

    fn matrix(max: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
        (1..=max, 1..=max).prop_flat_map(move |(r, c)| {
            prop::collection::vec(prop::collection::vec(-bound..=bound, c), r)
                .prop_map(|rows| IntMatrix::from_rows(&rows))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn snf_round_trip(a in matrix(8, 50)) {
            check_snf(&a);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn invariant_factors_are_minor_gcds(rows in prop::collection::vec(prop::collection::vec(-9i64..=9, 4), 4)) {
            let a = IntMatrix::from_rows(&rows);
            let s = smith_normal_form(&a);
            let mut prod = BigInt::one();
            for j in 1..=4 {
                prod *= &s.invariant_factors[j - 1];
                prop_assert_eq!(prod.abs(), minors_gcd(&a, j));
            }
        }

        #[test]
        fn row_duplication_invariance(a in matrix(5, 20), pick in 0usize..5) {
            let mut rows: Vec<Vec<BigInt>> = a.to_rows();
            let dup = rows[pick % rows.len()].clone();
            rows.push(dup);
            let b = IntMatrix::from_rows(&rows);
            let nz = |m: &IntMatrix| smith_normal_form(m).invariant_factors.into_iter().filter(|x| !x.is_zero()).collect::<Vec<_>>();
            prop_assert_eq!(a.rank(), b.rank());
            prop_assert_eq!(nz(&a), nz(&b));
        }

        #[test]
        fn separable_products_have_beta_one(roots in prop::collection::btree_set(-6i64..6, 1..5), split in 1usize..4) {
            let roots: Vec<i64> = roots.into_iter().collect();
            let k = split.min(roots.len());
            // Partition distinct linear factors into k nonempty groups.
            let mut fs = vec![IntPoly::one(); k];
            for (i, r) in roots.iter().enumerate() {
                fs[i % k] = &fs[i % k] * &lin(*r);
            }
            prop_assert_eq!(beta(&fs).unwrap(), (BigInt::one(), false));
        }
    }
}
