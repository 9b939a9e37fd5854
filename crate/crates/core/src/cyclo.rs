//! Exact arithmetic with roots of unity: single roots e^{2 pi i a/d}, and
//! rational combinations of m-th roots of unity, i.e. elements of Q(zeta_m)
//! written in the group-ring basis.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::arith::{divisors, gcd, lcm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    pub num: u64,
    pub den: u64,
}

impl RootOfUnity {
    pub fn new(num: i64, den: u64) -> Self {
        assert!(den > 0);
        let n = num.rem_euclid(den as i64) as u64;
        let g = gcd(n, den);
        RootOfUnity {
            num: n / g,
            den: den / g,
        }
    }

    pub fn one() -> Self {
        RootOfUnity { num: 0, den: 1 }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = lcm(self.den, o.den);
        let a = self.num * (d / self.den) + o.num * (d / o.den);
        RootOfUnity::new((a % d) as i64, d)
    }

    pub fn conj(&self) -> Self {
        RootOfUnity::new(-(self.num as i64), self.den)
    }

    pub fn pow(&self, e: u64) -> Self {
        RootOfUnity::new(((self.num as u128 * e as u128) % self.den as u128) as i64, self.den)
    }

    pub fn is_one(&self) -> bool {
        self.num == 0
    }

    pub fn to_c64(&self) -> (f64, f64) {
        let t = std::f64::consts::TAU * self.num as f64 / self.den as f64;
        (t.cos(), t.sin())
    }
}

fn cyclotomic_cache() -> &'static RwLock<HashMap<u64, Arc<Vec<i64>>>> {
    static C: OnceLock<RwLock<HashMap<u64, Arc<Vec<i64>>>>> = OnceLock::new();
    C.get_or_init(|| RwLock::new(HashMap::new()))
}

fn mobius(n: u64) -> i64 {
    let f = crate::arith::factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Coefficients of the m-th cyclotomic polynomial, constant term first.
pub fn cyclotomic_poly(m: u64) -> Arc<Vec<i64>> {
    if let Some(c) = cyclotomic_cache().read().unwrap().get(&m) {
        return c.clone();
    }
    // Phi_m = prod_{d | m} (x^d - 1)^{mu(m/d)}: multiply the positive factors,
    // then divide out the negative ones.
    let mut p: Vec<i64> = vec![1];
    let mut divide = Vec::new();
    for d in divisors(m) {
        match mobius(m / d) {
            1 => {
                let mut next = vec![0i64; p.len() + d as usize];
                for (i, &c) in p.iter().enumerate() {
                    next[i + d as usize] += c;
                    next[i] -= c;
                }
                p = next;
            }
            -1 => divide.push(d as usize),
            _ => {}
        }
    }
    for d in divide {
        // Divide by x^d - 1: q_i = q_{i-d} - p_i read from the top.
        let n = p.len() - 1;
        let mut q = vec![0i64; n - d + 1];
        let mut r = p.clone();
        for i in (d..=n).rev() {
            let c = r[i];
            q[i - d] = c;
            r[i] = 0;
            r[i - d] += c;
        }
        debug_assert!(r.iter().all(|&x| x == 0));
        p = q;
    }
    let arc = Arc::new(p);
    cyclotomic_cache().write().unwrap().insert(m, arc.clone());
    arc
}

/// Reduce an integer vector indexed by exponent mod m modulo Phi_m; the
/// result has length phi(m).
pub fn reduce_mod_cyclotomic(coeffs: &[BigInt], m: u64) -> Vec<BigInt> {
    let phi = cyclotomic_poly(m);
    let deg = phi.len() - 1;
    let mut r: Vec<BigInt> = coeffs.to_vec();
    let nz: Vec<(usize, i64)> = phi[..deg]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect();
    for i in (deg..r.len()).rev() {
        if r[i].is_zero() {
            continue;
        }
        let c = std::mem::take(&mut r[i]);
        for &(j, pc) in &nz {
            r[i - deg + j] -= &c * pc;
        }
    }
    r.truncate(deg);
    r.resize(deg, BigInt::zero());
    r
}

/// Same as `reduce_mod_cyclotomic` on machine integers; `None` on overflow.
pub fn reduce_mod_cyclotomic_i64(coeffs: &[i64], m: u64) -> Option<Vec<i64>> {
    let phi = cyclotomic_poly(m);
    let deg = phi.len() - 1;
    let mut r: Vec<i64> = coeffs.to_vec();
    let nz: Vec<(usize, i64)> = phi[..deg]
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(i, &c)| (i, c))
        .collect();
    for i in (deg..r.len()).rev() {
        let c = r[i];
        if c == 0 {
            continue;
        }
        r[i] = 0;
        for &(j, pc) in &nz {
            let t = c.checked_mul(pc)?;
            r[i - deg + j] = r[i - deg + j].checked_sub(t)?;
        }
    }
    r.truncate(deg);
    r.resize(deg, 0);
    Some(r)
}

/// Exact zero test for sum_e c_e zeta_m^e with integer c_e.
///
/// Z[zeta_m] is the tensor product of the Z[zeta_{p^a}] over p^a || m, so the
/// coefficient array is laid out on CRT axes and each axis is reduced
/// modulo Phi_{p^a} in place, which costs O(m) per prime factor.
pub fn int_group_ring_is_zero(coeffs: &[i64], m: u64) -> bool {
    let m = m as usize;
    assert!(coeffs.len() <= m);
    if m == 1 {
        return coeffs.iter().sum::<i64>() == 0;
    }
    let axes: Vec<usize> = crate::arith::factorize(m as u64)
        .into_iter()
        .map(|(p, a)| (p as usize).pow(a))
        .collect();
    // Mixed-radix layout: index = sum_i r_i * stride_i with r_i = e mod axes[i].
    let mut strides = vec![1usize; axes.len()];
    for i in 1..axes.len() {
        strides[i] = strides[i - 1] * axes[i - 1];
    }
    let mut a = vec![0i128; m];
    for (e, &c) in coeffs.iter().enumerate() {
        let idx: usize = axes.iter().zip(&strides).map(|(&n, &st)| (e % n) * st).sum();
        a[idx] += c as i128;
    }
    for (&n, &st) in axes.iter().zip(&strides) {
        let p = crate::arith::factorize(n as u64)[0].0 as usize;
        let block = n / p;
        // zeta^{r + (p-1) block} = -sum_{s < p-1} zeta^{r + s block}
        for base in 0..m {
            if (base / st) % n != 0 {
                continue;
            }
            for r in 0..block {
                let top = a[base + (r + (p - 1) * block) * st];
                if top != 0 {
                    for s in 0..p - 1 {
                        a[base + (r + s * block) * st] -= top;
                    }
                    a[base + (r + (p - 1) * block) * st] = 0;
                }
            }
        }
    }
    a.iter().all(|&x| x == 0)
}

/// sum_e coeffs[e] * zeta_m^e with rational coefficients.
#[derive(Clone, Debug)]
pub struct CycloSum {
    order: u64,
    coeffs: Vec<BigRational>,
}

impl CycloSum {
    pub fn zero(order: u64) -> Self {
        assert!(order > 0);
        CycloSum {
            order,
            coeffs: vec![BigRational::zero(); order as usize],
        }
    }

    pub fn from_rational(order: u64, r: BigRational) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = r;
        s
    }

    pub fn root(order: u64, e: u64) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[(e % order) as usize] = BigRational::one();
        s
    }

    pub fn from_int_hist(order: u64, hist: &[i64]) -> Self {
        assert_eq!(hist.len() as u64, order);
        CycloSum {
            order,
            coeffs: hist.iter().map(|&c| BigRational::from_integer(c.into())).collect(),
        }
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn coeff(&self, e: u64) -> &BigRational {
        &self.coeffs[(e % self.order) as usize]
    }

    /// Re-express in the group ring of order a multiple of the current one.
    pub fn lift(&self, order: u64) -> Self {
        assert_eq!(order % self.order, 0);
        let s = order / self.order;
        let mut out = Self::zero(order);
        for (e, c) in self.coeffs.iter().enumerate() {
            out.coeffs[e * s as usize] = c.clone();
        }
        out
    }

    fn common(&self, o: &Self) -> (Self, Self) {
        let m = lcm(self.order, o.order);
        (self.lift(m), o.lift(m))
    }

    pub fn add(&self, o: &Self) -> Self {
        let (mut a, b) = self.common(o);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs) {
            *x += y;
        }
        a
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-BigRational::one()))
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        CycloSum {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * r).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = self.common(o);
        let m = a.order as usize;
        let mut out = Self::zero(a.order);
        for (i, x) in a.coeffs.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.coeffs.iter().enumerate() {
                if !y.is_zero() {
                    out.coeffs[(i + j) % m] += x * y;
                }
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let m = self.order as usize;
        let mut out = Self::zero(self.order);
        for (e, c) in self.coeffs.iter().enumerate() {
            out.coeffs[(m - e) % m] = c.clone();
        }
        out
    }

    /// Canonical coordinates in the power basis 1, zeta, ..., zeta^{phi(m)-1}.
    pub fn canonical(&self) -> Vec<BigRational> {
        let den = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * BigRational::from_integer(den.clone())).to_integer())
            .collect();
        reduce_mod_cyclotomic(&ints, self.order)
            .into_iter()
            .map(|x| BigRational::new(x, den.clone()))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        if self.coeffs.iter().all(|c| c.is_zero()) {
            return true;
        }
        self.canonical().iter().all(|c| c.is_zero())
    }

    pub fn equals(&self, o: &Self) -> bool {
        self.sub(o).is_zero()
    }

    /// The element as a rational number, if it is one.
    pub fn as_rational(&self) -> Option<BigRational> {
        let c = self.canonical();
        c[1..].iter().all(|x| x.is_zero()).then(|| c[0].clone())
    }

    pub fn to_c64(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (e, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = c.to_f64().unwrap_or(f64::NAN);
            let t = std::f64::consts::TAU * e as f64 / self.order as f64;
            re += v * t.cos();
            im += v * t.sin();
        }
        (re, im)
    }

    pub fn abs_f64(&self) -> f64 {
        let (re, im) = self.to_c64();
        re.hypot(im)
    }

    /// Sum of |coefficients|, an a-priori bound on the absolute value.
    pub fn l1(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .sum()
    }
}

impl PartialEq for CycloSum {
    fn eq(&self, other: &Self) -> bool {
        self.equals(other)
    }
}

impl Serialize for CycloSum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<(u64, String, String)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| (e as u64, c.numer().to_string(), c.denom().to_string()))
            .collect();
        let mut st = s.serialize_struct("CycloSum", 2)?;
        st.serialize_field("order", &self.order)?;
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn cyclotomic_polys() {
        assert_eq!(*cyclotomic_poly(1), vec![-1, 1]);
        assert_eq!(*cyclotomic_poly(4), vec![1, 0, 1]);
        assert_eq!(*cyclotomic_poly(6), vec![1, -1, 1]);
        assert_eq!(*cyclotomic_poly(12), vec![1, 0, -1, 0, 1]);
        let p105 = cyclotomic_poly(105);
        assert_eq!(p105.len() - 1, 48);
        assert_eq!(p105[7], -2);
    }

    #[test]
    fn roots_of_unity_multiply_over_lcm() {
        let a = RootOfUnity::new(1, 4);
        let b = RootOfUnity::new(1, 6);
        assert_eq!(a.mul(&b), RootOfUnity::new(5, 12));
        assert_eq!(a.pow(4), RootOfUnity::one());
        assert_eq!(RootOfUnity::new(2, 4), RootOfUnity::new(1, 2));
        assert!(a.mul(&a.conj()).is_one());
    }

    #[test]
    fn zero_tests_are_exact() {
        // 1 + zeta_3 + zeta_3^2 = 0
        let mut s = CycloSum::zero(3);
        for e in 0..3 {
            s = s.add(&CycloSum::root(3, e));
        }
        assert!(s.is_zero());
        // zeta_4^2 = -1 in order 4, compared with order 2.
        assert!(CycloSum::root(4, 2).equals(&CycloSum::from_rational(2, r(-1, 1))));
        assert!(!CycloSum::root(5, 1).is_zero());
        // sum of primitive 6th roots is 1
        let s = CycloSum::root(6, 1).add(&CycloSum::root(6, 5));
        assert_eq!(s.as_rational(), Some(r(1, 1)));
        assert!(int_group_ring_is_zero(&[1, 1, 1, 1, 1], 5));
        assert!(!int_group_ring_is_zero(&[1, 1, 1, 1, 0], 5));
        // 1 + zeta_6^2 + zeta_6^4 = 0, zeta_6^0 + zeta_6^3 = 0
        assert!(int_group_ring_is_zero(&[1, 0, 1, 0, 1, 0], 6));
        assert!(int_group_ring_is_zero(&[1, 0, 0, 1], 6));
        assert!(!int_group_ring_is_zero(&[1, 1], 6));
        for m in 1..=60u64 {
            let mut x: u64 = m * 7919;
            for _ in 0..20 {
                let c: Vec<i64> = (0..m)
                    .map(|_| {
                        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((x >> 60) as i64) - 8
                    })
                    .collect();
                let slow = reduce_mod_cyclotomic_i64(&c, m).unwrap().iter().all(|&v| v == 0);
                assert_eq!(int_group_ring_is_zero(&c, m), slow, "m={m} {c:?}");
                // force a zero element: c - c*zeta^(m/p) summed over the p-cycle
                let p = crate::arith::factorize(m).first().map(|f| f.0).unwrap_or(1);
                let mut z = vec![0i64; m as usize];
                for s in 0..p {
                    z[((s * (m / p)) % m) as usize] += 1;
                }
                if m > 1 {
                    assert!(int_group_ring_is_zero(&z, m));
                }
            }
        }
    }

    #[test]
    fn norms() {
        // |1 + i|^2 = 2
        let s = CycloSum::from_rational(4, r(1, 1)).add(&CycloSum::root(4, 1));
        assert_eq!(s.mul(&s.conj()).as_rational(), Some(r(2, 1)));
        assert!((s.abs_f64() - 2f64.sqrt()).abs() < 1e-12);
    }
}
