//! Dense univariate polynomials with arbitrary-precision integer coefficients.
//!
//! Coefficients are stored constant term first with no trailing zeros, so
//! the zero polynomial is the empty vector. Gcds over the rationals are taken
//! on primitive parts with a primitive pseudo-remainder sequence, which keeps
//! every intermediate in exact integer arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64s(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        Self::new(vec![c])
    }

    /// The indeterminate T.
    pub fn x() -> Self {
        Self::from_i64s(&[0, 1])
    }

    /// c * T^d
    pub fn monomial(c: BigInt, d: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); d];
        coeffs.push(c);
        Self::new(coeffs)
    }

    /// T - a
    pub fn linear_root(a: i64) -> Self {
        Self::from_i64s(&[-a, 1])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = IntPoly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    /// Composition self(other(T)).
    pub fn compose(&self, other: &IntPoly) -> Self {
        let mut acc = IntPoly::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * other) + &IntPoly::constant(c.clone());
        }
        acc
    }

    /// Non-negative gcd of the coefficients; zero for the zero polynomial.
    pub fn content(&self) -> BigInt {
        self.coeffs
            .iter()
            .fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// self / content, normalized to a positive leading coefficient.
    pub fn primitive_part(&self) -> Self {
        if self.is_zero() {
            return IntPoly::zero();
        }
        let mut c = self.content();
        if self.leading().is_negative() {
            c = -c;
        }
        Self::new(self.coeffs.iter().map(|a| a / &c).collect())
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// p(x) mod m for arbitrary integer x.
    pub fn eval_mod(&self, x: &BigInt, m: u64) -> u64 {
        if m == 1 {
            return 0;
        }
        let mb = BigInt::from(m);
        let xr = x.mod_floor(&mb).to_u64().unwrap_or(0);
        self.to_mod(m).eval(xr)
    }

    /// Reduce the coefficients modulo m for fast repeated evaluation.
    pub fn to_mod(&self, m: u64) -> ModPoly {
        let mb = BigInt::from(m);
        ModPoly {
            m,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.mod_floor(&mb).to_u64().unwrap_or(0))
                .collect(),
        }
    }

    /// The largest e with ell^e dividing every coefficient; `None` stands for
    /// infinity (the zero polynomial).
    pub fn ord_ell(&self, ell: u64) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        let l = BigInt::from(ell);
        let mut best = u32::MAX;
        for c in self.coeffs.iter().filter(|c| !c.is_zero()) {
            let mut v = 0u32;
            let mut c = c.clone();
            while (&c % &l).is_zero() {
                c /= &l;
                v += 1;
                if v >= best {
                    break;
                }
            }
            best = best.min(v);
        }
        Some(best)
    }

    /// Pseudo-remainder: lc(b)^(deg a - deg b + 1) * a mod b.
    pub fn pseudo_rem(&self, b: &IntPoly) -> IntPoly {
        assert!(!b.is_zero(), "pseudo-division by zero");
        let db = b.degree().unwrap();
        let lb = b.leading();
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            let lr = r.leading();
            let shifted = IntPoly::monomial(lr, dr - db);
            r = &r.scale(&lb) - &(&shifted * b);
        }
        r
    }

    /// Exact quotient self / b in Z[T], if b divides self there.
    pub fn div_exact(&self, b: &IntPoly) -> Option<IntPoly> {
        if b.is_zero() {
            return None;
        }
        let db = b.degree().unwrap();
        let lb = b.leading();
        let mut r = self.clone();
        let mut q = vec![BigInt::zero(); self.coeffs.len().saturating_sub(db).max(1)];
        while let Some(dr) = r.degree() {
            if dr < db {
                return None;
            }
            let (qc, rem) = r.leading().div_rem(&lb);
            if !rem.is_zero() {
                return None;
            }
            q[dr - db] = qc.clone();
            r = &r - &(&IntPoly::monomial(qc, dr - db) * b);
        }
        Some(IntPoly::new(q))
    }

    /// Monic-up-to-content gcd over Q: primitive, positive leading coefficient.
    /// gcd(0, 0) = 0.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        let mut a = self.primitive_part();
        let mut b = other.primitive_part();
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = r.primitive_part();
        }
        a.primitive_part()
    }

    /// Squarefree decomposition over Q: primitive pairwise coprime
    /// squarefree factors with their multiplicities, constants dropped.
    pub fn squarefree_decomposition(&self) -> Vec<(IntPoly, u32)> {
        if self.is_constant() {
            return Vec::new();
        }
        squarefree_by_repeated_gcd(self)
    }

    pub fn is_squarefree(&self) -> bool {
        !self.is_constant() && self.gcd(&self.derivative()).is_constant()
    }

    /// True when every complex root has multiplicity at least two.
    pub fn is_squarefull(&self) -> Result<bool> {
        if self.is_constant() {
            return Err(Error::ConstantInput);
        }
        // The squarefree part must divide gcd(p, p'), up to constants.
        let g = self.gcd(&self.derivative());
        let sqf = self.primitive_part().div_exact(&g).expect("gcd divides");
        Ok(sqf.gcd(&g).degree() == sqf.degree())
    }
}

/// Squarefree decomposition by the classic repeated-gcd scheme, where
/// factor_i is the product of irreducibles of multiplicity exactly i.
fn squarefree_by_repeated_gcd(f: &IntPoly) -> Vec<(IntPoly, u32)> {
    let mut out = Vec::new();
    // w_i = product of irreducibles with multiplicity >= i.
    let mut current = f.primitive_part();
    let mut ws: Vec<IntPoly> = Vec::new();
    while !current.is_constant() {
        let g = current.gcd(&current.derivative());
        let w = current.div_exact(&g).expect("gcd divides").primitive_part();
        ws.push(w);
        current = g;
    }
    for i in 0..ws.len() {
        let next = ws.get(i + 1).cloned().unwrap_or_else(IntPoly::one);
        let a = ws[i].div_exact(&next).expect("nested radicals divide").primitive_part();
        if !a.is_constant() {
            out.push((a, (i + 1) as u32));
        }
    }
    out
}

impl Add for &IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: &IntPoly) -> IntPoly {
        if self.is_zero() || rhs.is_zero() {
            return IntPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::new(out)
    }
}

impl Neg for &IntPoly {
    type Output = IntPoly;
    fn neg(self) -> IntPoly {
        IntPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for IntPoly {
            type Output = IntPoly;
            fn $m(self, rhs: IntPoly) -> IntPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl PartialOrd for IntPoly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Degree first, then coefficients from the top down.
impl Ord for IntPoly {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coeffs
            .len()
            .cmp(&other.coeffs.len())
            .then_with(|| self.coeffs.iter().rev().cmp(other.coeffs.iter().rev()))
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let show_coeff = !a.is_one() || i == 0;
            if show_coeff {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "T")?,
                _ => write!(f, "T^{i}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntPoly({self})")
    }
}

impl Serialize for IntPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.coeffs.len()))?;
        for c in &self.coeffs {
            match c.to_i64() {
                Some(v) => seq.serialize_element(&v)?,
                None => seq.serialize_element(&c.to_string())?,
            }
        }
        seq.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoeffRepr {
    Int(i64),
    Str(String),
}

impl<'de> Deserialize<'de> for IntPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<CoeffRepr> = Vec::deserialize(d)?;
        let mut coeffs = Vec::with_capacity(raw.len());
        for c in raw {
            coeffs.push(match c {
                CoeffRepr::Int(v) => BigInt::from(v),
                CoeffRepr::Str(s) => s.parse::<BigInt>().map_err(serde::de::Error::custom)?,
            });
        }
        Ok(IntPoly::new(coeffs))
    }
}

/// Integers as JSON numbers when they fit in i64, decimal strings otherwise.
pub mod big_vec {
    use super::CoeffRepr;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| match c.to_i64() {
                Some(x) => serde_json::Value::from(x),
                None => serde_json::Value::from(c.to_string()),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<CoeffRepr>::deserialize(d)?
            .into_iter()
            .map(|c| match c {
                CoeffRepr::Int(v) => Ok(BigInt::from(v)),
                CoeffRepr::Str(s) => s.parse::<BigInt>().map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

/// A polynomial with coefficients reduced modulo m.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModPoly {
    pub m: u64,
    pub coeffs: Vec<u64>,
}

impl ModPoly {
    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        let m = self.m as u128;
        let x = x as u128 % m;
        let mut acc: u128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = (acc * x + c as u128) % m;
        }
        acc as u64
    }
}

/// Gcd-free basis of a family: F_i = contents[i] * prod_j basis[j]^exponents[j][i].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoprimeBasisDecomposition {
    pub basis: Vec<IntPoly>,
    /// One row per basis element, one column per input polynomial.
    pub exponents: Vec<Vec<u32>>,
    #[serde(with = "big_vec")]
    pub contents: Vec<BigInt>,
}

impl CoprimeBasisDecomposition {
    /// Multiply out column i.
    pub fn reconstruct(&self, i: usize) -> IntPoly {
        let mut acc = IntPoly::constant(self.contents[i].clone());
        for (j, b) in self.basis.iter().enumerate() {
            acc = &acc * &b.pow(self.exponents[j][i]);
        }
        acc
    }
}

/// Refine the squarefree parts of `fs` into pairwise coprime primitive
/// squarefree polynomials, and record each input's exponent on each of them.
pub fn coprime_basis(fs: &[IntPoly]) -> Result<CoprimeBasisDecomposition> {
    if fs.iter().any(|f| f.is_constant()) {
        return Err(Error::ConstantInput);
    }
    let mut pool: Vec<IntPoly> = Vec::new();
    for f in fs {
        for (g, _) in f.squarefree_decomposition() {
            pool.push(g);
        }
    }
    // Split any pair with a common factor until the pool is pairwise coprime.
    'outer: loop {
        for i in 0..pool.len() {
            for j in (i + 1)..pool.len() {
                let g = pool[i].gcd(&pool[j]);
                if g.is_constant() {
                    continue;
                }
                let a = pool[i].div_exact(&g).expect("gcd divides").primitive_part();
                let b = pool[j].div_exact(&g).expect("gcd divides").primitive_part();
                pool.remove(j);
                pool.remove(i);
                for p in [a, b, g] {
                    if !p.is_constant() {
                        pool.push(p);
                    }
                }
                continue 'outer;
            }
        }
        break;
    }
    pool.sort();
    pool.dedup();

    let mut exponents = vec![vec![0u32; fs.len()]; pool.len()];
    let mut contents = Vec::with_capacity(fs.len());
    for (i, f) in fs.iter().enumerate() {
        let mut rest = f.clone();
        for (j, b) in pool.iter().enumerate() {
            while let Some(q) = rest.div_exact(b) {
                rest = q;
                exponents[j][i] += 1;
            }
        }
        debug_assert!(rest.is_constant());
        contents.push(rest.leading());
    }
    Ok(CoprimeBasisDecomposition {
        basis: pool,
        exponents,
        contents,
    })
}
