//! The unit group (Z/qZ)^x, families of polynomially defined multiplicative
//! functions, and the residue sets R_v(q) they determine.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{crt, euler_phi, factorize, gcd, pow_mod, primitive_root_odd_prime_power};
use crate::error::{Error, Result};
use crate::intpoly::IntPoly;

pub const MAX_MODULUS: u64 = 10_000_000;

/// One cyclic-or-(C2 x C2^k) factor of the unit group, for the prime power ell^e.
#[derive(Clone, Debug)]
pub struct Component {
    pub ell: u64,
    pub e: u32,
    pub modulus: u64,
    /// Generators as residues mod ell^e.
    pub local_gens: Vec<u64>,
    pub orders: Vec<u64>,
    /// residue mod ell^e -> packed exponent vector, u32::MAX on non-units.
    dlog: Vec<u32>,
}

impl Component {
    fn build(ell: u64, e: u32) -> Self {
        let modulus = ell.pow(e);
        let mut dlog = vec![u32::MAX; modulus as usize];
        let (local_gens, orders) = if ell != 2 {
            let g = primitive_root_odd_prime_power(ell, e);
            let n = modulus / ell * (ell - 1);
            let mut x = 1u64;
            for k in 0..n {
                dlog[x as usize] = k as u32;
                x = x * g % modulus;
            }
            (vec![g], vec![n])
        } else if e == 1 {
            dlog[1] = 0;
            (vec![], vec![])
        } else if e == 2 {
            dlog[1] = 0;
            dlog[3] = 1;
            (vec![3], vec![2])
        } else {
            // u = (-1)^a 5^b, packed as a + 2b.
            let n5 = modulus / 4;
            let mut x = 1u64;
            for b in 0..n5 {
                dlog[x as usize] = (2 * b) as u32;
                dlog[(modulus - x) as usize] = (2 * b + 1) as u32;
                x = x * 5 % modulus;
            }
            (vec![modulus - 1, 5], vec![2, n5])
        };
        Component {
            ell,
            e,
            modulus,
            local_gens,
            orders,
            dlog,
        }
    }

    /// Exponents of u (mod ell^e) against this component's generators.
    #[inline]
    pub fn dlog(&self, u: u64) -> Option<[u64; 2]> {
        let packed = self.dlog[(u % self.modulus) as usize];
        if packed == u32::MAX {
            return None;
        }
        let packed = packed as u64;
        Some(if self.local_gens.len() == 2 {
            [packed & 1, packed >> 1]
        } else {
            [packed, 0]
        })
    }
}

#[derive(Clone, Debug)]
pub struct UnitGroup {
    pub q: u64,
    pub prime_powers: Vec<(u64, u32)>,
    pub components: Vec<Component>,
    /// Generators lifted to residues mod q (identity on the other components).
    pub gens: Vec<u64>,
    pub orders: Vec<u64>,
    /// Index of the component each generator belongs to.
    pub gen_component: Vec<usize>,
    pub phi: u64,
}

impl UnitGroup {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Invalid("modulus must be positive".into()));
        }
        if q > MAX_MODULUS {
            return Err(Error::ModulusTooLarge(q));
        }
        let prime_powers = factorize(q);
        let components: Vec<Component> =
            prime_powers.iter().map(|&(l, e)| Component::build(l, e)).collect();
        let mut gens = Vec::new();
        let mut orders = Vec::new();
        let mut gen_component = Vec::new();
        for (ci, c) in components.iter().enumerate() {
            for (&g, &n) in c.local_gens.iter().zip(&c.orders) {
                let parts: Vec<(u64, u64)> = components
                    .iter()
                    .enumerate()
                    .map(|(cj, d)| (if cj == ci { g } else { 1 % d.modulus }, d.modulus))
                    .collect();
                gens.push(crt(&parts).0);
                orders.push(n);
                gen_component.push(ci);
            }
        }
        Ok(UnitGroup {
            q,
            prime_powers,
            components,
            gens,
            orders,
            gen_component,
            phi: euler_phi(q),
        })
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    /// Exponent of the group: lcm of generator orders.
    pub fn exponent(&self) -> u64 {
        self.orders.iter().fold(1, |a, &n| crate::arith::lcm(a, n))
    }

    pub fn is_unit(&self, u: u64) -> bool {
        gcd(u % self.q, self.q) == 1
    }

    /// Exponent vector of u against `gens`, or `None` for non-units.
    pub fn dlog(&self, u: u64) -> Option<Vec<u64>> {
        let mut out = Vec::with_capacity(self.rank());
        self.dlog_into(u, &mut out).then_some(out)
    }

    pub fn dlog_into(&self, u: u64, out: &mut Vec<u64>) -> bool {
        out.clear();
        for c in &self.components {
            let Some(x) = c.dlog(u) else {
                return false;
            };
            out.extend_from_slice(&x[..c.local_gens.len()]);
        }
        true
    }

    pub fn exp(&self, x: &[u64]) -> u64 {
        self.gens
            .iter()
            .zip(x)
            .fold(1 % self.q, |acc, (&g, &a)| acc * pow_mod(g, a, self.q) % self.q)
    }

    /// All units in increasing order.
    pub fn units(&self) -> Vec<u64> {
        if self.q == 1 {
            return vec![0];
        }
        (1..self.q).filter(|&u| gcd(u, self.q) == 1).collect()
    }
}

fn group_cache() -> &'static RwLock<HashMap<u64, Arc<UnitGroup>>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<UnitGroup>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Shared, lazily built unit group for q.
pub fn unit_group(q: u64) -> Result<Arc<UnitGroup>> {
    if let Some(g) = group_cache().read().unwrap().get(&q) {
        return Ok(g.clone());
    }
    let g = Arc::new(UnitGroup::new(q)?);
    let mut w = group_cache().write().unwrap();
    Ok(w.entry(q).or_insert(g).clone())
}

/// Closed forms for f(p^v) valid for every v.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "r")]
pub enum ClosedForm {
    /// p^(v-1) (p - 1)
    Totient,
    /// sum_{j<=v} p^(rj)
    DivisorPower(u32),
}

impl ClosedForm {
    pub fn value(&self, p: &BigInt, v: u32) -> BigInt {
        match *self {
            ClosedForm::Totient => num_traits::pow(p.clone(), v as usize - 1) * (p - 1),
            ClosedForm::DivisorPower(r) => {
                let pr = num_traits::pow(p.clone(), r as usize);
                let mut acc = BigInt::zero();
                let mut t = BigInt::one();
                for _ in 0..=v {
                    acc += &t;
                    t *= &pr;
                }
                acc
            }
        }
    }

    pub fn value_mod(&self, p: u64, v: u32, q: u64) -> u64 {
        match *self {
            ClosedForm::Totient => pow_mod(p, v as u64 - 1, q) * ((p + q - 1) % q) % q,
            ClosedForm::DivisorPower(r) => {
                let pr = pow_mod(p, r as u64, q);
                let mut acc = 0u64;
                let mut t = 1 % q;
                for _ in 0..=v {
                    acc = (acc + t) % q;
                    t = t * pr % q;
                }
                acc
            }
        }
    }

    /// The defining polynomial W_v.
    pub fn poly(&self, v: u32) -> IntPoly {
        match *self {
            ClosedForm::Totient => {
                &IntPoly::monomial(BigInt::one(), v as usize - 1) * &IntPoly::linear_root(1)
            }
            ClosedForm::DivisorPower(r) => {
                let mut c = vec![BigInt::zero(); (r * v) as usize + 1];
                for j in 0..=v {
                    c[(r * j) as usize] = BigInt::one();
                }
                IntPoly::new(c)
            }
        }
    }
}

/// How f_i(p^v) is defined for v > V.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BeyondRule {
    Undefined,
    ConstantOne,
    /// f(p^v) = W_{start + ((v - start) mod period)}(p) for v > V.
    Periodic { start: usize, period: usize },
    /// One closed form per function, agreeing with the W's up to V.
    ClosedForm { forms: Vec<ClosedForm> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultFnSpec {
    #[serde(default)]
    pub name: String,
    /// polys[i][v-1] = W_{i,v}
    pub polys: Vec<Vec<IntPoly>>,
    pub beyond: BeyondRule,
}

impl MultFnSpec {
    pub fn new(name: &str, polys: Vec<Vec<IntPoly>>, beyond: BeyondRule) -> Result<Self> {
        let s = MultFnSpec {
            name: name.to_string(),
            polys,
            beyond,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.polys.is_empty() || self.polys[0].is_empty() {
            return Err(Error::Invalid("family needs K >= 1 and V >= 1".into()));
        }
        let vmax = self.polys[0].len();
        if self.polys.iter().any(|row| row.len() != vmax) {
            return Err(Error::Invalid("every function needs V polynomials".into()));
        }
        match &self.beyond {
            BeyondRule::Periodic { start, period } => {
                if *start < 1 || *period < 1 || start + period - 1 > vmax {
                    return Err(Error::Invalid(format!(
                        "periodic rule start={start} period={period} needs start + period - 1 <= V = {vmax}"
                    )));
                }
            }
            BeyondRule::ClosedForm { forms } => {
                if forms.len() != self.k() {
                    return Err(Error::Invalid("one closed form per function".into()));
                }
                for (i, f) in forms.iter().enumerate() {
                    for v in 1..=vmax {
                        if f.poly(v as u32) != self.polys[i][v - 1] {
                            return Err(Error::Invalid(format!(
                                "closed form of f_{} disagrees with W_{{{},{}}}",
                                i + 1,
                                i + 1,
                                v
                            )));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.polys.len()
    }

    pub fn v_max(&self) -> usize {
        self.polys[0].len()
    }

    pub fn poly(&self, i: usize, v: usize) -> &IntPoly {
        &self.polys[i][v - 1]
    }

    /// W_{1,v}, ..., W_{K,v}
    pub fn level(&self, v: usize) -> Vec<IntPoly> {
        self.polys.iter().map(|row| row[v - 1].clone()).collect()
    }

    /// f_i(p^v) mod q for any v >= 1.
    pub fn value_mod(&self, i: usize, p: u64, v: u32, q: u64) -> Result<u64> {
        let vu = v as usize;
        if vu <= self.v_max() {
            return Ok(self.polys[i][vu - 1].to_mod(q).eval(p % q));
        }
        match &self.beyond {
            BeyondRule::Undefined => Err(Error::BeyondVUndefined {
                exponent: v,
                v_max: self.v_max(),
            }),
            BeyondRule::ConstantOne => Ok(1 % q),
            BeyondRule::Periodic { start, period } => {
                let w = start + (vu - start) % period;
                Ok(self.polys[i][w - 1].to_mod(q).eval(p % q))
            }
            BeyondRule::ClosedForm { forms } => Ok(forms[i].value_mod(p, v, q)),
        }
    }

    /// The integer f_i(p^v). Beyond V a periodic rule evaluates the
    /// designated W exactly.
    pub fn value_int(&self, i: usize, p: u64, v: u32) -> Result<BigInt> {
        let vu = v as usize;
        let pb = BigInt::from(p);
        if vu <= self.v_max() {
            return Ok(self.polys[i][vu - 1].eval(&pb));
        }
        match &self.beyond {
            BeyondRule::Undefined => Err(Error::BeyondVUndefined {
                exponent: v,
                v_max: self.v_max(),
            }),
            BeyondRule::ConstantOne => Ok(BigInt::one()),
            BeyondRule::Periodic { start, period } => {
                let w = start + (vu - start) % period;
                Ok(self.polys[i][w - 1].eval(&pb))
            }
            BeyondRule::ClosedForm { forms } => Ok(forms[i].value(&pb, v)),
        }
    }

    pub fn phi(v: usize) -> Self {
        Self::closed("phi", &[ClosedForm::Totient], v)
    }

    pub fn sigma(v: usize) -> Self {
        Self::closed("sigma", &[ClosedForm::DivisorPower(1)], v)
    }

    pub fn sigma_r(r: u32, v: usize) -> Self {
        Self::closed(&format!("sigma_{r}"), &[ClosedForm::DivisorPower(r)], v)
    }

    pub fn phi_sigma(v: usize) -> Self {
        Self::closed(
            "phi_sigma",
            &[ClosedForm::Totient, ClosedForm::DivisorPower(1)],
            v,
        )
    }

    pub fn closed(name: &str, forms: &[ClosedForm], v: usize) -> Self {
        let polys = forms
            .iter()
            .map(|f| (1..=v as u32).map(|j| f.poly(j)).collect())
            .collect();
        MultFnSpec {
            name: name.to_string(),
            polys,
            beyond: BeyondRule::ClosedForm {
                forms: forms.to_vec(),
            },
        }
    }

    /// Look up a named preset: phi, sigma, sigma_R, phi_sigma.
    pub fn preset(name: &str, v: usize) -> Option<Self> {
        match name {
            "phi" => Some(Self::phi(v)),
            "sigma" => Some(Self::sigma(v)),
            "phi_sigma" | "phi-sigma" => Some(Self::phi_sigma(v)),
            _ => name
                .strip_prefix("sigma_")
                .and_then(|r| r.parse().ok())
                .filter(|&r: &u32| r >= 1)
                .map(|r| Self::sigma_r(r, v)),
        }
    }
}

/// Residues u mod ell (units) with every poly in fs nonzero at u.
fn good_residues_mod_prime(fs: &[IntPoly], ell: u64) -> Vec<u64> {
    let mods: Vec<_> = fs.iter().map(|f| f.to_mod(ell)).collect();
    (1..ell).filter(|&u| mods.iter().all(|m| m.eval(u) != 0)).collect()
}

/// Units u mod q with prod f(u) a unit mod q, built per prime-power
/// component and combined by CRT.
pub fn coprime_value_set(fs: &[IntPoly], q: u64) -> Vec<u64> {
    let mut acc: Vec<u64> = vec![0];
    let mut m = 1u64;
    for (ell, e) in factorize(q) {
        let pe = ell.pow(e);
        let base = good_residues_mod_prime(fs, ell);
        let mut next = Vec::with_capacity(acc.len() * base.len() * (pe / ell) as usize);
        for &a in &acc {
            for &b in &base {
                for t in 0..pe / ell {
                    let local = b + t * ell;
                    next.push(crt(&[(a, m), (local, pe)]).0);
                }
            }
        }
        acc = next;
        m *= pe;
    }
    acc.sort_unstable();
    acc
}

/// The density #{u in U_q : prod f(u) in U_q} / phi(q).
pub fn alpha_polys(fs: &[IntPoly], q: u64) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for (ell, _) in factorize(q) {
        num *= good_residues_mod_prime(fs, ell).len();
        den *= ell - 1;
    }
    BigRational::new(num, den)
}

pub fn r_v_set(spec: &MultFnSpec, q: u64, v: usize) -> Vec<u64> {
    coprime_value_set(&spec.level(v), q)
}

pub fn alpha_v(spec: &MultFnSpec, q: u64, v: usize) -> BigRational {
    alpha_polys(&spec.level(v), q)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    /// `None` reads as NONE_UP_TO_V.
    pub k: Option<usize>,
    #[serde(skip)]
    pub alpha_k: Option<BigRational>,
}

pub fn admissible_k(spec: &MultFnSpec, q: u64) -> Admissibility {
    for v in 1..=spec.v_max() {
        let a = alpha_v(spec, q, v);
        if !a.is_zero() {
            return Admissibility {
                k: Some(v),
                alpha_k: Some(a),
            };
        }
    }
    Admissibility {
        k: None,
        alpha_k: None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftCount {
    pub count: u64,
    /// alpha_F(Q) phi(Q) / (alpha_F(d) phi(d))
    pub formula: BigRational,
}

/// Count the lifts U of u mod d to U_Q with F(U) a unit mod Q.
pub fn lift_count(f: &IntPoly, big_q: u64, d: u64, u: u64) -> Result<LiftCount> {
    if d == 0 || big_q % d != 0 {
        return Err(Error::Invalid(format!("{d} does not divide {big_q}")));
    }
    let fd = f.to_mod(d);
    if gcd(u % d, d) != 1 || gcd(fd.eval(u % d), d) != 1 {
        return Err(Error::Invalid(format!("F({u}) is not a unit mod {d}")));
    }
    let fs = std::slice::from_ref(f);
    let ad = alpha_polys(fs, d);
    if ad.is_zero() {
        return Err(Error::ZeroDensity(d));
    }
    let aq = alpha_polys(fs, big_q);
    let formula = aq * BigRational::from_integer(euler_phi(big_q).into())
        / (ad * BigRational::from_integer(euler_phi(d).into()));
    let fq = f.to_mod(big_q);
    let count = (0..big_q / d)
        .map(|t| u % d + t * d)
        .filter(|&x| gcd(x, big_q) == 1 && gcd(fq.eval(x), big_q) == 1)
        .count() as u64;
    debug_assert_eq!(BigRational::from_integer(count.into()), formula);
    Ok(LiftCount { count, formula })
}

/// f_i(n) from the prime factorization of n.
pub fn mult_fn_value(spec: &MultFnSpec, i: usize, n_factored: &[(u64, u32)]) -> Result<BigInt> {
    let mut acc = BigInt::one();
    for &(p, v) in n_factored {
        acc *= spec.value_int(i, p, v)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::divisors;
    use num_traits::ToPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn unit_group_examples() {
        let g = unit_group(5).unwrap();
        assert_eq!((g.gens.clone(), g.orders.clone()), (vec![2], vec![4]));
        let g = unit_group(8).unwrap();
        assert_eq!((g.gens.clone(), g.orders.clone()), (vec![7, 5], vec![2, 2]));
        let g = unit_group(1).unwrap();
        assert_eq!((g.phi, g.rank()), (1, 0));
        assert_eq!(UnitGroup::new(MAX_MODULUS + 1).unwrap_err(), Error::ModulusTooLarge(MAX_MODULUS + 1));
    }

    #[test]
    fn dlog_round_trip() {
        for q in [1u64, 2, 4, 8, 9, 12, 16, 45, 64, 360, 1001, 1024] {
            let g = UnitGroup::new(q).unwrap();
            assert_eq!(g.orders.iter().product::<u64>(), g.phi);
            let mut seen = std::collections::HashSet::new();
            for u in 0..q {
                match g.dlog(u) {
                    Some(x) => {
                        assert!(g.is_unit(u));
                        assert_eq!(g.exp(&x), u % q);
                        assert!(seen.insert(x));
                    }
                    None => assert!(!g.is_unit(u) || q == 1),
                }
            }
        }
    }

    fn lin(a: i64) -> IntPoly {
        IntPoly::linear_root(a)
    }

    #[test]
    fn r_v_examples() {
        let joint = MultFnSpec::phi_sigma(2);
        assert_eq!(r_v_set(&joint, 5, 1), vec![2, 3]);
        let sigma = MultFnSpec::sigma(2);
        assert_eq!(r_v_set(&sigma, 4, 2), vec![1, 3]);
        assert!(r_v_set(&sigma, 4, 1).is_empty());
        assert_eq!(r_v_set(&sigma, 6, 2), vec![5]);
        let _ = lin(0);
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_v(&MultFnSpec::phi_sigma(2), 5, 1), rat(1, 2));
        assert_eq!(alpha_v(&MultFnSpec::sigma(2), 7, 2), rat(2, 3));
        assert_eq!(alpha_v(&MultFnSpec::sigma(2), 1, 2), rat(1, 1));
    }

    #[test]
    fn admissibility_examples() {
        let sigma = MultFnSpec::sigma(2);
        assert_eq!(admissible_k(&sigma, 9).k, Some(1));
        assert_eq!(admissible_k(&sigma, 4).k, Some(2));
        assert_eq!(admissible_k(&sigma, 6).k, Some(2));
        // phi is never admissible at even moduli: T - 1 and T^(v-1)(T-1) vanish mod 2.
        assert_eq!(admissible_k(&MultFnSpec::phi(4), 10).k, None);
    }

    #[test]
    fn lift_examples() {
        let r = lift_count(&lin(-1), 15, 3, 1).unwrap();
        assert_eq!(r.count, 3);
        assert_eq!(r.formula, rat(3, 1));
        assert_eq!(lift_count(&lin(-1), 15, 15, 1).unwrap().count, 1);
        assert_eq!(lift_count(&IntPoly::x(), 9, 3, 2).unwrap().count, 3);
        // alpha_{T(T+1)}(2) = 0 but no unit u mod 2 has u(u+1) odd either.
        assert!(lift_count(&(&IntPoly::x() * &lin(-1)), 6, 2, 1).is_err());
    }

    #[test]
    fn lift_formula_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 500 {
            let big_q = rng.gen_range(1..=200u64);
            let ds = divisors(big_q);
            let d = ds[rng.gen_range(0..ds.len())];
            let f = IntPoly::from_i64s(&[rng.gen_range(-3..=3), rng.gen_range(-2..=2), rng.gen_range(0..=1)]);
            if f.is_constant() {
                continue;
            }
            let fd = f.to_mod(d);
            let us: Vec<u64> = (0..d).filter(|&u| gcd(u, d) == 1 && gcd(fd.eval(u), d) == 1).collect();
            if us.is_empty() || alpha_polys(std::slice::from_ref(&f), big_q).is_zero() {
                continue;
            }
            let u = us[rng.gen_range(0..us.len())];
            let r = lift_count(&f, big_q, d, u).unwrap();
            assert_eq!(BigRational::from_integer(r.count.into()), r.formula, "F={f} Q={big_q} d={d} u={u}");
            checked += 1;
        }
    }

    #[test]
    fn alpha_is_multiplicative() {
        let joint = MultFnSpec::phi_sigma(2);
        for q1 in 1..=300u64 {
            for q2 in 1..=300 / q1 {
                if gcd(q1, q2) != 1 {
                    continue;
                }
                for v in 1..=2 {
                    assert_eq!(
                        alpha_v(&joint, q1 * q2, v),
                        alpha_v(&joint, q1, v) * alpha_v(&joint, q2, v)
                    );
                }
            }
        }
        // The set itself agrees with direct enumeration over U_q.
        for q in 1..=120u64 {
            let direct: Vec<u64> = (0..q)
                .filter(|&u| {
                    gcd(u, q) == 1 && gcd(((u + q - 1) % q) * ((u + 1) % q) % q, q) == 1
                })
                .collect();
            let direct = if q == 1 { vec![0] } else { direct };
            assert_eq!(r_v_set(&joint, q, 1), direct, "q={q}");
        }
    }

    #[test]
    fn joint_alpha_formula() {
        let joint = MultFnSpec::phi_sigma(1);
        for q in (1..=1000u64).filter(|&q| gcd(q, 6) == 1 && crate::arith::is_squarefree(q)) {
            let expect = factorize(q)
                .iter()
                .fold(rat(1, 1), |a, &(l, _)| a * rat(l as i64 - 3, l as i64 - 1));
            assert_eq!(alpha_v(&joint, q, 1), expect);
        }
    }

    #[test]
    fn mult_fn_examples() {
        let f12 = factorize(12);
        assert_eq!(mult_fn_value(&MultFnSpec::phi(3), 0, &f12).unwrap(), BigInt::from(4));
        assert_eq!(mult_fn_value(&MultFnSpec::sigma(3), 0, &f12).unwrap(), BigInt::from(28));
        assert_eq!(mult_fn_value(&MultFnSpec::sigma_r(3, 3), 0, &factorize(4)).unwrap(), BigInt::from(73));
        let undefined = MultFnSpec::new("t", vec![vec![lin(1)]], BeyondRule::Undefined).unwrap();
        assert_eq!(
            mult_fn_value(&undefined, 0, &[(2, 2)]),
            Err(Error::BeyondVUndefined { exponent: 2, v_max: 1 })
        );
    }

    #[test]
    fn sigma_r_matches_divisor_sums() {
        for r in 1..=3u32 {
            let spec = MultFnSpec::sigma_r(r, 2);
            for n in 1..=10_000u64 {
                let direct: u128 = divisors(n).iter().map(|&d| (d as u128).pow(r)).sum();
                let got = mult_fn_value(&spec, 0, &factorize(n)).unwrap();
                assert_eq!(got.to_u128().unwrap(), direct);
                assert_eq!(spec.value_mod(0, 7, 5, 97).unwrap() as u128, (1..=5u32).chain([0]).map(|j| 7u128.pow(r * j)).sum::<u128>() % 97);
            }
        }
    }

    #[test]
    fn periodic_rule() {
        let w = |a| vec![lin(a)];
        let polys = vec![[w(1), w(2), w(3)].concat()];
        let s = MultFnSpec::new("p", polys.clone(), BeyondRule::Periodic { start: 2, period: 2 }).unwrap();
        // v = 4 -> W_2, v = 5 -> W_3
        assert_eq!(s.value_mod(0, 10, 4, 1000).unwrap(), 8);
        assert_eq!(s.value_mod(0, 10, 5, 1000).unwrap(), 7);
        assert!(MultFnSpec::new("p", polys, BeyondRule::Periodic { start: 3, period: 2 }).is_err());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        let s = MultFnSpec::phi_sigma(2);
        let text = toml::to_string(&s).unwrap();
        let back: MultFnSpec = toml::from_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(MultFnSpec::preset("sigma_3", 2).unwrap(), MultFnSpec::sigma_r(3, 2));
    }
}
