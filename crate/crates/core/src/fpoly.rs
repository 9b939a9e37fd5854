//! Polynomials over a prime field F_p, enough to split a polynomial into
//! squarefree layers and to find its roots.

use crate::arith::{inv_mod, mul_mod};
use crate::intpoly::IntPoly;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpPoly {
    pub p: u64,
    /// Constant term first, no trailing zeros.
    pub c: Vec<u64>,
}

impl FpPoly {
    pub fn new(p: u64, mut c: Vec<u64>) -> Self {
        for x in c.iter_mut() {
            *x %= p;
        }
        while c.last() == Some(&0) {
            c.pop();
        }
        FpPoly { p, c }
    }

    pub fn from_int(f: &IntPoly, p: u64) -> Self {
        Self::new(p, f.to_mod(p).coeffs)
    }

    pub fn one(p: u64) -> Self {
        Self::new(p, vec![1])
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.c.len() <= 1
    }

    pub fn lead(&self) -> u64 {
        self.c.last().copied().unwrap_or(0)
    }

    pub fn eval(&self, x: u64) -> u64 {
        let mut acc = 0u64;
        for &a in self.c.iter().rev() {
            acc = (mul_mod(acc, x, self.p) + a) % self.p;
        }
        acc
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = inv_mod(self.lead(), self.p).expect("field element");
        Self::new(self.p, self.c.iter().map(|&a| mul_mod(a, inv, self.p)).collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.p,
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &a)| mul_mod(a, i as u64 % self.p, self.p))
                .collect(),
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::new(self.p, vec![]);
        }
        let mut out = vec![0u64; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] = (out[i + j] + mul_mod(a, b, self.p)) % self.p;
            }
        }
        Self::new(self.p, out)
    }

    /// Quotient and remainder.
    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        let p = self.p;
        let dd = d.degree().expect("division by zero polynomial");
        let inv = inv_mod(d.lead(), p).expect("field element");
        let mut r = self.c.clone();
        if r.len() <= dd {
            return (Self::new(p, vec![]), self.clone());
        }
        let mut q = vec![0u64; r.len() - dd];
        for i in (dd..r.len()).rev() {
            let coef = mul_mod(r[i], inv, p);
            q[i - dd] = coef;
            if coef == 0 {
                continue;
            }
            for (j, &b) in d.c.iter().enumerate() {
                let k = i - dd + j;
                r[k] = (r[k] + p - mul_mod(coef, b, p)) % p;
            }
        }
        r.truncate(dd);
        (Self::new(p, q), Self::new(p, r))
    }

    /// Monic gcd.
    pub fn gcd(&self, o: &Self) -> Self {
        let mut a = self.clone();
        let mut b = o.clone();
        while !b.is_zero() {
            let r = a.divrem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    fn div_exact(&self, d: &Self) -> Self {
        let (q, r) = self.divrem(d);
        debug_assert!(r.is_zero());
        q
    }

    /// Squarefree layers (g_i, i): self = lead * prod g_i^i with the g_i
    /// monic, squarefree and pairwise coprime.
    pub fn squarefree_layers(&self) -> Vec<(FpPoly, u64)> {
        let mut out = Vec::new();
        self.sqf_into(1, &mut out);
        out.sort_by_key(|(_, m)| *m);
        out
    }

    fn sqf_into(&self, scale: u64, out: &mut Vec<(FpPoly, u64)>) {
        if self.is_constant() {
            return;
        }
        let f = self.monic();
        let df = f.derivative();
        let mut c = f.gcd(&df);
        let mut w = f.div_exact(&c);
        let mut i = 1u64;
        while !w.is_constant() {
            let y = w.gcd(&c);
            let z = w.div_exact(&y);
            if !z.is_constant() {
                out.push((z, i * scale));
            }
            i += 1;
            w = y;
            c = c.div_exact(&w);
        }
        if !c.is_constant() {
            // c is a polynomial in T^p; over F_p its p-th root just drops the gaps.
            let p = self.p as usize;
            let root: Vec<u64> = c.c.iter().step_by(p).copied().collect();
            FpPoly::new(self.p, root).sqf_into(scale * self.p, out);
        }
    }

    /// Degree of the product of the distinct monic irreducible factors.
    pub fn radical_degree(&self) -> usize {
        self.squarefree_layers()
            .iter()
            .map(|(g, _)| g.degree().unwrap_or(0))
            .sum()
    }

    /// True when self = c * G^n for some polynomial G over F_p.
    pub fn is_nth_power_times_const(&self, n: u64) -> bool {
        self.squarefree_layers().iter().all(|(_, m)| m % n == 0)
    }

    /// Roots in F_p with multiplicities, by exhaustive evaluation.
    pub fn roots_with_multiplicity(&self) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        if self.is_zero() {
            return out;
        }
        for x in 0..self.p {
            if self.eval(x) != 0 {
                continue;
            }
            let lin = FpPoly::new(self.p, vec![self.p - x, 1]);
            let mut g = self.clone();
            let mut mult = 0;
            loop {
                let (q, r) = g.divrem(&lin);
                if !r.is_zero() {
                    break;
                }
                g = q;
                mult += 1;
            }
            out.push((x, mult));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64, c: &[u64]) -> FpPoly {
        FpPoly::new(p, c.to_vec())
    }

    #[test]
    fn layers_of_products() {
        let p = 7;
        let a = fp(p, &[1, 1]); // T+1
        let b = fp(p, &[3, 0, 1]); // T^2+3
        let f = a.mul(&a).mul(&a).mul(&b);
        let layers = f.squarefree_layers();
        assert_eq!(layers, vec![(b.clone(), 1), (a.clone(), 3)]);
        assert_eq!(f.radical_degree(), 3);
        assert!(!f.is_nth_power_times_const(3));
        assert!(a.mul(&a).mul(&a).is_nth_power_times_const(3));
    }

    #[test]
    fn pth_powers_are_detected() {
        // (T+1)^5 over F_5 = T^5 + 1 has zero derivative.
        let f = fp(5, &[1, 0, 0, 0, 0, 1]);
        assert_eq!(f.squarefree_layers(), vec![(fp(5, &[1, 1]), 5)]);
        assert_eq!(f.radical_degree(), 1);
        // (T+1)^10 * (T+2)
        let g = f.mul(&f).mul(&fp(5, &[2, 1]));
        assert_eq!(
            g.squarefree_layers(),
            vec![(fp(5, &[2, 1]), 1), (fp(5, &[1, 1]), 10)]
        );
    }

    #[test]
    fn roots() {
        let f = fp(11, &[1, 1]).mul(&fp(11, &[1, 1])).mul(&fp(11, &[9, 1]));
        assert_eq!(f.roots_with_multiplicity(), vec![(2, 1), (10, 2)]);
        assert!(fp(11, &[1, 0, 1]).roots_with_multiplicity().is_empty());
    }
}
