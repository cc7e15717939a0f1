//! Polynomials in `z, conj(z)` on `C^n` and the pairing
//! `d_p(q)(0)`, where `d_p` replaces `z^a conj(z)^b` in `p` by
//! `(2 d/d conj(z))^a (2 d/dz)^b`.
//!
//! On monomials the pairing is `d_{z^a zbar^b}(z^c zbar^d)(0) =
//! [c = b, d = a] 2^{|a|+|b|} a! b!`.

use std::collections::BTreeMap;

/// Exponent pair `(a, b)` of `z^a conj(z)^b`.
pub type Monomial = (Vec<u32>, Vec<u32>);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FockPoly {
    pub n: usize,
    pub terms: BTreeMap<Monomial, f64>,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// All exponent vectors of length `n` with total degree `m`.
fn compositions(n: usize, m: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in compositions(n - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl FockPoly {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, a: Vec<u32>, b: Vec<u32>, coef: f64) {
        *self.terms.entry((a, b)).or_insert(0.0) += coef;
    }

    /// `|z|^{2m}` expanded by the multinomial theorem.
    pub fn norm_power(n: usize, m: u32) -> Self {
        let mut out = Self::zero(n);
        for k in compositions(n, m) {
            let coef = factorial(m) / k.iter().map(|ki| factorial(*ki)).product::<f64>();
            out.add_term(k.clone(), k, coef);
        }
        out
    }

    /// `p_m(z) = |z|^{2m} / (2^m m!)`.
    pub fn invariant(n: usize, m: u32) -> Self {
        Self::norm_power(n, m).scale(1.0 / (2f64.powi(m as i32) * factorial(m)))
    }

    /// `sum_m c_m |z|^{2m}`.
    pub fn radial(n: usize, coeffs: &[f64]) -> Self {
        let mut out = Self::zero(n);
        for (m, c) in coeffs.iter().enumerate() {
            for (k, v) in Self::norm_power(n, m as u32).terms {
                *out.terms.entry(k).or_insert(0.0) += c * v;
            }
        }
        out
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.terms.values_mut().for_each(|v| *v *= s);
        self
    }
}

/// `d_p(q)(0)`.
pub fn apply_at_origin(p: &FockPoly, q: &FockPoly) -> f64 {
    p.terms
        .iter()
        .map(|((a, b), pc)| {
            let qc = q.terms.get(&(b.clone(), a.clone())).copied().unwrap_or(0.0);
            if qc == 0.0 {
                return 0.0;
            }
            let deg: u32 = a.iter().sum::<u32>() + b.iter().sum::<u32>();
            let facts: f64 = a.iter().chain(b).map(|k| factorial(*k)).product();
            pc * qc * 2f64.powi(deg as i32) * facts
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::{eig_record, HSphericalLabel};
    use crate::laguerre::{invariant_dim, profile_taylor_terms};

    #[test]
    fn monomial_pairing() {
        let mut p = FockPoly::zero(2);
        p.add_term(vec![1, 0], vec![0, 2], 1.0);
        let mut q = FockPoly::zero(2);
        q.add_term(vec![0, 2], vec![1, 0], 3.0);
        // 2^3 * 1! * 2! * 3
        assert_eq!(apply_at_origin(&p, &q), 48.0);
        let mut r = FockPoly::zero(2);
        r.add_term(vec![1, 0], vec![0, 2], 3.0);
        assert_eq!(apply_at_origin(&p, &r), 0.0);
    }

    #[test]
    fn invariant_orthogonality() {
        for n in 1..=3 {
            for a in 0..=5 {
                for d in 0..=5 {
                    let v = apply_at_origin(&FockPoly::invariant(n, a), &FockPoly::invariant(n, d));
                    let want = if a == d { invariant_dim(n, a as usize) } else { 0.0 };
                    assert!((v - want).abs() < 1e-10 * want.max(1.0), "n={n} a={a} d={d}: {v}");
                }
            }
        }
    }

    #[test]
    fn pairing_extracts_series_coefficients() {
        // d_{p_m}(psi)(0) / dim(P_m) reproduces the tabulated coefficient.
        for n in 1..=3 {
            for l in 0..4 {
                let taylor = profile_taylor_terms(l, n, 1.0, 8);
                let psi = FockPoly::radial(n, &taylor);
                let rec = eig_record(&HSphericalLabel::type1(1.0, vec![l], vec![n]).unwrap(), 7);
                for m in 0..8u32 {
                    let got = apply_at_origin(&FockPoly::invariant(n, m), &psi) / invariant_dim(n, m as usize);
                    let want = rec.coeff[&vec![m as usize]];
                    assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "n={n} l={l} m={m}: {got} vs {want}");
                }
            }
        }
    }
}
