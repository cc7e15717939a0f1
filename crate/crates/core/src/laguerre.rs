//! Generalized Laguerre polynomials and the normalized radial profiles of the
//! Heisenberg type-1 spherical functions.

use num::{BigInt, BigRational, One, Zero};

/// Highest supported Laguerre degree.
pub const MAX_DEGREE: u32 = 64;

/// `L_l^{(alpha)}(x)` by the three-term recurrence, upward in `l`.
pub fn laguerre(l: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if l == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..l {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `binom(n, k)` in floating point; exact for the small arguments used here.
pub fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `q_l^{(n)}(x) = L_l^{(n-1)}(x/2) e^{-x/4} / binom(l+n-1, l)`, so `q(0) = 1`.
///
/// On a unitary block of size `n` the type-1 profile is `q(|lambda| |z|^2)`.
pub fn radial_profile(l: u32, n: usize, x: f64) -> f64 {
    debug_assert!(l <= MAX_DEGREE && n >= 1);
    let norm = binom(l as u64 + n as u64 - 1, l as u64);
    laguerre(l, n as f64 - 1.0, 0.5 * x) * (-0.25 * x).exp() / norm
}

/// Series coefficients `coeff_d` of the radial profile in the basis
/// `p_d(z) = |z|^{2d} / (2^d d!)`, i.e. `q(|z|^2) = sum_d coeff_d p_d(z)`,
/// for `d = 0..=max_degree`.
///
/// Closed form: `coeff_d = (-1)^d sum_i binom(d, i) 2^{-(d-i)}
/// binom(l+n-1, l-i) / binom(l+n-1, l)`; every summand is positive, so the
/// sign is exactly `(-1)^d`.
pub fn profile_coefficients(l: u32, n: usize, max_degree: usize) -> Vec<f64> {
    let big_n = l as u64 + n as u64 - 1;
    let norm = binom(big_n, l as u64);
    (0..=max_degree)
        .map(|d| {
            let mut s = 0.0;
            for i in 0..=d.min(l as usize) {
                s += binom(d as u64, i as u64) * 0.5f64.powi((d - i) as i32) * binom(big_n, l as u64 - i as u64);
            }
            let s = s / norm;
            if d % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect()
}

/// Taylor terms `c_m x^m` of `q_l^{(n)}(x)` for `m = 0..len`, built from the
/// product of the Laguerre polynomial and the exponential series.
pub fn profile_taylor_terms(l: u32, n: usize, x: f64, len: usize) -> Vec<f64> {
    let big_n = l as u64 + n as u64 - 1;
    let norm = binom(big_n, l as u64);
    // a_i = (-1)^i binom(N, l-i) (x/2)^i / i! / binom(N, l)
    let mut a = Vec::with_capacity(l as usize + 1);
    let mut pow = 1.0;
    for i in 0..=l as u64 {
        if i > 0 {
            pow *= -0.5 * x / i as f64;
        }
        a.push(binom(big_n, l as u64 - i) / norm * pow);
    }
    // e_j = (-x/4)^j / j!
    let mut e = Vec::with_capacity(len);
    let mut t = 1.0;
    for j in 0..len {
        if j > 0 {
            t *= -0.25 * x / j as f64;
        }
        e.push(t);
    }
    (0..len)
        .map(|m| (0..=m.min(l as usize)).map(|i| a[i] * e[m - i]).sum())
        .collect()
}

/// `binom(n + r + m - 1, m)`: bound on `|dim(P_m) coeff_m|` for a block of
/// size `n` and Laguerre index `r`.
pub fn coeff_bound(n: usize, r: u32, m: usize) -> f64 {
    binom((n + r as usize + m) as u64 - 1, m as u64)
}

/// Dimension of the degree-`m` block-invariant polynomial space, `binom(m+n-1, m)`.
pub fn invariant_dim(n: usize, m: usize) -> f64 {
    binom((m + n) as u64 - 1, m as u64)
}

/// `coeff_d * dim(P_d)` for a block of size `n` as an exact rational.
pub fn exact_scaled_coefficient(l: u32, n: usize, d: usize) -> BigRational {
    let big_n = l as u64 + n as u64 - 1;
    let mut s = BigRational::zero();
    for i in 0..=d.min(l as usize) {
        let num = exact_binom(d as u64, i as u64) * exact_binom(big_n, l as u64 - i as u64);
        let den = BigInt::from(2).pow((d - i) as u32) * exact_binom(big_n, l as u64);
        s += BigRational::new(num, den);
    }
    if d % 2 == 1 {
        s = -s;
    }
    s * BigRational::from_integer(exact_binom((d + n - 1) as u64, d as u64))
}

/// [`coeff_bound`] as an exact integer.
pub fn exact_coeff_bound(n: usize, r: u32, m: usize) -> BigInt {
    exact_binom((n + r as usize + m) as u64 - 1, m as u64)
}

pub fn exact_binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}
