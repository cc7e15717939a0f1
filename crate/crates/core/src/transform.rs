//! Spherical transform on `F(p)`, the Euclidean Fourier transform on the Lie
//! algebra, and the radial Plancherel measure.
//!
//! Haar measure on `F(p)` is Lebesgue measure on the exponential coordinates
//! `(X, A_{i<j})`. All integrals over `F(p)` or `R^d` use tensor rules: scaled
//! Gauss–Hermite for Gaussian references, Gauss–Legendre on a box for
//! compactly supported ones. Error estimates compare the rule with one using
//! three quarters of the nodes.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, NilError, Result};
use crate::haar::Estimate;
use crate::nilgroup::{group_mul, GroupElem, LambdaParams, OrthMat};
use crate::quadrature::{composite_legendre, gauss_hermite, gauss_legendre, Rule};
use crate::quotient::{KFunction, SphericalLabel};

/// `p + p(p-1)/2`.
pub fn algebra_dim(p: usize) -> usize {
    p + p * (p - 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// `exp(-|u|^2 / (2 w^2))`.
    Gaussian,
    /// `exp(-1 / (1 - |u|^2 / w^2))` on `|u| < w`.
    Bump,
}

/// `amplitude * profile(center^{-1} n)`, with `|u|` the Euclidean norm of the
/// exponential coordinates of `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub width: f64,
    pub amplitude: f64,
    pub center: GroupElem,
}

impl TestFunction {
    fn with_kind(kind: TestKind, p: usize, width: f64) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be at least 2, got {p}")));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid(format!("width must be positive, got {width}")));
        }
        Ok(Self { kind, width, amplitude: 1.0, center: GroupElem::identity(p) })
    }

    pub fn gaussian(p: usize, width: f64) -> Result<Self> {
        Self::with_kind(TestKind::Gaussian, p, width)
    }

    pub fn bump(p: usize, width: f64) -> Result<Self> {
        Self::with_kind(TestKind::Bump, p, width)
    }

    pub fn with_center(mut self, center: GroupElem) -> Result<Self> {
        check_dim(self.p(), center.dim())?;
        self.center = center;
        Ok(self)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.amplitude *= s;
        self
    }

    /// Rescaled to unit integral.
    pub fn normalized(self) -> Self {
        let total = self.integral();
        self.scaled(1.0 / total)
    }

    pub fn p(&self) -> usize {
        self.center.dim()
    }

    pub fn dim(&self) -> usize {
        algebra_dim(self.p())
    }

    /// Centered test functions depend only on `|X|^2 + |A|^2`, which is
    /// `O(p)`-invariant.
    pub fn k_invariant(&self) -> bool {
        self.center.is_identity()
    }

    fn profile(&self, rho2: f64) -> f64 {
        match self.kind {
            TestKind::Gaussian => (-0.5 * rho2).exp(),
            TestKind::Bump => {
                if rho2 < 1.0 {
                    (-1.0 / (1.0 - rho2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn eval_offset(&self, u: &GroupElem) -> f64 {
        let n2: f64 = u.x.as_slice().iter().chain(u.a.upper()).map(|c| c * c).sum();
        self.amplitude * self.profile(n2 / (self.width * self.width))
    }

    pub fn eval(&self, g: &GroupElem) -> f64 {
        if self.k_invariant() {
            self.eval_offset(g)
        } else {
            let u = group_mul(&self.center.inverse(), g).expect("dimensions checked");
            self.eval_offset(&u)
        }
    }

    /// `int f dn` in closed form (Gaussian) or by a radial rule (bump).
    pub fn integral(&self) -> f64 {
        let d = self.dim() as i32;
        let w = self.width;
        match self.kind {
            TestKind::Gaussian => self.amplitude * ((2.0 * std::f64::consts::PI).sqrt() * w).powi(d),
            TestKind::Bump => {
                let sphere = unit_sphere_area(self.dim());
                let radial = composite_legendre(&(0..=16).map(|k| k as f64 / 16.0).collect::<Vec<_>>(), 10)
                    .integrate(|t| self.profile(t * t) * t.powi(d - 1));
                self.amplitude * sphere * radial * w.powi(d)
            }
        }
    }

    fn reference(&self) -> Reference {
        match self.kind {
            TestKind::Gaussian => Reference::Gaussian { width: self.width },
            TestKind::Bump => Reference::Box { half_width: self.width },
        }
    }
}

/// Surface area of the unit sphere in `R^d`.
fn unit_sphere_area(d: usize) -> f64 {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2), with Gamma at half-integers by recurrence
    let mut gamma = if d % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if d % 2 == 0 { 1.0 } else { 0.5 };
    while k + 1.0 <= d as f64 / 2.0 {
        gamma *= k;
        k += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma
}

/// Shape of the tensor rule used for an integral over `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reference {
    /// Gauss–Hermite matched to `exp(-|u|^2 / (2 width^2))`.
    Gaussian { width: f64 },
    /// Gauss–Legendre on `[-half_width, half_width]^d`.
    Box { half_width: f64 },
    /// Composite Gauss–Legendre on `[lo, hi]` with `panels` equal panels of
    /// `per_panel` nodes; the node count in [`TensorSpec`] is not used.
    Interval { lo: f64, hi: f64, panels: usize, per_panel: usize },
}

/// Nodes per coordinate of the tensor rules over `F(p)` or `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub nodes: usize,
}

impl TensorSpec {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("tensor rules need at least 2 nodes per coordinate"));
        }
        Ok(Self { nodes })
    }

    /// 32 nodes per coordinate at `p = 2`, 16 at `p = 3`, 6 beyond.
    pub fn default_for(p: usize) -> Self {
        Self { nodes: match p { 2 => 32, 3 => 16, _ => 6 } }
    }

    fn coarse(self) -> Self {
        Self { nodes: (self.nodes - self.nodes / 4).max(1) }
    }
}

/// Lebesgue weights: `int h ~ sum w_i h(x_i)`.
fn rule_1d(reference: Reference, spec: TensorSpec, coarse: bool) -> (Vec<f64>, Vec<f64>) {
    let n = if coarse { spec.coarse().nodes } else { spec.nodes };
    match reference {
        Reference::Gaussian { width } => {
            let gh = gauss_hermite(n);
            let s = std::f64::consts::SQRT_2 * width;
            let x = gh.nodes.iter().map(|t| s * t).collect();
            let w = gh.nodes.iter().zip(&gh.weights).map(|(t, wt)| s * wt * (t * t).exp()).collect();
            (x, w)
        }
        Reference::Box { half_width } => {
            let r = gauss_legendre(n).mapped(-half_width, half_width);
            (r.nodes, r.weights)
        }
        Reference::Interval { lo, hi, panels, per_panel } => {
            let k = if coarse { per_panel - per_panel / 4 } else { per_panel };
            let edges: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
            let r = composite_legendre(&edges, k);
            (r.nodes, r.weights)
        }
    }
}

const CHUNK: usize = 4096;

/// Sums `w(x) h(offset + x)` over the tensor grid; returns the sums and
/// `sum w |h|` (max over components).
fn tensor_sum<H>(offset: &[f64], rules: &[(Vec<f64>, Vec<f64>)], width: usize, h: &H) -> (Vec<Complex64>, f64)
where
    H: Fn(&[f64], &mut [Complex64]) + Sync,
{
    let d = offset.len();
    let total: usize = rules.iter().map(|r| r.0.len()).product();
    let partial: Vec<(Vec<Complex64>, f64)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut coords = vec![0.0; d];
            let mut out = vec![Complex64::new(0.0, 0.0); width];
            let mut acc = vec![Complex64::new(0.0, 0.0); width];
            let mut abs = 0.0;
            for idx in c * CHUNK..total.min((c + 1) * CHUNK) {
                let mut rest = idx;
                let mut weight = 1.0;
                for k in (0..d).rev() {
                    let (x, w) = &rules[k];
                    let i = rest % x.len();
                    rest /= x.len();
                    coords[k] = offset[k] + x[i];
                    weight *= w[i];
                }
                h(&coords, &mut out);
                let mut mx: f64 = 0.0;
                for (a, o) in acc.iter_mut().zip(&out) {
                    *a += weight * o;
                    mx = mx.max(o.norm());
                }
                abs += weight * mx;
            }
            (acc, abs)
        })
        .collect();
    let mut sums = vec![Complex64::new(0.0, 0.0); width];
    let mut abs = 0.0;
    for (acc, a) in partial {
        for (s, v) in sums.iter_mut().zip(acc) {
            *s += v;
        }
        abs += a;
    }
    (sums, abs)
}

/// `int_{R^d} h(z) dz` for each of `width` components, with a rule of the given
/// reference shape centred at `offset`.
pub fn euclid_integrate_many<H>(offset: &[f64], reference: Reference, spec: TensorSpec, width: usize, h: H) -> Vec<Estimate>
where
    H: Fn(&[f64], &mut [Complex64]) + Sync,
{
    product_integrate_many(offset, &vec![reference; offset.len()], spec, width, h)
}

/// Like [`euclid_integrate_many`] with one reference shape per coordinate.
pub fn product_integrate_many<H>(offset: &[f64], references: &[Reference], spec: TensorSpec, width: usize, h: H) -> Vec<Estimate>
where
    H: Fn(&[f64], &mut [Complex64]) + Sync,
{
    assert_eq!(offset.len(), references.len());
    let fine_rules: Vec<_> = references.iter().map(|r| rule_1d(*r, spec, false)).collect();
    let coarse_rules: Vec<_> = references.iter().map(|r| rule_1d(*r, spec, true)).collect();
    let (fine, abs) = tensor_sum(offset, &fine_rules, width, &h);
    let (coarse, _) = tensor_sum(offset, &coarse_rules, width, &h);
    let count: f64 = fine_rules.iter().map(|r| r.0.len() as f64).product();
    fine.into_iter()
        .zip(coarse)
        .map(|(f, c)| Estimate { value: f, err: (f - c).norm() + f64::EPSILON * (count.sqrt() * abs + f.norm()) })
        .collect()
}

fn coords_to_elem(p: usize, coords: &[f64]) -> GroupElem {
    GroupElem::from_coords(p, coords).expect("coordinate length matches")
}

/// `int_{F(p)} h(n) dn` with a rule of the given shape centred at `center`
/// (nodes are `center * u`).
pub fn group_integrate_many<H>(p: usize, center: &GroupElem, reference: Reference, spec: TensorSpec, width: usize, h: H) -> Vec<Estimate>
where
    H: Fn(&GroupElem, &mut [Complex64]) + Sync,
{
    let zero = vec![0.0; algebra_dim(p)];
    let centred = !center.is_identity();
    euclid_integrate_many(&zero, reference, spec, width, |c, out| {
        let u = coords_to_elem(p, c);
        if centred {
            h(&group_mul(center, &u).expect("dimensions checked"), out)
        } else {
            h(&u, out)
        }
    })
}

fn require_k_invariant(f: &TestFunction) -> Result<()> {
    if f.k_invariant() {
        Ok(())
    } else {
        Err(NilError::NotKInvariant)
    }
}

/// `hat f(phi) = int f(n) phi(n^{-1}) dn`, with the orbit integral collapsed by
/// K-invariance of `f` to `int f(n) F(e, n^{-1}) dn`.
pub fn spherical_transform(f: &TestFunction, label: &SphericalLabel, spec: TensorSpec) -> Result<Estimate> {
    Ok(spherical_transform_many(f, std::slice::from_ref(label), spec)?.remove(0))
}

pub fn spherical_transform_many(f: &TestFunction, labels: &[SphericalLabel], spec: TensorSpec) -> Result<Vec<Estimate>> {
    require_k_invariant(f)?;
    let p = f.p();
    for l in labels {
        check_dim(p, l.p())?;
    }
    let fs: Vec<KFunction> = labels.iter().cloned().map(KFunction::Label).collect();
    let id = OrthMat::identity(p);
    Ok(group_integrate_many(p, &f.center, f.reference(), spec, fs.len(), |n, out| {
        let fv = f.eval(n);
        let inv = n.inverse();
        for (o, k) in out.iter_mut().zip(&fs) {
            *o = fv * k.integrand(&id, &inv);
        }
    }))
}

/// Transforms at the type-1 labels `(r, (lambda), l)` for `l = 0..=l_max`, for
/// `p` in `{2, 3}` where `Lambda` has a single entry.
///
/// The integrand depends on `(X_1, X_2)` only through `s = X_1^2 + X_2^2`, so
/// that plane is integrated in `s` (measure `pi ds`) with a composite
/// Gauss–Legendre rule fine enough for the oscillations of `L_l` up to `l_max`;
/// the remaining coordinates use the tensor rule.
pub fn type1_transform_ladder(f: &TestFunction, r: f64, lambda: f64, l_max: u32, spec: TensorSpec) -> Result<Vec<Estimate>> {
    require_k_invariant(f)?;
    let p = f.p();
    if p > 3 {
        return Err(NilError::Unsupported(format!("Laguerre ladders need a single block (p <= 3), got p = {p}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if p == 2 && r != 0.0 {
        return Err(invalid("r must be 0 at p = 2"));
    }
    let width = l_max as usize + 1;
    let s_max = match f.kind {
        // exp(-s / (2 w^2)) < 1e-18
        TestKind::Gaussian => 84.0 * f.width * f.width,
        TestKind::Bump => f.width * f.width,
    };
    let panels = 16 + 2 * l_max as usize;
    let mut refs = vec![Reference::Interval { lo: 0.0, hi: s_max, panels, per_panel: 12 }];
    refs.extend(std::iter::repeat(f.reference()).take(algebra_dim(p) - 2));
    let offset = vec![0.0; refs.len()];
    Ok(product_integrate_many(&offset, &refs, spec, width, |c, out| {
        let sq_plane = c[0];
        let mut full = Vec::with_capacity(algebra_dim(p));
        full.push(sq_plane.sqrt());
        full.push(0.0);
        full.extend_from_slice(&c[1..]);
        let n = coords_to_elem(p, &full);
        // F(e, n^{-1}): every coordinate changes sign
        let x3 = if p == 3 { n.x.as_slice()[2] } else { 0.0 };
        let phase = -r * x3 - lambda * n.a.upper()[0];
        let sq = lambda * sq_plane;
        let base = Complex64::from_polar(std::f64::consts::PI * f.eval(&n) * (-0.25 * sq).exp(), phase);
        // L_l^{(0)}(sq / 2) by the upward recurrence
        let y = 0.5 * sq;
        let (mut prev, mut cur) = (1.0, 1.0 - y);
        out[0] = base;
        if width > 1 {
            out[1] = base * cur;
        }
        for l in 1..width.saturating_sub(1) {
            let k = l as f64;
            let next = ((2.0 * k + 1.0 - y) * cur - k * prev) / (k + 1.0);
            prev = cur;
            cur = next;
            out[l + 1] = base * cur;
        }
    }))
}

/// `(f * g)(n) = int f(m) g(m^{-1} n) dm`, integrating over the narrower factor.
pub fn group_convolution(f: &TestFunction, g: &TestFunction, n: &GroupElem, spec: TensorSpec) -> Result<Estimate> {
    check_dim(f.p(), g.p())?;
    check_dim(f.p(), n.dim())?;
    let p = f.p();
    let est = if g.width < f.width {
        // (f * g)(n) = int f(n u^{-1}) g(u) du
        group_integrate_many(p, &g.center, g.reference(), spec, 1, |u, out| {
            let m = group_mul(n, &u.inverse()).expect("dims");
            out[0] = Complex64::new(f.eval(&m) * g.eval(u), 0.0);
        })
    } else {
        group_integrate_many(p, &f.center, f.reference(), spec, 1, |m, out| {
            let v = group_mul(&m.inverse(), n).expect("dims");
            out[0] = Complex64::new(f.eval(m) * g.eval(&v), 0.0);
        })
    };
    Ok(est[0])
}

fn convolution_reference(f: &TestFunction, g: &TestFunction) -> Reference {
    match (f.kind, g.kind) {
        (TestKind::Gaussian, TestKind::Gaussian) => Reference::Gaussian { width: f.width.hypot(g.width) },
        _ => {
            let (a, b) = (f.width, g.width);
            Reference::Box { half_width: a + b + a * b }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub label: SphericalLabel,
    pub f_hat: Estimate,
    pub g_hat: Estimate,
    pub conv_hat: Estimate,
    pub star_hat: Estimate,
    /// `|(f*g)^ - f^ g^|`.
    pub conv_residual: f64,
    pub conv_err: f64,
    /// `|(f^*)^ - conj(f^)|`.
    pub star_residual: f64,
    pub star_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
}

impl IdentityReport {
    /// Largest residual over labels and both identities.
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.conv_residual.max(r.star_residual)).fold(0.0, f64::max)
    }

    /// Largest `residual / err` over labels and both identities.
    pub fn max_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.conv_residual / r.conv_err).max(r.star_residual / r.star_err))
            .fold(0.0, f64::max)
    }
}

/// Checks `(f*g)^ = f^ g^` and `(f^*)^ = conj(f^)` at each label, with the
/// convolution evaluated by nested quadrature.
pub fn transform_identities(f: &TestFunction, g: &TestFunction, labels: &[SphericalLabel], spec: TensorSpec) -> Result<IdentityReport> {
    require_k_invariant(f)?;
    require_k_invariant(g)?;
    check_dim(f.p(), g.p())?;
    let p = f.p();
    let f_hat = spherical_transform_many(f, labels, spec)?;
    let g_hat = spherical_transform_many(g, labels, spec)?;
    let fs: Vec<KFunction> = labels.iter().cloned().map(KFunction::Label).collect();
    let id = OrthMat::identity(p);
    let width = labels.len();
    // last slot carries the accumulated inner-quadrature error
    let conv = group_integrate_many(p, &GroupElem::identity(p), convolution_reference(f, g), spec, width + 1, |n, out| {
        let c = group_convolution(f, g, n, spec).expect("dims checked");
        let inv = n.inverse();
        for (o, k) in out.iter_mut().zip(&fs) {
            *o = c.value * k.integrand(&id, &inv);
        }
        out[width] = Complex64::new(c.err, 0.0);
    });
    let inner_err = conv[width].value.re.abs();
    let star = group_integrate_many(p, &f.center, f.reference(), spec, width, |n, out| {
        let inv = n.inverse();
        let fs_star = f.eval(&inv);
        for (o, k) in out.iter_mut().zip(&fs) {
            *o = fs_star * k.integrand(&id, &inv);
        }
    });
    let rows = (0..width)
        .map(|i| {
            let (fh, gh, ch, sh) = (f_hat[i], g_hat[i], conv[i], star[i]);
            let conv_residual = (ch.value - fh.value * gh.value).norm();
            let conv_err = ch.err + inner_err + fh.err * gh.value.norm() + gh.err * fh.value.norm() + fh.err * gh.err;
            let star_residual = (sh.value - fh.value.conj()).norm();
            let star_err = sh.err + fh.err;
            IdentityRow { label: labels[i].clone(), f_hat: fh, g_hat: gh, conv_hat: ch, star_hat: sh, conv_residual, conv_err, star_residual, star_err }
        })
        .collect();
    Ok(IdentityReport { rows })
}

/// `c(p)`: `(2 pi)^{-p(p-1)/2 + p'}` for even `p`, `2 (2 pi)^{-p(p-1)/2 + p' - 1}` for odd `p`.
pub fn normalizing_constant(p: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let pp = (p / 2) as i32;
    let half = (p * (p - 1) / 2) as i32;
    if p % 2 == 0 {
        two_pi.powi(-half + pp)
    } else {
        2.0 * two_pi.powi(-half + pp - 1)
    }
}

/// Density of `c(p) * eta'` at `Lambda`, with interior constant `c`.
///
/// Zero entries are rejected; repeated entries give density 0.
pub fn plancherel_density_with(lam: &LambdaParams, p: usize, c: f64) -> Result<f64> {
    check_dim(p / 2, lam.p_prime())?;
    let l = &lam.lambdas;
    if l.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("Plancherel density needs every lambda_i > 0"));
    }
    let power = if p % 2 == 0 { 1 } else { 3 };
    let mut dens: f64 = l.iter().map(|v| v.powi(power)).product();
    for j in 0..l.len() {
        for k in j + 1..l.len() {
            dens *= (l[j] * l[j] - l[k] * l[k]).powi(2);
        }
    }
    Ok(normalizing_constant(p) * c * dens)
}

/// [`plancherel_density_with`] at `c = 1`.
pub fn plancherel_density(lam: &LambdaParams, p: usize) -> Result<f64> {
    plancherel_density_with(lam, p, 1.0)
}

/// Radial Plancherel constant on `lambda > 0` implied by the Heisenberg
/// Plancherel theorem for `F(2) = H^1` with O(2)-invariant functions:
/// `2 (2 pi)^{-2}`, the two signs of `lambda` contributing equally.
pub fn heisenberg_radial_constant() -> f64 {
    2.0 / (2.0 * std::f64::consts::PI).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlancherelSpec {
    pub p: usize,
    /// Rule over `lambda > 0`.
    pub lambda_nodes: Rule,
    pub l_max: u32,
    /// Rule over `r >= 0`; empty for even `p`, where `tau` is the point mass at 0.
    pub r_nodes: Rule,
    /// The constant `c` in `eta'`.
    pub interior_constant: f64,
}

impl PlancherelSpec {
    pub fn new(p: usize, lambda_nodes: Rule, l_max: u32, r_nodes: Rule, interior_constant: f64) -> Result<Self> {
        let sorted_positive = |r: &Rule| r.nodes.windows(2).all(|w| w[0] < w[1]) && r.nodes.iter().all(|x| *x > 0.0);
        if lambda_nodes.is_empty() || !sorted_positive(&lambda_nodes) {
            return Err(invalid("lambda nodes must be positive and strictly increasing"));
        }
        if p % 2 == 0 && !r_nodes.is_empty() {
            return Err(invalid("r nodes must be empty for even p"));
        }
        if p % 2 == 1 && (r_nodes.is_empty() || !sorted_positive(&r_nodes)) {
            return Err(invalid("r nodes must be positive and strictly increasing for odd p"));
        }
        if !(interior_constant > 0.0) {
            return Err(invalid("interior constant must be positive"));
        }
        Ok(Self { p, lambda_nodes, l_max, r_nodes, interior_constant })
    }

    /// `lambda, r` in `(0, range]` by composite Gauss–Legendre, `l <= l_max`, `c = 1`.
    pub fn with_range(p: usize, range: f64, panels: usize, per_panel: usize, l_max: u32) -> Result<Self> {
        if !(range > 0.0) || panels == 0 || per_panel == 0 {
            return Err(invalid("range, panels and nodes must be positive"));
        }
        let edges: Vec<f64> = (0..=panels).map(|k| range * k as f64 / panels as f64).collect();
        let lambda = composite_legendre(&edges, per_panel);
        let r = if p % 2 == 0 { Rule { nodes: vec![], weights: vec![] } } else { lambda.clone() };
        Self::new(p, lambda, l_max, r, 1.0)
    }

    /// Range `6 / width` with 12 panels of 8 nodes and `l_max = 64`.
    pub fn default_for(p: usize, width: f64) -> Result<Self> {
        Self::with_range(p, 6.0 / width, 12, 8, 64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlancherelTerm {
    pub lambda: f64,
    pub r: f64,
    /// `sum_l |hat f|^2`.
    pub ladder_sum: f64,
    /// Weighted contribution to the right-hand side.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlancherelResult {
    /// `||f||_2^2`.
    pub lhs: f64,
    pub lhs_err: f64,
    /// `int |hat f|^2 dm*`, truncated.
    pub rhs: f64,
    pub rhs_err: f64,
    /// `|lhs - rhs| / lhs`.
    pub rel_err: f64,
    /// Scalar `c` minimizing `|lhs - c rhs|`, i.e. `lhs / rhs`.
    pub best_fit: f64,
    pub terms: Vec<PlancherelTerm>,
}

/// Compares `||f||_2^2` with `int |hat f|^2 dm*` for `p` in `{2, 3}`.
pub fn plancherel_verify(f: &TestFunction, pspec: &PlancherelSpec, spec: TensorSpec) -> Result<PlancherelResult> {
    require_k_invariant(f)?;
    let p = f.p();
    check_dim(pspec.p, p)?;
    if p > 3 {
        return Err(NilError::Unsupported(format!("Plancherel verification is implemented for p <= 3, got p = {p}")));
    }
    let lhs = group_integrate_many(p, &f.center, f.reference(), spec, 1, |n, out| {
        let v = f.eval(n);
        out[0] = Complex64::new(v * v, 0.0);
    })[0];
    let r_rule: Vec<(f64, f64)> = if p % 2 == 0 {
        vec![(0.0, 1.0)]
    } else {
        pspec.r_nodes.nodes.iter().copied().zip(pspec.r_nodes.weights.iter().copied()).collect()
    };
    let mut rhs = 0.0;
    let mut rhs_err = 0.0;
    let mut terms = Vec::new();
    for (&lambda, &wl) in pspec.lambda_nodes.nodes.iter().zip(&pspec.lambda_nodes.weights) {
        let lam = crate::nilgroup::spectral_params(&[lambda])?;
        let density = plancherel_density_with(&lam, p, pspec.interior_constant)?;
        for &(r, wr) in &r_rule {
            let ladder = type1_transform_ladder(f, r, lambda, pspec.l_max, spec)?;
            let sum: f64 = ladder.iter().map(|e| e.value.norm_sqr()).sum();
            let err: f64 = ladder.iter().map(|e| e.err * (2.0 * e.value.norm() + e.err)).sum();
            let weight = wl * wr * density;
            rhs += weight * sum;
            rhs_err += weight * err;
            terms.push(PlancherelTerm { lambda, r, ladder_sum: sum, contribution: weight * sum });
        }
    }
    let lhs_v = lhs.value.re;
    Ok(PlancherelResult {
        lhs: lhs_v,
        lhs_err: lhs.err,
        rhs,
        rhs_err,
        rel_err: (lhs_v - rhs).abs() / lhs_v,
        best_fit: lhs_v / rhs,
        terms,
    })
}

/// `F(f)(w) = int f(z) e^{-i r <z, w>} dz` over `R^d`, with a rule of the given
/// shape centred at `offset`.
pub fn euclid_fourier<F>(f: F, w: &[f64], r: f64, offset: &[f64], reference: Reference, spec: TensorSpec) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    check_dim(offset.len(), w.len())?;
    Ok(euclid_integrate_many(offset, reference, spec, 1, |z, out| {
        let dot: f64 = z.iter().zip(w).map(|(a, b)| a * b).sum();
        out[0] = f(z) * Complex64::from_polar(1.0, -r * dot);
    })[0])
}

/// Gaussian `exp(-|z - c|^2 / (2 s^2)) e^{i <b, z>}` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
struct Gauss {
    center: Vec<f64>,
    width: f64,
    modulation: Vec<f64>,
    scale: Complex64,
}

impl Gauss {
    fn eval(&self, z: &[f64]) -> Complex64 {
        let mut n2 = 0.0;
        let mut ph = 0.0;
        for i in 0..z.len() {
            let d = z[i] - self.center[i];
            n2 += d * d;
            ph += self.modulation[i] * z[i];
        }
        self.scale * Complex64::from_polar((-0.5 * n2 / (self.width * self.width)).exp(), ph)
    }

    fn reference(&self) -> Reference {
        Reference::Gaussian { width: self.width }
    }

    fn fourier(&self, w: &[f64], r: f64, spec: TensorSpec) -> Estimate {
        euclid_fourier(|z| self.eval(z), w, r, &self.center, self.reference(), spec).expect("dims")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSuiteReport {
    pub dim: usize,
    pub points: usize,
    /// Max `|F(c1 f1 + c2 f2) - c1 F(f1) - c2 F(f2)|`.
    pub linearity: f64,
    /// Whether `|F(f)(w)| <= ||f||_1` held at every tested point.
    pub bound_holds: bool,
    /// Smallest `||f||_1 - |F(f)(w)|` seen.
    pub bound_margin: f64,
    /// Max `|F(f*g) - F(f) F(g)|` relative to `||f||_1 ||g||_1`.
    pub convolution: f64,
    /// Max `|F(f~) - conj F(f)|` relative to `||f||_1`.
    pub involution: f64,
    /// Max `|F(L_z' f) - e^{-i r <z', w>} F(f)|` relative to `||f||_1`.
    pub translation: f64,
    /// Max `|F(e^{i r <z', .>} f)(w) - F(f)(w - z')|` relative to `||f||_1`.
    pub modulation: f64,
    /// `|‖F f‖^2 - (2 pi)^d ‖f‖^2| / ((2 pi)^d ‖f‖^2)` at `r = 1`.
    pub parseval_rel_err: f64,
    /// `‖F_r f‖^2 / ((2 pi)^d ‖f‖^2)` at `r = 2`; measured, not asserted.
    pub parseval_ratio_r2: f64,
}

fn test_points(d: usize) -> Vec<Vec<f64>> {
    let pattern = [0.0, 0.45, -0.8, 1.3, -1.7, 0.25];
    (0..6).map(|k| (0..d).map(|i| if k == 0 { 0.0 } else { pattern[(i + k) % 6] * (1.0 + 0.1 * k as f64) }).collect()).collect()
}

fn l1_norm(g: &Gauss, d: usize) -> f64 {
    g.scale.norm() * ((2.0 * std::f64::consts::PI).sqrt() * g.width).powi(d as i32)
}

fn squared_norm_fourier(g: &Gauss, d: usize, r: f64, spec: TensorSpec, outer: TensorSpec) -> f64 {
    let zero = vec![0.0; d];
    // |F f| is a Gaussian of width 1 / (r s)
    let reference = Reference::Gaussian { width: 1.0 / (r * g.width) };
    euclid_integrate_many(&zero, reference, outer, 1, |w, out| {
        out[0] = Complex64::new(g.fourier(w, r, spec).value.norm_sqr(), 0.0);
    })[0]
        .value
        .re
}

/// Linearity, the `L^1` bound, convolution, involution, translation and
/// modulation identities and Parseval for Gaussians on `R^dim`.
pub fn fourier_property_suite(dim: usize, spec: TensorSpec, parseval_outer: TensorSpec) -> Result<FourierSuiteReport> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let vec_of = |vals: &[f64]| (0..dim).map(|i| vals[i % vals.len()]).collect::<Vec<f64>>();
    let f1 = Gauss { center: vec_of(&[0.3, -0.2, 0.1]), width: 0.8, modulation: vec![0.0; dim], scale: Complex64::new(1.0, 0.0) };
    let f2 = Gauss { center: vec_of(&[-0.4, 0.5, 0.2]), width: 1.1, modulation: vec_of(&[0.7, -0.3, 0.4]), scale: Complex64::new(1.0, 0.0) };
    let f3 = Gauss { center: vec_of(&[0.1, 0.25, -0.35]), width: 0.6, modulation: vec![0.0; dim], scale: Complex64::new(1.0, 0.0) };
    let shift = vec_of(&[0.5, -0.25, 0.75]);
    let points = test_points(dim);
    let r = 1.0;
    let c1 = Complex64::new(1.5, -0.5);
    let c2 = Complex64::new(-0.25, 2.0);
    let zero = vec![0.0; dim];
    let common = Reference::Gaussian { width: 1.0 };

    let mut report = FourierSuiteReport {
        dim,
        points: points.len(),
        linearity: 0.0,
        bound_holds: true,
        bound_margin: f64::INFINITY,
        convolution: 0.0,
        involution: 0.0,
        translation: 0.0,
        modulation: 0.0,
        parseval_rel_err: 0.0,
        parseval_ratio_r2: 0.0,
    };

    // conv = f1 * f3, a Gaussian with summed centres and variances
    let s2 = f1.width * f1.width + f3.width * f3.width;
    let conv = Gauss {
        center: f1.center.iter().zip(&f3.center).map(|(a, b)| a + b).collect(),
        width: s2.sqrt(),
        modulation: vec![0.0; dim],
        scale: Complex64::new((2.0 * std::f64::consts::PI * f1.width.powi(2) * f3.width.powi(2) / s2).powf(dim as f64 / 2.0), 0.0),
    };
    let tilde = Gauss { center: f2.center.iter().map(|c| -c).collect(), width: f2.width, modulation: f2.modulation.clone(), scale: f2.scale };
    // f2(z - z') = e^{-i <b, z'>} * (Gaussian at c + z', same modulation b)
    let bz: f64 = f2.modulation.iter().zip(&shift).map(|(b, z)| b * z).sum();
    let translated = Gauss {
        center: f2.center.iter().zip(&shift).map(|(c, s)| c + s).collect(),
        scale: f2.scale * Complex64::from_polar(1.0, -bz),
        ..f2.clone()
    };
    let modulated = Gauss { modulation: f2.modulation.iter().zip(&shift).map(|(b, s)| b + r * s).collect(), ..f2.clone() };
    let n2 = l1_norm(&f2, dim);

    for w in &points {
        let a = euclid_fourier(|z| f1.eval(z), w, r, &zero, common, spec)?.value;
        let b = euclid_fourier(|z| f2.eval(z), w, r, &zero, common, spec)?.value;
        let comb = euclid_fourier(|z| c1 * f1.eval(z) + c2 * f2.eval(z), w, r, &zero, common, spec)?.value;
        report.linearity = report.linearity.max((comb - c1 * a - c2 * b).norm());

        for g in [&f1, &f2, &f3] {
            let value = g.fourier(w, r, spec).value.norm();
            let norm1 = euclid_integrate_many(&g.center, g.reference(), spec, 1, |z, out| out[0] = Complex64::new(g.eval(z).norm(), 0.0))[0].value.re;
            report.bound_holds &= value <= norm1;
            report.bound_margin = report.bound_margin.min(norm1 - value);
        }

        let lhs = conv.fourier(w, r, spec).value;
        let rhs = f1.fourier(w, r, spec).value * f3.fourier(w, r, spec).value;
        report.convolution = report.convolution.max((lhs - rhs).norm() / (l1_norm(&f1, dim) * l1_norm(&f3, dim)));

        let ft = tilde.fourier(w, r, spec).value;
        let f2w = f2.fourier(w, r, spec).value;
        report.involution = report.involution.max((ft - f2w.conj()).norm() / n2);

        let dot: f64 = shift.iter().zip(w).map(|(a, b)| a * b).sum();
        let lt = translated.fourier(w, r, spec).value;
        report.translation = report.translation.max((lt - Complex64::from_polar(1.0, -r * dot) * f2w).norm() / n2);

        let wm: Vec<f64> = w.iter().zip(&shift).map(|(a, b)| a - b).collect();
        let md = modulated.fourier(w, r, spec).value;
        report.modulation = report.modulation.max((md - f2.fourier(&wm, r, spec).value).norm() / n2);
    }

    let two_pi_d = (2.0 * std::f64::consts::PI).powi(dim as i32);
    let norm2 = euclid_integrate_many(&f1.center, f1.reference(), spec, 1, |z, out| out[0] = Complex64::new(f1.eval(z).norm_sqr(), 0.0))[0].value.re;
    let lhs = squared_norm_fourier(&f1, dim, 1.0, spec, parseval_outer);
    report.parseval_rel_err = (lhs - two_pi_d * norm2).abs() / (two_pi_d * norm2);
    report.parseval_ratio_r2 = squared_norm_fourier(&f1, dim, 2.0, spec, parseval_outer) / (two_pi_d * norm2);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::QuadratureSpec;
    use crate::heisenberg::block_bessel;
    use crate::nilgroup::spectral_params;
    use crate::quotient::spherical_value;
    use std::f64::consts::PI;

    fn t1(p: usize, r: f64, lambda: f64, l: u32) -> SphericalLabel {
        SphericalLabel::type1(p, r, spectral_params(&[lambda]).unwrap(), vec![l]).unwrap()
    }

    /// Closed form at p = 2 for the unit-amplitude Gaussian of width w:
    /// sqrt(2 pi) w e^{-lambda^2 w^2 / 2} * pi (b - c)^l / b^{l+1},
    /// with b = 1/(2 w^2) + lambda/4 and c = lambda/2.
    fn gaussian_type1_p2(w: f64, lambda: f64, l: u32) -> f64 {
        let b = 0.5 / (w * w) + 0.25 * lambda;
        let c = 0.5 * lambda;
        (2.0 * PI).sqrt() * w * (-0.5 * lambda * lambda * w * w).exp() * PI * (b - c).powi(l as i32) / b.powi(l as i32 + 1)
    }

    #[test]
    fn integrals_of_test_functions() {
        let g = TestFunction::gaussian(2, 0.7).unwrap();
        let q = group_integrate_many(2, &g.center, g.reference(), TensorSpec::new(20).unwrap(), 1, |n, o| o[0] = Complex64::new(g.eval(n), 0.0));
        assert!((q[0].value.re - g.integral()).abs() < 1e-12 * g.integral());
        let b = TestFunction::bump(2, 1.3).unwrap();
        let q = group_integrate_many(2, &b.center, b.reference(), TensorSpec::new(48).unwrap(), 1, |n, o| o[0] = Complex64::new(b.eval(n), 0.0));
        assert!((q[0].value.re - b.integral()).abs() < 1e-5 * b.integral(), "{} {}", q[0].value.re, b.integral());
        assert!((g.clone().normalized().integral() - 1.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn type1_transform_matches_closed_form() {
        let w = 0.9;
        let f = TestFunction::gaussian(2, w).unwrap();
        let spec = TensorSpec::default_for(2);
        for lambda in [0.3, 1.0, 2.5] {
            let ladder = type1_transform_ladder(&f, 0.0, lambda, 6, spec).unwrap();
            for l in 0..=6u32 {
                let want = gaussian_type1_p2(w, lambda, l);
                let direct = spherical_transform(&f, &t1(2, 0.0, lambda, l), spec).unwrap();
                assert!((ladder[l as usize].value.re - want).abs() < 1e-9, "lambda={lambda} l={l}: {} vs {want}", ladder[l as usize].value);
                assert!((direct.value - ladder[l as usize].value).norm() < 1e-6);
                assert!(direct.value.im.abs() < 1e-12);
                assert!(direct.err < 1e-4);
            }
        }
    }

    #[test]
    fn reduced_form_matches_orbit_average() {
        // int f(n) phi(n^{-1}) dn with phi from the Haar rule
        let f = TestFunction::gaussian(2, 0.8).unwrap();
        let spec = TensorSpec::new(16).unwrap();
        let haar = QuadratureSpec::exact2(32);
        for label in [t1(2, 0.0, 1.2, 1), SphericalLabel::type2(2, 0.9).unwrap()] {
            let kf = KFunction::Label(label.clone());
            let full = group_integrate_many(2, &f.center, f.reference(), spec, 1, |n, o| {
                o[0] = f.eval(n) * spherical_value(&kf, &n.inverse(), &haar).unwrap().value;
            })[0];
            let reduced = spherical_transform(&f, &label, spec).unwrap();
            assert!((full.value - reduced.value).norm() < 1e-9, "{full:?} vs {reduced:?}");
        }
    }

    #[test]
    fn type2_transform_polar_oracle() {
        let w = 1.1;
        let f = TestFunction::gaussian(2, w).unwrap();
        let spec = TensorSpec::default_for(2);
        let edges: Vec<f64> = (0..=20).map(|k| k as f64 * 0.6 * w).collect();
        let radial = composite_legendre(&edges, 10);
        for r in [0.5, 1.0, 2.0] {
            let got = spherical_transform(&f, &SphericalLabel::type2(2, r).unwrap(), spec).unwrap();
            let polar = (2.0 * PI).sqrt() * w * 2.0 * PI * radial.integrate(|rho| (-0.5 * rho * rho / (w * w)).exp() * block_bessel(1, r * rho) * rho);
            assert!((got.value.re - polar).abs() < 1e-6, "r={r}: {} vs {polar}", got.value);
        }
    }

    #[test]
    fn transform_of_constant_and_bound() {
        let f = TestFunction::gaussian(2, 0.6).unwrap().scaled(1.7);
        let spec = TensorSpec::default_for(2);
        let one = spherical_transform(&f, &SphericalLabel::type2(2, 0.0).unwrap(), spec).unwrap();
        assert!((one.value.re - f.integral()).abs() < 1e-12 * f.integral());
        let labels = [t1(2, 0.0, 0.5, 0), t1(2, 0.0, 3.0, 4), SphericalLabel::type2(2, 2.0).unwrap()];
        for e in spherical_transform_many(&f, &labels, spec).unwrap() {
            assert!(e.value.norm() <= f.integral());
        }
        let b = TestFunction::bump(2, 1.0).unwrap();
        for e in spherical_transform_many(&b, &labels, TensorSpec::new(24).unwrap()).unwrap() {
            assert!(e.value.norm() <= b.integral());
        }
        let p3 = TestFunction::gaussian(3, 0.8).unwrap();
        let e = spherical_transform(&p3, &t1(3, 0.7, 1.0, 1), TensorSpec::new(8).unwrap()).unwrap();
        assert!(e.value.norm() <= p3.integral());
    }

    #[test]
    fn non_invariant_functions_are_rejected() {
        let c = GroupElem::from_parts(vec![0.5, 0.0], vec![0.0]).unwrap();
        let f = TestFunction::gaussian(2, 1.0).unwrap().with_center(c).unwrap();
        assert!(!f.k_invariant());
        let spec = TensorSpec::new(8).unwrap();
        assert!(matches!(spherical_transform(&f, &t1(2, 0.0, 1.0, 0), spec), Err(NilError::NotKInvariant)));
        let pspec = PlancherelSpec::default_for(2, 1.0).unwrap();
        assert!(matches!(plancherel_verify(&f, &pspec, spec), Err(NilError::NotKInvariant)));
        assert!(TestFunction::gaussian(2, 0.0).is_err());
    }

    #[test]
    fn convolution_and_involution_identities() {
        let f = TestFunction::gaussian(2, 0.5).unwrap();
        let spec = TensorSpec::new(14).unwrap();
        let labels = [t1(2, 0.0, 1.0, 0), t1(2, 0.0, 2.0, 2), SphericalLabel::type2(2, 1.5).unwrap()];
        let rep = transform_identities(&f, &f, &labels, spec).unwrap();
        assert!(rep.max_residual() <= 1e-4, "{}", rep.max_residual());
        assert!(rep.max_ratio() <= 5.0, "{}", rep.max_ratio());
        for row in &rep.rows {
            // f real and symmetric under inversion: the transform is real
            assert!(row.f_hat.value.im.abs() < 1e-12);
        }
    }

    #[test]
    fn approximate_identity() {
        let f = TestFunction::gaussian(2, 0.8).unwrap();
        let g = TestFunction::gaussian(2, 0.05).unwrap().normalized();
        let labels = [t1(2, 0.0, 1.0, 1), SphericalLabel::type2(2, 1.0).unwrap()];
        let rep = transform_identities(&f, &g, &labels, TensorSpec::new(12).unwrap()).unwrap();
        for row in &rep.rows {
            let rel = (row.conv_hat.value - row.f_hat.value).norm() / row.f_hat.value.norm();
            assert!(rel < 0.05, "{rel}");
        }
    }

    #[test]
    fn convolution_square_has_nonnegative_transform() {
        // f * f^* is positive definite
        let f = TestFunction::gaussian(2, 0.6).unwrap();
        let labels: Vec<_> = [(0.5, 0), (1.0, 1), (4.0, 1), (6.0, 3)].iter().map(|(l, k)| t1(2, 0.0, *l, *k)).collect();
        let rep = transform_identities(&f, &f, &labels, TensorSpec::new(12).unwrap()).unwrap();
        for row in &rep.rows {
            assert!(row.conv_hat.value.re >= -row.conv_err, "{row:?}");
        }
    }

    #[test]
    fn density_values() {
        let lam = spectral_params(&[1.7]).unwrap();
        assert!((plancherel_density(&lam, 2).unwrap() - 1.7).abs() < 1e-15);
        let want = 2.0 * (2.0 * PI).powi(-3) * 1.7f64.powi(3);
        assert!((plancherel_density(&lam, 3).unwrap() - want).abs() < 1e-15 * want);
        assert_eq!(plancherel_density(&spectral_params(&[1.0, 1.0]).unwrap(), 4).unwrap(), 0.0);
        assert!(plancherel_density(&spectral_params(&[1.0, 0.0]).unwrap(), 4).is_err());
        assert!(plancherel_density(&lam, 4).is_err());
        assert_eq!(normalizing_constant(2), 1.0);
        assert!((normalizing_constant(4) - (2.0 * PI).powi(-4)).abs() < 1e-18);
    }

    #[test]
    fn plancherel_scaling_and_monotonicity() {
        let f = TestFunction::gaussian(2, 1.0).unwrap();
        let spec = TensorSpec::new(20).unwrap();
        let base = plancherel_verify(&f, &PlancherelSpec::with_range(2, 6.0, 6, 6, 24).unwrap(), spec).unwrap();
        let doubled = plancherel_verify(&f.clone().scaled(2.0), &PlancherelSpec::with_range(2, 6.0, 6, 6, 24).unwrap(), spec).unwrap();
        assert!((doubled.lhs - 4.0 * base.lhs).abs() < 1e-12 * doubled.lhs);
        assert!((doubled.rhs - 4.0 * base.rhs).abs() < 1e-12 * doubled.rhs);
        assert!((doubled.rel_err - base.rel_err).abs() < 1e-12);
        let mut prev = 0.0;
        for (range, l_max) in [(1.0, 2), (2.0, 6), (4.0, 12), (6.0, 24)] {
            let res = plancherel_verify(&f, &PlancherelSpec::with_range(2, range, 6, 6, l_max).unwrap(), spec).unwrap();
            assert!(res.rhs >= prev);
            prev = res.rhs;
        }
    }

    #[test]
    fn plancherel_rhs_matches_closed_form_sum() {
        // with the closed-form transform the lambda integral is 2 pi^{7/2} w^3
        let w = 1.0;
        let f = TestFunction::gaussian(2, w).unwrap();
        let pspec = PlancherelSpec::default_for(2, w).unwrap();
        let res = plancherel_verify(&f, &pspec, TensorSpec::default_for(2)).unwrap();
        let truncated: f64 = pspec
            .lambda_nodes
            .nodes
            .iter()
            .zip(&pspec.lambda_nodes.weights)
            .map(|(lambda, wl)| wl * lambda * (0..=pspec.l_max).map(|l| gaussian_type1_p2(w, *lambda, l).powi(2)).sum::<f64>())
            .sum();
        assert!((res.rhs - truncated).abs() < 1e-8 * truncated, "{} vs {truncated}", res.rhs);
        // l <= 64 loses about int 4 pi^3 e^{-130 lambda} d lambda near lambda = 0
        let oracle = 2.0 * PI.powf(3.5) * w.powi(3);
        assert!((res.rhs - oracle).abs() < 0.02 * oracle, "{} vs {oracle}", res.rhs);
        assert!((res.lhs - PI.powf(1.5) * w.powi(3)).abs() < 1e-12);
        // the Heisenberg Plancherel constant closes the identity
        let closed = heisenberg_radial_constant() * res.rhs;
        assert!((closed - res.lhs).abs() < 0.05 * res.lhs);
    }

    #[test]
    fn plancherel_at_p3_runs_and_is_monotone_in_l() {
        let f = TestFunction::gaussian(3, 1.0).unwrap();
        let spec = TensorSpec::new(6).unwrap();
        let a = plancherel_verify(&f, &PlancherelSpec::with_range(3, 4.0, 2, 3, 1).unwrap(), spec).unwrap();
        let b = plancherel_verify(&f, &PlancherelSpec::with_range(3, 4.0, 2, 3, 4).unwrap(), spec).unwrap();
        assert!(b.rhs >= a.rhs && a.rhs > 0.0);
        let f4 = TestFunction::gaussian(4, 1.0).unwrap();
        let lam = Rule { nodes: vec![1.0], weights: vec![1.0] };
        let empty = Rule { nodes: vec![], weights: vec![] };
        let pspec = PlancherelSpec::new(4, lam, 1, empty, 1.0).unwrap();
        assert!(matches!(plancherel_verify(&f4, &pspec, spec), Err(NilError::Unsupported(_))));
    }

    #[test]
    fn euclid_fourier_gaussian_oracle() {
        let d = 3;
        let f = |z: &[f64]| Complex64::new((-0.5 * z.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0);
        let zero = vec![0.0; d];
        let spec = TensorSpec::new(24).unwrap();
        for w in test_points(d) {
            let got = euclid_fourier(f, &w, 1.0, &zero, Reference::Gaussian { width: 1.0 }, spec).unwrap();
            let w2: f64 = w.iter().map(|v| v * v).sum();
            let want = (2.0 * PI).powf(1.5) * (-0.5 * w2).exp();
            assert!((got.value - want).norm() < 1e-12, "{w:?}");
            assert!(got.value.norm() <= (2.0 * PI).powf(1.5) + 1e-12);
        }
    }

    #[test]
    fn fourier_suite_small() {
        let rep = fourier_property_suite(2, TensorSpec::new(24).unwrap(), TensorSpec::new(12).unwrap()).unwrap();
        assert!(rep.linearity <= 1e-10);
        assert!(rep.bound_holds);
        assert!(rep.convolution <= 1e-5 && rep.involution <= 1e-5 && rep.translation <= 1e-5 && rep.modulation <= 1e-5, "{rep:?}");
        assert!(rep.parseval_rel_err <= 0.01);
        assert!((rep.parseval_ratio_r2 - 0.25).abs() < 1e-3, "{}", rep.parseval_ratio_r2);
    }
}
