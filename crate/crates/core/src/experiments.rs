//! The named experiments behind the command-line runner. Each one produces raw
//! rows and a list of pass/fail checks against fixed tolerances.

use nalgebra::SymmetricEigen;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, NilError, Result};
use crate::haar::{derive_seed, haar_sample, QuadratureSpec, DEFAULT_EXACT2_NODES, DEFAULT_MC_SAMPLES};
use crate::heisenberg::{finite_difference_eigenvalues, h_mul, type1_series_value, type1_value, HSphericalLabel, HeisenbergPoint};
use crate::laguerre::{exact_coeff_bound, exact_scaled_coefficient};
use crate::nilgroup::{act, bracket, canonical_form, d2, group_mul, spectral_params, z_inner, GroupElem, LambdaParams, SkewZ, VecV};
use crate::quotient::{project_to_heisenberg, CompactGrid, KFunction, QuotientMap, SphericalLabel};
use crate::report::{fmt_f64, Check, ExperimentReport};
use crate::topology::{completeness_check, convergence_experiment, density_experiment, residual_scan, LabelSequence, Verdict};
use crate::transform::{
    algebra_dim, fourier_property_suite, heisenberg_radial_constant, plancherel_verify, PlancherelSpec, TensorSpec, TestFunction,
};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CoreIdentities,
    HeisenbergOracle,
    SpectrumEval,
    Convergence,
    Completeness,
    Density,
    Plancherel,
    FourierSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::CoreIdentities,
        Experiment::HeisenbergOracle,
        Experiment::SpectrumEval,
        Experiment::Convergence,
        Experiment::Completeness,
        Experiment::Density,
        Experiment::Plancherel,
        Experiment::FourierSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CoreIdentities => "core-identities",
            Self::HeisenbergOracle => "heisenberg-oracle",
            Self::SpectrumEval => "spectrum-eval",
            Self::Convergence => "convergence",
            Self::Completeness => "completeness",
            Self::Density => "density",
            Self::Plancherel => "plancherel",
            Self::FourierSuite => "fourier-suite",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| invalid(format!("unknown experiment '{name}'")))
    }

    /// The mathematical statement the experiment exercises.
    pub fn statement(self) -> &'static str {
        match self {
            Self::CoreIdentities => "group law, bracket and canonical form identities; the Heisenberg projection is a homomorphism",
            Self::HeisenbergOracle => "Heisenberg series equals the Laguerre closed form; coefficient sign law and bound; eigenvalues",
            Self::SpectrumEval => "type-1 and type-2 functions satisfy the spherical functional equation",
            Self::Convergence => "uniform convergence on compacta iff convergence of eigenvalues and r",
            Self::Completeness => "the spectrum is complete: limits of convergent sequences are spherical",
            Self::Density => "type-1 functions with shrinking Lambda approximate type-2 functions",
            Self::Plancherel => "Plancherel formula for K-invariant functions at p = 2",
            Self::FourierSuite => "Fourier transform identities and Parseval on R^d",
        }
    }

    pub fn budget_meaning(self) -> &'static str {
        match self {
            Self::CoreIdentities => "random samples per p",
            Self::HeisenbergOracle => "grid points per axis in |z| and t",
            Self::SpectrumEval => "Monte Carlo samples for p >= 3",
            Self::Convergence => "Monte Carlo samples",
            Self::Completeness | Self::Density => "Haar quadrature size (exact nodes for p <= 3, samples otherwise)",
            Self::Plancherel | Self::FourierSuite => "tensor quadrature nodes per axis",
        }
    }

    pub fn default_budget(self, p: usize) -> usize {
        match self {
            Self::CoreIdentities => 1000,
            Self::HeisenbergOracle => 10,
            Self::SpectrumEval | Self::Convergence => DEFAULT_MC_SAMPLES,
            Self::Completeness => pair_spec(p, 0, None).nodes,
            Self::Density => QuadratureSpec::default_for(p, 0).nodes,
            Self::Plancherel | Self::FourierSuite => TensorSpec::default_for(p).nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub p: usize,
    pub seed: u64,
    /// Overrides [`Experiment::default_budget`].
    pub budget: Option<usize>,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, p: 2, seed: 0, budget: None }
    }

    pub fn budget(&self) -> usize {
        self.budget.unwrap_or_else(|| self.experiment.default_budget(self.p))
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(invalid(format!("p must be at least 2, got {}", self.p)));
        }
        if self.budget == Some(0) {
            return Err(invalid("budget must be positive"));
        }
        match self.experiment {
            Experiment::HeisenbergOracle | Experiment::Plancherel | Experiment::FourierSuite if self.budget() < 2 => {
                Err(invalid("this experiment needs a budget of at least 2"))
            }
            Experiment::Plancherel if self.p > 3 => {
                Err(NilError::Unsupported(format!("Plancherel verification is implemented for p <= 3, got p = {}", self.p)))
            }
            _ => Ok(()),
        }
    }
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rep = match cfg.experiment {
        Experiment::CoreIdentities => core_identities(cfg),
        Experiment::HeisenbergOracle => heisenberg_oracle(cfg),
        Experiment::SpectrumEval => spectrum_eval(cfg),
        Experiment::Convergence => convergence(cfg),
        Experiment::Completeness => completeness(cfg),
        Experiment::Density => density(cfg),
        Experiment::Plancherel => plancherel(cfg),
        Experiment::FourierSuite => fourier_suite(cfg),
    }?;
    rep.detail("p", json!(cfg.p));
    rep.detail("seed", json!(cfg.seed));
    rep.detail("budget", json!(cfg.budget()));
    Ok(rep)
}

/// Exact rule at `p = 2`, Monte Carlo otherwise; for double Haar integrals.
fn pair_spec(p: usize, seed: u64, budget: Option<usize>) -> QuadratureSpec {
    if p == 2 {
        QuadratureSpec::exact2(budget.unwrap_or(DEFAULT_EXACT2_NODES))
    } else {
        QuadratureSpec::monte_carlo(budget.unwrap_or(DEFAULT_MC_SAMPLES), seed)
    }
}

fn with_p(base: &[usize], p: usize) -> Vec<usize> {
    let mut ps = base.to_vec();
    if !ps.contains(&p) {
        ps.push(p);
    }
    ps
}

fn rand_vec(rng: &mut ChaCha8Rng, p: usize) -> VecV {
    VecV::new((0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("length p")
}

fn rand_skew(rng: &mut ChaCha8Rng, p: usize) -> SkewZ {
    SkewZ::from_upper(p, (0..p * (p - 1) / 2).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("length p(p-1)/2")
}

fn rand_elem(rng: &mut ChaCha8Rng, p: usize) -> GroupElem {
    GroupElem::new(rand_vec(rng, p), rand_skew(rng, p)).expect("matching dimensions")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn h_diff(a: &HeisenbergPoint, b: &HeisenbergPoint) -> f64 {
    a.z.iter().zip(&b.z).map(|(x, y)| (x - y).norm()).fold((a.t - b.t).abs(), f64::max)
}

const IDENTITY_TOL: f64 = 1e-10;

fn core_identities(cfg: &RunConfig) -> Result<ExperimentReport> {
    let n = cfg.budget();
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["identity", "p", "samples", "max_residual"]);
    let names = [
        "bracket antisymmetry",
        "bracket equivariance under O(p)",
        "pairing <A,[X,Y]> = <AX,Y>",
        "group associativity",
        "O(p) acts by automorphisms",
    ];
    let mut worst = [0.0f64; 5];
    for p in with_p(&[2, 3, 4], cfg.p) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, p as u64));
        let ks = haar_sample(p, derive_seed(cfg.seed, 1000 + p as u64), n);
        let mut m = [0.0f64; 5];
        for k in &ks {
            let (x, y, a) = (rand_vec(&mut rng, p), rand_vec(&mut rng, p), rand_skew(&mut rng, p));
            let bxy = bracket(&x, &y)?;
            m[0] = m[0].max(max_abs_diff(bxy.add(&bracket(&y, &x)?)?.upper(), &vec![0.0; bxy.upper().len()]));
            let kx = act(k, &GroupElem::new(x.clone(), SkewZ::zeros(p))?)?.x;
            let ky = act(k, &GroupElem::new(y.clone(), SkewZ::zeros(p))?)?.x;
            let kb = act(k, &GroupElem::new(VecV::zeros(p), bxy.clone())?)?.a;
            m[1] = m[1].max(max_abs_diff(bracket(&kx, &ky)?.upper(), kb.upper()));
            m[2] = m[2].max((z_inner(&a, &bxy)? - a.apply(&x)?.dot(&y)).abs());
            let (g, h, u) = (rand_elem(&mut rng, p), rand_elem(&mut rng, p), rand_elem(&mut rng, p));
            let left = group_mul(&group_mul(&g, &h)?, &u)?;
            let right = group_mul(&g, &group_mul(&h, &u)?)?;
            m[3] = m[3].max(max_abs_diff(&left.coords(), &right.coords()));
            let kgh = act(k, &group_mul(&g, &h)?)?;
            let kg_kh = group_mul(&act(k, &g)?, &act(k, &h)?)?;
            m[4] = m[4].max(max_abs_diff(&kgh.coords(), &kg_kh.coords()));
        }
        for (i, name) in names.iter().enumerate() {
            rep.row(vec![name.to_string(), p.to_string(), n.to_string(), fmt_f64(m[i])]);
            worst[i] = worst[i].max(m[i]);
        }
    }
    for (name, w) in names.iter().zip(worst) {
        rep.check(Check::at_most(*name, w, IDENTITY_TOL));
    }

    let count = 200;
    let (mut form, mut eig) = (0.0f64, 0.0f64);
    for p in with_p(&[2, 3, 4, 5, 6], cfg.p) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2000 + p as u64));
        let (mut mf, mut me) = (0.0f64, 0.0f64);
        for _ in 0..count {
            let a = rand_skew(&mut rng, p);
            let (lam, k) = canonical_form(&a);
            let am = a.matrix();
            let rotated = k.matrix().transpose() * &am * k.matrix();
            let want = d2(&lam.lambdas, p)?.matrix();
            mf = mf.max((rotated - want).abs().max());
            // -a^2 is symmetric with eigenvalues lambda_j^2, each twice.
            let mut mu: Vec<f64> = SymmetricEigen::new(-(&am * &am)).eigenvalues.iter().copied().collect();
            mu.sort_by(|x, y| y.total_cmp(x));
            for (j, l) in lam.lambdas.iter().enumerate() {
                me = me.max((l * l - 0.5 * (mu[2 * j] + mu[2 * j + 1])).abs());
            }
        }
        rep.row(vec!["canonical form k^T a k = D2".into(), p.to_string(), count.to_string(), fmt_f64(mf)]);
        rep.row(vec!["canonical values squared vs eigensolver".into(), p.to_string(), count.to_string(), fmt_f64(me)]);
        form = form.max(mf);
        eig = eig.max(me);
    }
    rep.check(Check::at_most("canonical form k^T a k = D2, entrywise", form, IDENTITY_TOL));
    rep.check(Check::at_most("canonical values vs symmetric eigensolver", eig, IDENTITY_TOL));

    let pairs = 100;
    let mut proj = 0.0f64;
    for p in with_p(&[2, 3, 4], cfg.p) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3000 + p as u64));
        let mut m = 0.0f64;
        for _ in 0..pairs {
            let q = QuotientMap::from_central(&rand_skew(&mut rng, p))?;
            let (g, h) = (rand_elem(&mut rng, p), rand_elem(&mut rng, p));
            let lhs = project_to_heisenberg(&q, &group_mul(&g, &h)?)?;
            let rhs = h_mul(&project_to_heisenberg(&q, &g)?, &project_to_heisenberg(&q, &h)?)?;
            m = m.max(h_diff(&lhs, &rhs));
        }
        rep.row(vec!["projection homomorphism".into(), p.to_string(), pairs.to_string(), fmt_f64(m)]);
        proj = proj.max(m);
    }
    rep.check(Check::at_most("projection onto the Heisenberg group is a homomorphism", proj, IDENTITY_TOL));
    Ok(rep)
}

const SERIES_EPS: f64 = 1e-12;
const FD_STEP: f64 = 1e-4;
const FD_TOL: f64 = 1e-6;
const COEFF_DEGREE: usize = 20;

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn choose(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `coeff_d dim(P_d)` from the Taylor product `L_l^{(n-1)}(x/2) e^{-x/4}`,
/// rescaled to the basis `|z|^{2d} / (2^d d!)`.
fn taylor_scaled_coefficient(l: usize, n: usize, d: usize) -> BigRational {
    let big_n = l + n - 1;
    let mut c = BigRational::zero();
    for i in 0..=d.min(l) {
        let lag = BigRational::new(choose(big_n, l - i), BigInt::from(2).pow(i as u32) * factorial(i));
        let exp = BigRational::new(BigInt::one(), BigInt::from(4).pow((d - i) as u32) * factorial(d - i));
        let term = lag * exp;
        c += if d % 2 == 0 { term } else { -term };
    }
    c / BigRational::from_integer(choose(big_n, l))
        * BigRational::from_integer(BigInt::from(2).pow(d as u32) * factorial(d) * choose(d + n - 1, d))
}

fn block_point(radius: f64, t: f64, n: usize) -> HeisenbergPoint {
    let z = if n == 1 {
        vec![Complex64::new(radius, 0.0)]
    } else {
        let (a, b) = (0.7f64, 0.4f64);
        vec![Complex64::new(radius * a.cos(), 0.0), Complex64::from_polar(radius * a.sin(), b)]
    };
    HeisenbergPoint::single_block(z, t)
}

fn heisenberg_oracle(cfg: &RunConfig) -> Result<ExperimentReport> {
    let nb = cfg.budget();
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["section", "lambda", "n", "l", "index", "measured", "bound"]);
    let mut worst_ratio = 0.0f64;
    let mut worst_diff = 0.0f64;
    for lambda in [1.0, -1.0, 2.0, -2.0] {
        for n in 1..=2usize {
            for l in 0..5u32 {
                let label = HSphericalLabel::type1(lambda, vec![l], vec![n])?;
                let (mut ratio, mut diff, mut bound) = (0.0f64, 0.0f64, f64::INFINITY);
                for i in 0..nb {
                    for j in 0..nb {
                        let radius = 3.0 * i as f64 / (nb - 1) as f64;
                        let t = -2.0 + 4.0 * j as f64 / (nb - 1) as f64;
                        let h = block_point(radius, t, n);
                        let s = type1_series_value(&label, &h, SERIES_EPS)?;
                        let d = (s.value - type1_value(&label, &h)?).norm();
                        if d / s.tail_bound >= ratio {
                            ratio = d / s.tail_bound;
                            bound = s.tail_bound;
                        }
                        diff = diff.max(d);
                    }
                }
                worst_ratio = worst_ratio.max(ratio);
                worst_diff = worst_diff.max(diff);
                rep.row(vec!["series".into(), fmt_f64(lambda), n.to_string(), l.to_string(), (nb * nb).to_string(), fmt_f64(diff), fmt_f64(bound)]);
            }
        }
    }
    rep.check(Check::at_most("series minus closed form, relative to the certified tail bound", worst_ratio, 1.0));
    rep.detail("max_series_difference", json!(worst_diff));

    let (mut sign_bad, mut bound_bad, mut mismatch) = (0usize, 0usize, 0usize);
    for n in 1..=3usize {
        for l in 0..=10usize {
            for d in 0..=COEFF_DEGREE {
                let c = taylor_scaled_coefficient(l, n, d);
                let bound = exact_coeff_bound(n, l as u32, d);
                let sign_ok = !c.is_zero() && (c.is_positive() == (d % 2 == 0));
                sign_bad += usize::from(!sign_ok);
                bound_bad += usize::from(c.abs() > BigRational::from_integer(bound.clone()));
                mismatch += usize::from(c != exact_scaled_coefficient(l as u32, n, d));
                rep.row(vec![
                    "coefficient".into(),
                    String::new(),
                    n.to_string(),
                    l.to_string(),
                    d.to_string(),
                    fmt_f64(c.to_f64().unwrap_or(f64::NAN)),
                    fmt_f64(bound.to_f64().unwrap_or(f64::NAN)),
                ]);
            }
        }
    }
    rep.check(Check::holds("coefficient sign law (-1)^d, exact", sign_bad == 0));
    rep.check(Check::holds("coefficient bound binom(n+l+d-1, d), exact", bound_bad == 0));
    rep.check(Check::holds("Taylor-product coefficients equal the closed form, exact", mismatch == 0));

    let mut worst_fd = 0.0f64;
    for lambda in [0.5, -1.0, 1.5, -2.0, 3.0] {
        for (l, n) in [(0u32, 1usize), (1, 1), (2, 2), (4, 2)] {
            let label = HSphericalLabel::type1(lambda, vec![l], vec![n])?;
            let z = (0..n).map(|i| Complex64::new(0.1 + 0.05 * i as f64, -0.07)).collect();
            let h = HeisenbergPoint::single_block(z, 0.3);
            let (dt, laps) = finite_difference_eigenvalues(|g| type1_value(&label, g), &h, FD_STEP)?;
            let t_err = (dt - Complex64::new(0.0, lambda)).norm() / lambda.abs();
            let want = -lambda.abs() * (2.0 * l as f64 + n as f64);
            let l_err = (laps[0] - want).norm() / want.abs();
            for (index, e) in [t_err, l_err].into_iter().enumerate() {
                rep.row(vec!["eigenvalue".into(), fmt_f64(lambda), n.to_string(), l.to_string(), index.to_string(), fmt_f64(e), fmt_f64(FD_TOL)]);
                worst_fd = worst_fd.max(e);
            }
        }
    }
    rep.check(Check::at_most("finite-difference eigenvalues, relative error", worst_fd, FD_TOL));
    Ok(rep)
}

fn random_type1(rng: &mut ChaCha8Rng, p: usize) -> Result<SphericalLabel> {
    let mut lambdas: Vec<f64> = (0..p / 2).map(|_| rng.random_range(0.3..2.0)).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let lam = spectral_params(&lambdas)?;
    let l = (0..lam.p1).map(|_| rng.random_range(0..=3u32)).collect();
    let r = if 2 * lam.p0 == p { 0.0 } else { rng.random_range(0.0..2.0) };
    SphericalLabel::type1(p, r, lam, l)
}

fn describe(label: &SphericalLabel) -> String {
    match label {
        SphericalLabel::Type1 { r, lam, l, .. } => format!("type1 r={r:.6} lambda={:?} l={l:?}", lam.lambdas),
        SphericalLabel::Type2 { r, .. } => format!("type2 r={r:.6}"),
    }
}

const RESIDUAL_FACTOR: f64 = 3.0;
const SEPARATION_FACTOR: f64 = 10.0;

fn spectrum_eval(cfg: &RunConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(
        cfg.experiment.name(),
        &["p", "function", "pairs", "max_residual", "err_at_worst", "worst_ratio"],
    );
    let (labels_per_type, pairs) = (10, 50);
    for p in with_p(&[2, 3], cfg.p) {
        let spec = pair_spec(p, derive_seed(cfg.seed, p as u64), if p == 2 { None } else { Some(cfg.budget()) });
        let grid = CompactGrid::random_ball(p, 2.0, 40, derive_seed(cfg.seed, 100 + p as u64))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 200 + p as u64));
        for kind in ["type 1", "type 2"] {
            let mut worst = 0.0f64;
            for i in 0..labels_per_type {
                let label = if kind == "type 1" {
                    random_type1(&mut rng, p)?
                } else {
                    SphericalLabel::type2(p, rng.random_range(0.0..3.0))?
                };
                let scan_seed = derive_seed(cfg.seed, (p * 1000 + i) as u64);
                let r = residual_scan(&label.clone().into(), &grid, &spec.with_seed(scan_seed), pairs, scan_seed)?;
                worst = worst.max(r.worst_ratio);
                rep.row(vec![
                    p.to_string(),
                    describe(&label),
                    pairs.to_string(),
                    fmt_f64(r.max_residual),
                    fmt_f64(r.err_at_worst),
                    fmt_f64(r.worst_ratio),
                ]);
            }
            rep.check(Check::at_most(format!("p = {p}, {kind}: residual / error bar"), worst, RESIDUAL_FACTOR));
        }
        let corrupted = KFunction::Average(vec![SphericalLabel::type2(p, 0.5)?.into(), SphericalLabel::type2(p, 2.0)?.into()]);
        let wide = CompactGrid::random_ball(p, 3.0, 40, derive_seed(cfg.seed, 300 + p as u64))?;
        let seed = derive_seed(cfg.seed, 400 + p as u64);
        let r = residual_scan(&corrupted, &wide, &spec.with_seed(seed), pairs, seed)?;
        rep.row(vec![
            p.to_string(),
            "average of type2 r=0.5 and r=2".into(),
            pairs.to_string(),
            fmt_f64(r.max_residual),
            fmt_f64(r.err_at_worst),
            fmt_f64(r.worst_ratio),
        ]);
        rep.check(Check::at_least(format!("p = {p}, non-spherical average: residual / error bar"), r.worst_ratio, SEPARATION_FACTOR));
    }
    Ok(rep)
}

struct Family {
    name: &'static str,
    converges: bool,
    seq: LabelSequence,
    /// Eigenvalue distances from the closed forms.
    eig_closed: Vec<f64>,
}

const SEQUENCE_LEN: usize = 16;

/// `Lambda = (lambda, 0, ..., 0)`: a single block of size 1.
fn single_lambda(p: usize, lambda: f64) -> Result<LambdaParams> {
    let mut v = vec![0.0; p / 2];
    v[0] = lambda;
    spectral_params(&v)
}

fn families(p: usize) -> Result<Vec<Family>> {
    let t1 = |lambda: f64, l: u32| SphericalLabel::type1(p, 0.0, single_lambda(p, lambda)?, vec![l]);
    let t2 = |r: f64| SphericalLabel::type2(p, r);
    let ns: Vec<f64> = (1..=SEQUENCE_LEN).map(|n| n as f64).collect();
    let type1_family = |name, converges, lam: &dyn Fn(f64) -> f64, l: u32, limit_lambda: f64, limit_l: u32| -> Result<Family> {
        let labels = ns.iter().map(|n| t1(lam(*n), l)).collect::<Result<Vec<_>>>()?;
        // max(|d T|, |d block sublaplacian|, |d r|) with blocks of size 1
        let eig_closed = ns
            .iter()
            .map(|n| {
                let t = (lam(*n) - limit_lambda).abs();
                let block = (lam(*n) * (2 * l + 1) as f64 - limit_lambda * (2 * limit_l + 1) as f64).abs();
                t.max(block)
            })
            .collect();
        Ok(Family { name, converges, seq: LabelSequence::new(labels, t1(limit_lambda, limit_l)?)?, eig_closed })
    };
    let type2_family = |name, converges, r: &dyn Fn(f64) -> f64, limit_r: f64| -> Result<Family> {
        let labels = ns.iter().map(|n| t2(r(*n))).collect::<Result<Vec<_>>>()?;
        let eig_closed = ns.iter().map(|n| (r(*n) - limit_r).abs()).collect();
        Ok(Family { name, converges, seq: LabelSequence::new(labels, t2(limit_r)?)?, eig_closed })
    };
    Ok(vec![
        type1_family("type1 lambda=1+1/N^2 l=0", true, &|n| 1.0 + 1.0 / (n * n), 0, 1.0, 0)?,
        type1_family("type1 lambda=2-2^(-N/2) l=1", true, &|n| 2.0 - (-n / 2.0).exp2(), 1, 2.0, 1)?,
        type2_family("type2 r=1+1/N^2", true, &|n| 1.0 + 1.0 / (n * n), 1.0)?,
        type2_family("type2 r=2-2^(-N/2)", true, &|n| 2.0 - (-n / 2.0).exp2(), 2.0)?,
        type1_family("type1 lambda=0.5+1/N^2 l=2", true, &|n| 0.5 + 1.0 / (n * n), 2, 0.5, 2)?,
        type1_family("type1 lambda=2+1/N against lambda=1", false, &|n| 2.0 + 1.0 / n, 0, 1.0, 0)?,
        type2_family("type2 r=1+(-1)^N against r=1", false, &|n| 1.0 + (-1f64).powi(n as i32), 1.0)?,
        type1_family("type1 l=1 against l=0, lambda=1", false, &|_| 1.0, 1, 1.0, 0)?,
    ])
}

fn convergence_grid(p: usize) -> Result<CompactGrid> {
    CompactGrid::orbit_slice(p, 3.0, 12)
}

fn convergence(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.p;
    let grid = convergence_grid(p)?;
    let spec = QuadratureSpec::monte_carlo(cfg.budget(), cfg.seed);
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["family", "N", "sup_distance", "eig_distance", "err_bar"]);
    let mut eig_mismatch = 0.0f64;
    let mut verdicts = serde_json::Map::new();
    for (i, fam) in families(p)?.into_iter().enumerate() {
        let r = convergence_experiment(&fam.seq, &grid, &spec.with_seed(derive_seed(cfg.seed, i as u64)))?;
        for (n, (sup, eig, err)) in r.sup_distances.iter().zip(&r.eig_distances).zip(&r.err_bars).map(|((a, b), c)| (a, b, c)).enumerate() {
            rep.row(vec![fam.name.into(), (n + 1).to_string(), fmt_f64(*sup), fmt_f64(*eig), fmt_f64(*err)]);
        }
        eig_mismatch = eig_mismatch.max(max_abs_diff(&r.eig_distances, &fam.eig_closed));
        if fam.converges {
            let last = SEQUENCE_LEN - 1;
            rep.check(Check::at_most(
                format!("{}: final sup distance / error floor", fam.name),
                r.sup_distances[last] / r.err_bars[last],
                crate::topology::FLOOR_FACTOR,
            ));
        } else {
            let min = r.sup_distances.iter().zip(&r.err_bars).map(|(d, e)| d / e).fold(f64::INFINITY, f64::min);
            rep.check(Check::at_least(format!("{}: smallest sup distance / error floor", fam.name), min, SEPARATION_FACTOR));
        }
        rep.check(Check::holds(format!("{}: verdict consistent with the equivalence", fam.name), r.verdict == Verdict::ConsistentWithIff));
        verdicts.insert(fam.name.into(), r.summary_json());
    }
    rep.check(Check::at_most("eigenvalue distances vs closed forms", eig_mismatch, 1e-12));
    rep.detail("families", serde_json::Value::Object(verdicts));
    Ok(rep)
}

fn completeness(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.p;
    let grid = convergence_grid(p)?;
    let spec = pair_spec(p, cfg.seed, Some(cfg.budget()));
    let pairs = 20;
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["family", "pairs", "max_residual", "err_at_worst", "worst_ratio"]);
    for (i, fam) in families(p)?.into_iter().filter(|f| f.converges).enumerate() {
        let r = completeness_check(&fam.seq, &grid, &spec.with_seed(derive_seed(cfg.seed, i as u64)), pairs)?;
        rep.row(vec![fam.name.into(), pairs.to_string(), fmt_f64(r.max_residual), fmt_f64(r.err_at_worst), fmt_f64(r.worst_ratio)]);
        rep.check(Check::at_most(format!("{}: limit residual / error bar", fam.name), r.worst_ratio, RESIDUAL_FACTOR));
    }
    let limit = SphericalLabel::type1(p, 0.0, single_lambda(p, 1.0)?, vec![0])?;
    let corrupted = KFunction::Scaled(Box::new(limit.into()), 1.5);
    let r = residual_scan(&corrupted, &grid, &spec.with_seed(derive_seed(cfg.seed, 99)), pairs, cfg.seed)?;
    rep.row(vec!["limit scaled by 1.5".into(), pairs.to_string(), fmt_f64(r.max_residual), fmt_f64(r.err_at_worst), fmt_f64(r.worst_ratio)]);
    rep.check(Check::at_least("corrupted limit: residual / error bar", r.worst_ratio, SEPARATION_FACTOR));
    Ok(rep)
}

const DENSITY_SCALES: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

fn density(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.p;
    let grid = convergence_grid(p)?;
    let spec = QuadratureSpec { nodes: cfg.budget(), ..QuadratureSpec::default_for(p, cfg.seed) };
    let lam0 = spectral_params(&vec![1.0; p / 2])?;
    let l = vec![0; lam0.p1];
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["r", "scale", "sup_distance", "err_bar"]);
    for r in [0.0, 1.0] {
        let d = density_experiment(r, &lam0, &DENSITY_SCALES, &l, &grid, &spec)?;
        for ((s, dist), err) in d.scales.iter().zip(&d.distances).zip(&d.err_bars) {
            rep.row(vec![fmt_f64(r), fmt_f64(*s), fmt_f64(*dist), fmt_f64(*err)]);
        }
        rep.check(Check::holds(format!("r = {r}: distance decreases until within 3 error bars"), d.decreases_to_floor(3.0)));
        rep.detail(&format!("final_distance_r{r}"), json!(d.distances.last()));
    }
    Ok(rep)
}

const PLANCHEREL_TOL: f64 = 0.05;

fn plancherel(cfg: &RunConfig) -> Result<ExperimentReport> {
    let p = cfg.p;
    let width = 1.0;
    let f = TestFunction::gaussian(p, width)?;
    let pspec = PlancherelSpec::default_for(p, width)?;
    let res = plancherel_verify(&f, &pspec, TensorSpec::new(cfg.budget())?)?;
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["lambda", "r", "ladder_sum", "contribution"]);
    for t in &res.terms {
        rep.row(vec![fmt_f64(t.lambda), fmt_f64(t.r), fmt_f64(t.ladder_sum), fmt_f64(t.contribution)]);
    }
    rep.check(Check::at_most("relative error |lhs - rhs| / lhs at c = 1", res.rel_err, PLANCHEREL_TOL));
    rep.check(Check::at_least("best-fit constant lhs / rhs, lower limit", res.best_fit, 0.9));
    rep.check(Check::at_most("best-fit constant lhs / rhs, upper limit", res.best_fit, 1.1));
    rep.detail("lhs", json!(res.lhs));
    rep.detail("lhs_err", json!(res.lhs_err));
    rep.detail("rhs", json!(res.rhs));
    rep.detail("rhs_err", json!(res.rhs_err));
    rep.detail("best_fit", json!(res.best_fit));
    if p == 2 {
        // rhs is linear in the interior constant.
        let c = heisenberg_radial_constant();
        let rel = (res.lhs - c * res.rhs).abs() / res.lhs;
        rep.detail("heisenberg_radial_constant", json!(c));
        rep.detail("relative_error_with_heisenberg_constant", json!(rel));
        rep.detail("gaussian_closed_form_ratio", json!(1.0 / (2.0 * std::f64::consts::PI.powi(2))));
    }
    Ok(rep)
}

const FOURIER_IDENTITY_TOL: f64 = 1e-5;

fn fourier_suite(cfg: &RunConfig) -> Result<ExperimentReport> {
    let dim = algebra_dim(cfg.p);
    let nodes = cfg.budget();
    let r = fourier_property_suite(dim, TensorSpec::new(nodes)?, TensorSpec::new((nodes / 2).max(2))?)?;
    let mut rep = ExperimentReport::new(cfg.experiment.name(), &["property", "measured", "tolerance"]);
    let checks = [
        Check::at_most("linearity", r.linearity, 1e-10),
        Check::holds("L1 bound |F f| <= ||f||_1", r.bound_holds),
        Check::at_most("convolution", r.convolution, FOURIER_IDENTITY_TOL),
        Check::at_most("involution", r.involution, FOURIER_IDENTITY_TOL),
        Check::at_most("translation", r.translation, FOURIER_IDENTITY_TOL),
        Check::at_most("modulation", r.modulation, FOURIER_IDENTITY_TOL),
        Check::at_most("Parseval at r = 1, relative error", r.parseval_rel_err, 0.01),
    ];
    for c in checks {
        rep.row(vec![c.name.clone(), fmt_f64(c.measured), fmt_f64(c.tolerance)]);
        rep.check(c);
    }
    rep.detail("dim", json!(dim));
    rep.detail("bound_margin", json!(r.bound_margin));
    rep.detail("parseval_ratio_r2", json!(r.parseval_ratio_r2));
    Ok(rep)
}
