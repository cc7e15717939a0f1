//! One-dimensional Gauss rules from the Golub–Welsch eigenvalue problem.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a one-dimensional rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affine map of a rule on `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

fn golub_welsch(n: usize, off_diag: impl Fn(usize) -> f64, mass: f64) -> Rule {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = off_diag(k);
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    // Symmetrize (both weight functions are even), then polish each node with
    // Newton steps on the orthonormal recurrence and take Christoffel weights,
    // which keeps tiny outer weights accurate to full relative precision.
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let p0 = 1.0 / mass.sqrt();
    let eval = |x: f64| {
        // Returns (p_n(x), p_n'(x), sum_{k<n} p_k(x)^2).
        let (mut pm, mut p) = (0.0, p0);
        let (mut dm, mut d) = (0.0, 0.0);
        let mut sq = 0.0;
        for k in 0..n {
            sq += p * p;
            let b_next = off_diag(k + 1);
            let b_k = if k == 0 { 0.0 } else { off_diag(k) };
            let pn = (x * p - b_k * pm) / b_next;
            let dn = (p + x * d - b_k * dm) / b_next;
            pm = p;
            p = pn;
            dm = d;
            d = dn;
        }
        (p, d, sq)
    };
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d, _) = eval(*x);
            if d != 0.0 {
                *x -= p / d;
            }
        }
        weights.push(1.0 / eval(*x).2);
    }
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    golub_welsch(n, |k| k as f64 / ((4 * k * k - 1) as f64).sqrt(), 2.0)
}

/// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    golub_welsch(n, |k| (k as f64 / 2.0).sqrt(), std::f64::consts::PI.sqrt())
}

/// Composite Gauss–Legendre rule over consecutive panels `[edges[i], edges[i+1]]`.
pub fn composite_legendre(edges: &[f64], per_panel: usize) -> Rule {
    let base = gauss_legendre(per_panel);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        let r = base.mapped(w[0], w[1]);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Rule { nodes, weights }
}
