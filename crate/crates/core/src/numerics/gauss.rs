//! Gauss–Jacobi rules and the handful of 1-D rules built on top of them.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a 1-D quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    // monic three-term recurrence for (1-x)^a (1+x)^b on [-1, 1]
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let ab = a + b;
    for (j, al) in alpha.iter_mut().enumerate() {
        let jf = j as f64;
        *al = if j == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * jf + ab) * (2.0 * jf + ab + 2.0))
        };
    }
    for (j, be) in beta.iter_mut().enumerate().skip(1) {
        let jf = j as f64;
        *be = if j == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            let s = 2.0 * jf + ab;
            4.0 * jf * (jf + a) * (jf + b) * (jf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
    }
    (alpha, beta)
}

/// Orthonormal polynomial values p_0..p_n at x, returned as (sum_{j<n} p_j^2, p_n, p_n').
fn orthonormal_eval(x: f64, alpha: &[f64], beta: &[f64], beta_n: f64, mu0: f64) -> (f64, f64, f64) {
    let n = alpha.len();
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut dp = 0.0;
    let mut christoffel = 0.0;
    for j in 0..n {
        christoffel += p * p;
        let sb_next = if j + 1 < n { beta[j + 1].sqrt() } else { beta_n.sqrt() };
        let sb = if j == 0 { 0.0 } else { beta[j].sqrt() };
        let p_next = ((x - alpha[j]) * p - sb * p_prev) / sb_next;
        let dp_next = (p + (x - alpha[j]) * dp - sb * dp_prev) / sb_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (christoffel, p, dp)
}

/// Gauss–Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1], exact to degree 2n-1.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Rule1d {
    assert!(n >= 1, "empty rule");
    assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
    let (alpha, beta) = recurrence(n + 1, a, b);
    let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alpha[i];
        if i + 1 < n {
            let s = beta[i + 1].sqrt();
            t[(i, i + 1)] = s;
            t[(i + 1, i)] = s;
        }
    }
    let eig = t.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        // two Newton polishing steps on p_n, then the Christoffel weight
        for _ in 0..2 {
            let (_, p, dp) = orthonormal_eval(*x, &alpha[..n], &beta[..n], beta[n], mu0);
            if dp != 0.0 {
                let step = p / dp;
                if step.abs() < 1e-6 {
                    *x -= step;
                }
            }
        }
        let (c, _, _) = orthonormal_eval(*x, &alpha[..n], &beta[..n], beta[n], mu0);
        weights.push(1.0 / c);
    }
    Rule1d { nodes, weights }
}

pub fn gauss_legendre(n: usize) -> Rule1d {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule for `∫_lo^hi f(s) ds` (Gauss–Legendre mapped).
pub fn legendre_on(n: usize, lo: f64, hi: f64) -> Rule1d {
    let base = gauss_legendre(n);
    let h = 0.5 * (hi - lo);
    Rule1d {
        nodes: base.nodes.iter().map(|x| lo + h * (x + 1.0)).collect(),
        weights: base.weights.iter().map(|w| w * h).collect(),
    }
}

/// Rule for `∫_0^r s^p g(s) ds` with smooth g; the weights carry `s^p`,
/// so the caller sums `w * g(s)`.
pub fn power_rule(n: usize, r: f64, p: f64) -> Rule1d {
    let base = gauss_jacobi(n, 0.0, p);
    let scale = (0.5 * r).powf(p + 1.0);
    Rule1d {
        nodes: base.nodes.iter().map(|x| 0.5 * r * (x + 1.0)).collect(),
        weights: base.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Composite rule on geometric panels covering `[lo, hi]`, `per_panel` Legendre
/// nodes in the log variable. Suited to integrands that behave like powers of s.
pub fn log_panels(lo: f64, hi: f64, panels: usize, per_panel: usize) -> Rule1d {
    assert!(lo > 0.0 && hi > lo);
    let base = gauss_legendre(per_panel);
    let (tl, th) = (lo.ln(), hi.ln());
    let dt = (th - tl) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let a = tl + p as f64 * dt;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            let t = a + 0.5 * dt * (x + 1.0);
            let s = t.exp();
            nodes.push(s);
            weights.push(0.5 * dt * w * s);
        }
    }
    Rule1d { nodes, weights }
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
