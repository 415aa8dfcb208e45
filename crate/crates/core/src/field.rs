//! Scalar fields on punctured balls and sphere quadrature adapted to the
//! singular set of an angular coefficient.

use std::sync::Arc;

use crate::error::{CssError, Result};
use crate::numerics::gauss::{gauss_legendre, legendre_on, Rule1d};
use crate::numerics::norm;
use crate::numerics::sphere::SphereRule;
use crate::potential::{AngularCoefficient, NonlinearityF, PerturbationH};
use crate::radial::ModalSolution;
use crate::spectrum::{classify, galerkin, Shape};

pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Central differences with a step relative to |x|.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6 * norm(x).max(1e-300);
        let mut y = x.to_vec();
        (0..x.len())
            .map(|d| {
                y[d] = x[d] + h;
                let p = self.value(&y);
                y[d] = x[d] - h;
                let m = self.value(&y);
                y[d] = x[d];
                (p - m) / (2.0 * h)
            })
            .collect()
    }

    /// Whether `gradient` is analytic rather than a difference quotient.
    fn exact_gradient(&self) -> bool {
        false
    }

    /// Fields built from radial modes expose them for exact fast paths.
    fn modal(&self) -> Option<&ModalSolution> {
        None
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Field given by closures; without a gradient closure, differences are used.
#[derive(Clone)]
pub struct FnField {
    pub dim: usize,
    pub value: ValueFn,
    pub grad: Option<GradFn>,
}

impl FnField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, value: Arc::new(value), grad: None }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }
}

impl Field for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn exact_gradient(&self) -> bool {
        self.grad.is_some()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => {
                let h = 1e-6 * norm(x).max(1e-300);
                let mut y = x.to_vec();
                (0..x.len())
                    .map(|d| {
                        y[d] = x[d] + h;
                        let p = (self.value)(&y);
                        y[d] = x[d] - h;
                        let m = (self.value)(&y);
                        y[d] = x[d];
                        (p - m) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }
}

/// ũ(x) = |x|^{2-N} u(x/|x|²).
#[derive(Clone)]
pub struct KelvinField {
    pub inner: Arc<dyn Field>,
}

pub fn kelvin_transform(u: Arc<dyn Field>) -> KelvinField {
    KelvinField { inner: u }
}

impl Field for KelvinField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn exact_gradient(&self) -> bool {
        self.inner.exact_gradient()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let y: Vec<f64> = x.iter().map(|v| v / r2).collect();
        r2.powf((2.0 - n) / 2.0) * self.inner.value(&y)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let y: Vec<f64> = x.iter().map(|v| v / r2).collect();
        let u = self.inner.value(&y);
        let gu = self.inner.gradient(&y);
        let pre = r2.powf((2.0 - n) / 2.0);
        // Jacobian of the inversion is (I - 2x̂x̂ᵀ)/|x|²
        let xg: f64 = x.iter().zip(&gu).map(|(a, b)| a * b).sum();
        x.iter()
            .zip(&gu)
            .map(|(xi, gi)| (2.0 - n) * pre / r2 * xi * u + pre * (gi - 2.0 * xi * xg / r2) / r2)
            .collect()
    }
}

/// Weighted points on S^{N-1}.
#[derive(Debug, Clone)]
pub struct SphereQuad {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss rule in φ ∈ (0, π/2): log panels toward each graded end, Legendre in between.
fn phi_rule(grade_left: bool, grade_right: bool, depth: f64) -> Rule1d {
    let cut = 0.05;
    let half = std::f64::consts::FRAC_PI_2;
    let base = gauss_legendre(8);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let panels = (cut / depth).log10().ceil().max(1.0) as usize;
    let push_log = |mirror: bool, nodes: &mut Vec<f64>, weights: &mut Vec<f64>| {
        let (tl, th) = (depth.ln(), cut.ln());
        let dt = (th - tl) / panels as f64;
        for p in 0..panels {
            let a = tl + p as f64 * dt;
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                let s = (a + 0.5 * dt * (x + 1.0)).exp();
                nodes.push(if mirror { half - s } else { s });
                weights.push(0.5 * dt * w * s);
            }
        }
    };
    if grade_left {
        push_log(false, &mut nodes, &mut weights);
    }
    if grade_right {
        push_log(true, &mut nodes, &mut weights);
    }
    let lo = if grade_left { cut } else { 0.0 };
    let hi = if grade_right { half - cut } else { half };
    let mid = legendre_on(48, lo, hi);
    nodes.extend(mid.nodes);
    weights.extend(mid.weights);
    Rule1d { nodes, weights }
}

impl SphereQuad {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }

    pub fn plain(dim: usize, degree: usize) -> Self {
        let r = SphereRule::new(dim, degree);
        Self { dim, points: r.points, weights: r.weights }
    }

    /// Rule resolving the power-law behaviour of modes near the singular set.
    /// `degree` is the polynomial exactness of the factor sphere rules.
    pub fn adapted(coeff: &AngularCoefficient, degree: usize) -> Result<Self> {
        Self::adapted_with_depth(coeff, degree, 1e-10)
    }

    /// As `adapted`, grading the sector rule down to angular distance `depth`.
    pub fn adapted_with_depth(coeff: &AngularCoefficient, degree: usize, depth: f64) -> Result<Self> {
        let n = coeff.dim();
        match classify(coeff) {
            Shape::Constant(_) => Ok(Self::plain(n, degree)),
            Shape::Sector { q, k, alpha_c, .. } => {
                let m = n - k;
                let pr = phi_rule(true, alpha_c != 0.0, depth);
                let r1 = SphereRule::new(k, degree);
                let r2 = SphereRule::new(m, degree);
                let mut points = Vec::with_capacity(pr.len() * r1.len() * r2.len() * n);
                let mut weights = Vec::with_capacity(pr.len() * r1.len() * r2.len());
                let mut z = vec![0.0; n];
                for (phi, wp) in pr.nodes.iter().zip(&pr.weights) {
                    let (sn, cs) = phi.sin_cos();
                    let wphi = wp * sn.powi(k as i32 - 1) * cs.powi(m as i32 - 1);
                    for a in 0..r1.len() {
                        let o1 = r1.point(a);
                        for b in 0..r2.len() {
                            let o2 = r2.point(b);
                            for i in 0..k {
                                z[i] = sn * o1[i];
                            }
                            for i in 0..m {
                                z[k + i] = cs * o2[i];
                            }
                            for j in 0..n {
                                points.push((0..n).map(|i| q[i * n + j] * z[i]).sum());
                            }
                            weights.push(wphi * r1.weights[a] * r2.weights[b]);
                        }
                    }
                }
                Ok(Self { dim: n, points, weights })
            }
            Shape::General => {
                let (pts, weights) = galerkin::partition_rule(coeff, (degree / 2) as u32, 0)?;
                Ok(Self { dim: n, points: pts.into_iter().flatten().collect(), weights })
            }
        }
    }
}

/// Equation data shared by the analysis routines: −Δu − a u/|x|² = h u + f(x,u).
#[derive(Clone)]
pub struct Problem {
    pub coeff: AngularCoefficient,
    pub h: PerturbationH,
    pub f: NonlinearityF,
    pub quad: Arc<SphereQuad>,
}

impl Problem {
    pub fn new(coeff: AngularCoefficient, h: PerturbationH, f: NonlinearityF, degree: usize) -> Result<Self> {
        let quad = Arc::new(SphereQuad::adapted(&coeff, degree)?);
        Ok(Self { coeff, h, f, quad })
    }

    pub fn unperturbed(coeff: AngularCoefficient, degree: usize) -> Result<Self> {
        Self::new(coeff, PerturbationH::zero(), NonlinearityF::zero(), degree)
    }

    pub fn dim(&self) -> usize {
        self.coeff.dim()
    }

    /// The modal representation of u when the exact radial formulas apply.
    pub fn modal_path<'a>(&self, u: &'a dyn Field) -> Option<&'a ModalSolution> {
        let m = u.modal()?;
        (self.h.radial.is_some() && self.f.is_zero() && m.dim() == self.dim()).then_some(m)
    }

    /// a(θ)/r² at x = rθ.
    pub fn potential(&self, th: &[f64], r: f64) -> f64 {
        self.coeff.eval_unchecked(th) / (r * r)
    }

    /// Rejects difference-quotient gradients whose stencil reaches the singular cone.
    pub fn gradient_at(&self, u: &dyn Field, x: &[f64], th: &[f64]) -> Result<Vec<f64>> {
        if !u.exact_gradient() && self.coeff.dist_to_singular(th) < 4e-6 {
            return Err(CssError::NearSingularGradient);
        }
        Ok(u.gradient(x))
    }
}

/// ∫_{S^{N-1}} g(rθ) dS for a field-derived integrand.
pub fn sphere_integral(quad: &SphereQuad, r: f64, mut g: impl FnMut(&[f64], &[f64]) -> f64) -> Result<f64> {
    let mut x = vec![0.0; quad.dim];
    let mut acc = 0.0;
    for i in 0..quad.len() {
        let th = quad.point(i);
        for (xi, t) in x.iter_mut().zip(th) {
            *xi = r * t;
        }
        let v = g(&x, th);
        if !v.is_finite() {
            return Err(CssError::QuadratureFailure(format!("non-finite integrand at r = {r:e}")));
        }
        acc += quad.weights[i] * v;
    }
    Ok(acc)
}
