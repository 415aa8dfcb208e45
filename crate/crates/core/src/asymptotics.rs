//! Blow-up profile: β coefficients, rescaled traces and H¹ convergence.

use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{CssError, Result};
use crate::field::{sphere_integral, Field, Problem};
use crate::numerics::gauss::log_panels;
use crate::radial::{fourier_coefficient, head_estimate, zeta_i, ModalSolution};
use crate::spectrum::EigenDecomposition;

/// |x|^γ Σ β_i ψ_i over one eigenspace.
#[derive(Debug, Clone)]
pub struct AsymptoticProfile {
    pub gamma: f64,
    pub level: usize,
    pub indices: Range<usize>,
    pub beta: Vec<f64>,
    pub r_used: f64,
    pub field: ModalSolution,
}

impl AsymptoticProfile {
    /// 1-based index of the first eigenpair in the eigenspace.
    pub fn k0(&self) -> usize {
        self.indices.start + 1
    }

    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }

    pub fn beta_norm2(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.field.value(x)
    }

    /// Same β with a different radial exponent (used for negative controls).
    pub fn with_exponent(&self, gamma: f64) -> Result<Self> {
        let terms: Vec<(usize, f64, f64)> = self.indices.clone().zip(&self.beta).map(|(i, b)| (i, *b, gamma)).collect();
        let field = ModalSolution::from_powers(self.field.decomposition.clone(), &terms, 1.0)?;
        Ok(Self { gamma, field, ..self.clone() })
    }
}

/// β_i = R^{-γ}φ_i(R) + 1/(2γ+N−2) ∫_0^R ζ_i(s)(s^{1−γ} − s^{γ+N−1}R^{−(2γ+N−2)}) ds.
pub fn beta_i(u: &dyn Field, pb: &Problem, dec: &EigenDecomposition, i: usize, gamma: f64, radius: f64) -> Result<f64> {
    let n = pb.dim() as f64;
    let denom = 2.0 * gamma + n - 2.0;
    if denom < 1e-10 {
        return Err(CssError::DegenerateDenominator(denom));
    }
    let kernel = move |s: f64| s.powf(1.0 - gamma) - s.powf(gamma + n - 1.0) * radius.powf(-denom);
    let modal = pb
        .modal_path(u)
        .filter(|m| std::ptr::eq(&*m.decomposition, dec));
    if let Some(m) = modal {
        let phi_r = m.coefficient(i, radius).0;
        let hr = pb.h.radial.as_ref().expect("modal path has radial h");
        let rule = log_panels(radius * 1e-14, radius, 28, 8);
        let g = |s: f64| hr(s) * m.coefficient(i, s).0 * kernel(s);
        let body = rule.integrate(g);
        let head = head_estimate(&g, radius * 1e-14)?;
        return Ok(radius.powf(-gamma) * phi_r + (body + head) / denom);
    }
    let psi = dec.psi(i);
    let phi_r = fourier_coefficient(u, psi, radius, &pb.quad)?;
    if pb.h.is_zero() && pb.f.is_zero() {
        return Ok(radius.powf(-gamma) * phi_r);
    }
    let lead = radius * 1e-10;
    let rule = log_panels(lead, radius, 20, 8);
    let mut body = 0.0;
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        body += w * zeta_i(u, &pb.h, &pb.f, psi, *s, &pb.quad)? * kernel(*s);
    }
    let g = |s: f64| zeta_i(u, &pb.h, &pb.f, psi, s, &pb.quad).unwrap_or(f64::NAN) * kernel(s);
    Ok(radius.powf(-gamma) * phi_r + (body + head_estimate(&g, lead)?) / denom)
}

/// β over the eigenspace whose σ⁺ matches γ within `tol`.
pub fn beta_coefficients(
    u: &dyn Field,
    pb: &Problem,
    dec: &Arc<EigenDecomposition>,
    gamma: f64,
    radius: f64,
    tol: f64,
) -> Result<AsymptoticProfile> {
    let level = dec.level_for_gamma(gamma, tol)?;
    let indices = dec.level_members(level);
    let beta = indices
        .clone()
        .map(|i| beta_i(u, pb, dec, i, gamma, radius))
        .collect::<Result<Vec<_>>>()?;
    let exact = dec.levels[level].sigma_plus;
    let terms: Vec<(usize, f64, f64)> = indices.clone().zip(&beta).map(|(i, b)| (i, *b, exact)).collect();
    let field = ModalSolution::from_powers(dec.clone(), &terms, 1.0)?;
    Ok(AsymptoticProfile { gamma: exact, level, indices, beta, r_used: radius, field })
}

/// x ↦ c u(λx) for fields without a modal form.
struct Scaled<'a> {
    inner: &'a dyn Field,
    lambda: f64,
    factor: f64,
}

impl Field for Scaled<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v * self.lambda).collect();
        self.factor * self.inner.value(&y)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = x.iter().map(|v| v * self.lambda).collect();
        self.inner.gradient(&y).into_iter().map(|g| g * self.factor * self.lambda).collect()
    }

    fn exact_gradient(&self) -> bool {
        self.inner.exact_gradient()
    }
}

/// Boxed c·u(λ·); modal fields stay modal.
pub fn scaled_field<'a>(u: &'a dyn Field, lambda: f64, factor: f64) -> Box<dyn Field + 'a> {
    match u.modal() {
        Some(m) => Box::new(m.rescaled(lambda, factor)),
        None => Box::new(Scaled { inner: u, lambda, factor }),
    }
}

/// w^λ(x) = u(λx)/√H(λ), checked against ∫_{∂B_1}|w^λ|² = 1.
pub fn rescaled_trace<'a>(u: &'a dyn Field, pb: &Problem, lambda: f64, h_lambda: f64) -> Result<Box<dyn Field + 'a>> {
    if !(h_lambda > 1e-300) {
        return Err(CssError::ZeroBoundaryNorm(lambda));
    }
    let w = scaled_field(u, lambda, 1.0 / h_lambda.sqrt());
    let norm = match w.modal() {
        Some(m) => m.h_parseval(1.0),
        None => sphere_integral(&pb.quad, 1.0, |x, _| w.value(x).powi(2))?,
    };
    if (norm - 1.0).abs() > 1e-8 {
        return Err(CssError::QuadratureFailure(format!(
            "rescaled trace has boundary norm {norm} (H(λ) inconsistent)"
        )));
    }
    Ok(w)
}

/// H¹(B_1) distance ‖∇v‖² + ‖v‖² between two fields.
///
/// Modal pairs on the same decomposition use the radial profiles with the
/// angular Gram matrix ∫∇ψ_i·∇ψ_j = μ_i δ_ij + ∫ a ψ_i ψ_j; otherwise quadrature.
pub fn h1_distance(a: &dyn Field, b: &dyn Field, pb: &Problem) -> Result<f64> {
    if let (Some(ma), Some(mb)) = (a.modal(), b.modal()) {
        if Arc::ptr_eq(&ma.decomposition, &mb.decomposition) {
            return h1_modal(ma, mb, pb);
        }
    }
    h1_quadrature(a, b, pb)
}

fn h1_modal(a: &ModalSolution, b: &ModalSolution, pb: &Problem) -> Result<f64> {
    let n = a.dim() as i32;
    let dec = &a.decomposition;
    let mut idx: Vec<usize> = a.modes.iter().chain(&b.modes).map(|m| m.index).collect();
    idx.sort_unstable();
    idx.dedup();
    let m = idx.len();
    let mut gram = vec![0.0; m * m];
    for p in 0..m {
        for q in p..m {
            let (pi, qi) = (dec.psi(idx[p]), dec.psi(idx[q]));
            let v = sphere_integral(&pb.quad, 1.0, |_, th| pb.coeff.eval_unchecked(th) * pi.eval(th) * qi.eval(th))?;
            gram[p * m + q] = v;
            gram[q * m + p] = v;
        }
        gram[p * m + p] += dec.pairs[idx[p]].mu;
    }
    let g = |i: usize, r: f64| {
        let (pa, da) = a.coefficient(i, r);
        let (pb_, db) = b.coefficient(i, r);
        (pa - pb_, da - db)
    };
    let lead = 1e-12;
    let rule = log_panels(lead, 1.0, 24, 8);
    let density = |r: f64| {
        let vals: Vec<(f64, f64)> = idx.iter().map(|&i| g(i, r)).collect();
        let mut acc = 0.0;
        for (p, (v, d)) in vals.iter().enumerate() {
            acc += (d * d + v * v) * r * r;
            for (q, (w, _)) in vals.iter().enumerate() {
                acc += gram[p * m + q] * v * w;
            }
        }
        acc * r.powi(n - 3)
    };
    let total = rule.integrate(density) + head_estimate(&density, lead).unwrap_or(0.0);
    Ok(total.max(0.0).sqrt())
}

fn h1_quadrature(a: &dyn Field, b: &dyn Field, pb: &Problem) -> Result<f64> {
    let n = pb.dim() as i32;
    let lead = 1e-8;
    let rule = log_panels(lead, 1.0, 8, 8);
    let mut total = 0.0;
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let mut err = None;
        let v = sphere_integral(&pb.quad, *s, |x, th| {
            let ga = pb.gradient_at(a, x, th);
            let gb = pb.gradient_at(b, x, th);
            match (ga, gb) {
                (Ok(ga), Ok(gb)) => {
                    let dv = a.value(x) - b.value(x);
                    ga.iter().zip(&gb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() + dv * dv
                }
                (Err(e), _) | (_, Err(e)) => {
                    err = Some(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        total += w * v * s.powi(n - 1);
    }
    Ok(total.max(0.0).sqrt())
}

/// Geometric λ schedule, ratio 1/2, from R/10 down to R·1e-4.
pub fn lambda_schedule(radius: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = 0.1 * radius;
    while l >= 1e-4 * radius * (1.0 - 1e-12) {
        out.push(l);
        l *= 0.5;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub lambda: f64,
    pub h1_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// errors decrease over the last three λ
    pub monotone_tail: bool,
    /// least-squares slope of ln error against ln λ
    pub rate: f64,
}

/// H¹(B_1) errors of λ^{-γ}u(λ·) − profile along a λ sequence.
pub fn convergence_check(u: &dyn Field, pb: &Problem, profile: &AsymptoticProfile, lambdas: &[f64]) -> Result<ConvergenceReport> {
    let errors: Vec<Result<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = lambdas
            .iter()
            .map(|&l| {
                scope.spawn(move || {
                    let v = scaled_field(u, l, l.powf(-profile.gamma));
                    h1_distance(&*v, &profile.field, pb)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("convergence worker panicked")).collect()
    });
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    let points: Vec<ConvergencePoint> = lambdas
        .iter()
        .zip(&errors)
        .map(|(l, e)| ConvergencePoint { lambda: *l, h1_error: *e })
        .collect();
    let tail = &errors[errors.len().saturating_sub(3)..];
    let monotone_tail = tail.windows(2).all(|w| w[1] < w[0]);
    let pts: Vec<(f64, f64)> = lambdas.iter().zip(&errors).map(|(l, e)| (l.ln(), e.max(1e-300).ln())).collect();
    Ok(ConvergenceReport { points, monotone_tail, rate: crate::almgren::slope(&pts) })
}
