//! Stereographic reduction of angular eigenproblems to ℝ^{N−1}.

use serde::Serialize;

use crate::error::{CssError, Result};
use crate::numerics::gauss::legendre_on;
use crate::numerics::norm;
use crate::numerics::sphere::SphereRule;
use crate::potential::{AngularCoefficient, Term};
use crate::spectrum::{assemble_spectrum, gamma_exponent, lambda_of};

/// Π(θ) = θ'/(1 − θ_N), projection from the north pole e_N.
pub fn stereographic(theta: &[f64]) -> Result<Vec<f64>> {
    let n = theta.len();
    let den = 1.0 - theta[n - 1];
    if den < 1e-14 {
        return Err(CssError::NorthPole);
    }
    Ok(theta[..n - 1].iter().map(|t| t / den).collect())
}

/// Π^{-1}(y) = 2y/(|y|²+1) + e_N(|y|²−1)/(|y|²+1).
pub fn stereographic_inv(y: &[f64]) -> Vec<f64> {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    let mut out: Vec<f64> = y.iter().map(|v| 2.0 * v / (r2 + 1.0)).collect();
    out.push((r2 - 1.0) / (r2 + 1.0));
    out
}

/// φ(y) = 4/(|y|²+1)².
pub fn conformal_factor(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    4.0 / (r2 + 1.0).powi(2)
}

/// Projected equation −Δψ̃ − b(y/|y|)ψ̃/|y|² = h̃ ψ̃ on ℝ^{N−1}.
#[derive(Debug, Clone)]
pub struct ProjectedProblem {
    pub source: AngularCoefficient,
    pub b: AngularCoefficient,
    /// eigenvalue μ_i(a) of the source problem
    pub mu: f64,
}

impl ProjectedProblem {
    /// Dimension of the projected space, N − 1.
    pub fn dim(&self) -> usize {
        self.b.dim()
    }

    fn shift(&self) -> f64 {
        let n = self.source.dim() as f64;
        (n - 3.0) * (n - 1.0) / 4.0 + self.mu
    }

    /// h̃(y) = φ(y)((N−3)(N−1)/4 + μ) plus the terms of a that involve e_N.
    pub fn htilde(&self, y: &[f64]) -> f64 {
        let last = self.source.dim() - 1;
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let mut s = conformal_factor(y) * self.shift();
        for t in self.source.active_terms() {
            match &t {
                Term::Cyl { j, alpha } if j.contains(&last) => {
                    let jp: f64 = j[..j.len() - 1].iter().map(|&i| y[i] * y[i]).sum();
                    s += 4.0 * alpha / (4.0 * jp + (r2 - 1.0).powi(2));
                }
                Term::Pair { j1, j2, alpha } if t.involves(last) => {
                    let m = j1.len() - 1;
                    let other = if j1[m] == last { j2[m] } else { j1[m] };
                    let jp: f64 = j1[..m].iter().zip(&j2[..m]).map(|(&a, &b)| (y[a] - y[b]).powi(2)).sum();
                    s += 4.0 * alpha / (4.0 * jp + (r2 - 1.0 - 2.0 * y[other]).powi(2));
                }
                _ => {}
            }
        }
        s
    }

    /// b(y/|y|)/|y|².
    pub fn b_potential(&self, y: &[f64]) -> f64 {
        self.b.eval_unchecked(y)
    }

    /// φ a(Π^{-1}y) − [b/|y|² + h̃ − φ((N−3)(N−1)/4 + μ)], evaluated independently.
    pub fn identity_residual(&self, y: &[f64]) -> f64 {
        let phi = conformal_factor(y);
        let lhs = phi * self.source.eval_unchecked(&stereographic_inv(y));
        let rhs = self.b_potential(y) + self.htilde(y) - phi * self.shift();
        lhs - rhs
    }
}

/// Split a into the part b living on ℝ^{N−1} and the bounded remainder inside h̃.
pub fn project_potential(coeff: &AngularCoefficient, mu: f64) -> Result<ProjectedProblem> {
    let (n, k) = (coeff.dim(), coeff.block());
    if k == n {
        return Err(CssError::KEqualsN);
    }
    let mut b = AngularCoefficient::new(n - 1, k)?;
    for (j, &alpha) in coeff.cyl_terms() {
        if !j.contains(n) {
            b = b.with_cyl(j.entries(), alpha)?;
        }
    }
    for (p, &alpha) in coeff.pair_terms() {
        if !p.first().contains(n) && !p.second().contains(n) {
            b = b.with_pair(p.first().entries(), p.second().entries(), alpha)?;
        }
    }
    Ok(ProjectedProblem { source: coeff.clone(), b, mu })
}

/// ψ̃(y) = φ(y)^{(N−3)/4} ψ(Π^{-1}y).
pub fn project_eigenfunction(psi: &dyn Fn(&[f64]) -> f64, y: &[f64]) -> f64 {
    let n = y.len() + 1;
    conformal_factor(y).powf((n as f64 - 3.0) / 4.0) * psi(&stereographic_inv(y))
}

/// ψ̃ on `ys` from scattered sphere samples (θ_j, ψ_j), Shepard-interpolated.
/// Fails when the nearest sample to Π^{-1}(y) is farther than `max_gap`.
pub fn project_sampled(thetas: &[Vec<f64>], values: &[f64], ys: &[Vec<f64>], max_gap: f64) -> Result<Vec<f64>> {
    ys.iter()
        .map(|y| {
            let th = stereographic_inv(y);
            let d: Vec<f64> = thetas
                .iter()
                .map(|t| t.iter().zip(&th).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            let nearest = d.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(nearest <= max_gap) {
                return Err(CssError::InterpolationGap);
            }
            let v = if nearest < 1e-14 {
                values[d.iter().position(|&x| x == nearest).unwrap()]
            } else {
                let (mut num, mut den) = (0.0, 0.0);
                for (dj, vj) in d.iter().zip(values) {
                    if *dj <= 2.0 * nearest {
                        let w = dj.powi(-2);
                        num += w * vj;
                        den += w;
                    }
                }
                num / den
            };
            let n = y.len() + 1;
            Ok(conformal_factor(y).powf((n as f64 - 3.0) / 4.0) * v)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaBCheck {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub pass: bool,
}

/// Λ(b) of the projected coefficient, which should stay below 1.
pub fn lambda_b_check(coeff: &AngularCoefficient) -> Result<LambdaBCheck> {
    let lambda_a = lambda_of(coeff)?;
    if lambda_a >= 1.0 {
        return Err(CssError::IndefiniteForm(lambda_a));
    }
    let p = project_potential(coeff, 0.0)?;
    let lambda_b = if p.b.is_zero() { 0.0 } else { lambda_of(&p.b)? };
    Ok(LambdaBCheck { lambda_a, lambda_b, pass: lambda_b < 1.0 })
}

#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub problem: ProjectedProblem,
    /// ground eigenvalue of b on S^{N−2}
    pub mu_b: f64,
    /// −(N−3)/2 + √(((N−3)/2)² + μ(b)), N the source dimension
    pub gamma_tilde: f64,
}

/// Repeated projection, each level fed with the ground eigenvalue of the
/// previous b; stops early once b has isolated singularities only.
pub fn iterate_reduction(coeff: &AngularCoefficient, mu: f64, depth: usize) -> Result<Vec<ReductionStep>> {
    let max = coeff.dim() - coeff.block();
    if depth > max {
        return Err(CssError::DepthExceeded { depth, max });
    }
    let mut out = Vec::new();
    let (mut a, mut m) = (coeff.clone(), mu);
    for _ in 0..depth {
        let p = project_potential(&a, m)?;
        let mu_b = if p.b.is_zero() { 0.0 } else { assemble_spectrum(&p.b, 1, 8)?.mu1() };
        let gamma_tilde = gamma_exponent(p.b.dim(), mu_b)?.0;
        let done = p.b.is_zero() || p.b.block() == p.b.dim();
        let next = p.b.clone();
        out.push(ReductionStep { problem: p, mu_b, gamma_tilde });
        if done {
            break;
        }
        a = next;
        m = mu_b;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportCheck {
    /// ∫_{ℝ^{N−1}} ∇v₁·∇v₂
    pub grad_flat: f64,
    /// ∫_S ∇w₁·∇w₂ + (N−3)(N−1)/4 w₁w₂
    pub grad_sphere: f64,
    /// ∫ φ v₁v₂
    pub mass_flat: f64,
    /// ∫_S w₁w₂
    pub mass_sphere: f64,
}

/// Energy and mass of test functions on ℝ^{N−1} against their conformal
/// pull-backs w = φ^{−(N−3)/4} v∘Π; flat integrals are truncated at |y| = y_max.
pub fn transport_identities(
    n: usize,
    v1: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    v2: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    y_max: f64,
    sphere_degree: usize,
) -> TransportCheck {
    let m = n - 1;
    let radial = legendre_on(120, 0.0, y_max);
    let ang = SphereRule::new(m, 16);
    let (mut gf, mut mf) = (0.0, 0.0);
    let mut y = vec![0.0; m];
    for (r, wr) in radial.nodes.iter().zip(&radial.weights) {
        for i in 0..ang.len() {
            for (d, c) in ang.point(i).iter().enumerate() {
                y[d] = r * c;
            }
            let (a, ga) = v1(&y);
            let (b, gb) = v2(&y);
            let jac = wr * ang.weights[i] * r.powi(m as i32 - 1);
            gf += jac * ga.iter().zip(&gb).map(|(p, q)| p * q).sum::<f64>();
            mf += jac * conformal_factor(&y) * a * b;
        }
    }
    let e = (n as f64 - 3.0) / 4.0;
    let pull = |v: &dyn Fn(&[f64]) -> (f64, Vec<f64>), x: &[f64]| -> f64 {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|c| c / r).collect();
        match stereographic(&th) {
            Ok(y) => conformal_factor(&y).powf(-e) * v(&y).0,
            Err(_) => 0.0,
        }
    };
    let sphere = SphereRule::new(n, sphere_degree);
    let c = (n as f64 - 3.0) * (n as f64 - 1.0) / 4.0;
    let h = 1e-5;
    let (mut gs, mut ms) = (0.0, 0.0);
    let mut x = vec![0.0; n];
    for i in 0..sphere.len() {
        let th = sphere.point(i);
        let w1 = pull(v1, th);
        let w2 = pull(v2, th);
        let mut dot = 0.0;
        for d in 0..n {
            x.copy_from_slice(th);
            x[d] += h;
            let (p1, p2) = (pull(v1, &x), pull(v2, &x));
            x[d] -= 2.0 * h;
            let (q1, q2) = (pull(v1, &x), pull(v2, &x));
            dot += (p1 - q1) * (p2 - q2) / (4.0 * h * h);
        }
        gs += sphere.weights[i] * (dot + c * w1 * w2);
        ms += sphere.weights[i] * w1 * w2;
    }
    TransportCheck { grad_flat: gf, grad_sphere: gs, mass_flat: mf, mass_sphere: ms }
}
