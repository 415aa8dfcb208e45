//! Almgren-type frequency N = D/H, the split N' = ν₁ + ν₂, fits of the limit
//! and rate, and the threshold constants that go with them.

use serde::Serialize;

use crate::error::{CssError, Result};
use crate::field::{sphere_integral, Field, Problem};
use crate::numerics::gauss::{gamma_fn, gauss_legendre, log_panels};
use crate::numerics::sphere::sphere_area;
use crate::numerics::{binomial, two_star};
use crate::potential::{AngularCoefficient, NonlinearityF, PerturbationH};
use crate::radial::{head_estimate, LogGrid, ModalSolution};
use crate::spectrum::{lambda_of, EigenDecomposition};

/// Sphere integrals at radius r: ∫u², ∫u ∂_r u, ∫(∂_r u)² over S^{N-1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySums {
    pub uu: f64,
    pub u_ur: f64,
    pub ur_ur: f64,
}

/// φ and φ' per eigen index (duplicate entries of one index are summed).
fn grouped(m: &ModalSolution, r: f64) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for mode in &m.modes {
        let (p, dp) = mode.profile.eval(r);
        match out.iter_mut().find(|e| e.0 == mode.index) {
            Some(e) => {
                e.1 += p;
                e.2 += dp;
            }
            None => out.push((mode.index, p, dp)),
        }
    }
    out
}

pub fn boundary_sums(u: &dyn Field, pb: &Problem, r: f64) -> Result<BoundarySums> {
    if let Some(m) = pb.modal_path(u) {
        let g = grouped(m, r);
        return Ok(BoundarySums {
            uu: g.iter().map(|e| e.1 * e.1).sum(),
            u_ur: g.iter().map(|e| e.1 * e.2).sum(),
            ur_ur: g.iter().map(|e| e.2 * e.2).sum(),
        });
    }
    boundary_sums_quadrature(u, pb, r)
}

pub fn boundary_sums_quadrature(u: &dyn Field, pb: &Problem, r: f64) -> Result<BoundarySums> {
    let mut uu = 0.0;
    let mut u_ur = 0.0;
    let mut ur_ur = 0.0;
    for i in 0..pb.quad.len() {
        let th = pb.quad.point(i);
        let x: Vec<f64> = th.iter().map(|t| r * t).collect();
        let v = u.value(&x);
        let g = pb.gradient_at(u, &x, th)?;
        let ur: f64 = g.iter().zip(th).map(|(a, b)| a * b).sum();
        let w = pb.quad.weights[i];
        uu += w * v * v;
        u_ur += w * v * ur;
        ur_ur += w * ur * ur;
    }
    if !(uu.is_finite() && u_ur.is_finite() && ur_ur.is_finite()) {
        return Err(CssError::QuadratureFailure(format!("non-finite boundary sums at r = {r:e}")));
    }
    Ok(BoundarySums { uu, u_ur, ur_ur })
}

/// H(r) = ∫_{S^{N-1}} u(rθ)² dS.
pub fn h_of(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    if let Some(m) = pb.modal_path(u) {
        return Ok(m.h_parseval(r));
    }
    h_of_quadrature(u, pb, r)
}

pub fn h_of_quadrature(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    sphere_integral(&pb.quad, r, |x, _| u.value(x).powi(2))
}

/// H'(r) from the boundary flux 2∫ u ∂_r u.
pub fn h_prime(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    Ok(2.0 * boundary_sums(u, pb, r)?.u_ur)
}

/// Volume integrands at radius s, already multiplied by s^{N-1}:
/// [energy density of D, (2h + ∇h·x)u², (N−2)fu − 2NF − 2∇ₓF·x].
fn volume_densities(u: &dyn Field, pb: &Problem, s: f64, modal: bool) -> Result<[f64; 3]> {
    let n = pb.dim();
    let jac = s.powi(n as i32 - 1);
    if modal {
        let m = u.modal().expect("modal path");
        let hr = pb.h.radial.as_ref().expect("radial h");
        let hv = hr(s);
        let mut x = vec![0.0; n];
        x[0] = s;
        let hx = (pb.h.grad_dot_x)(&x);
        let mut e = 0.0;
        let mut v = 0.0;
        for (idx, p, dp) in grouped(m, s) {
            let mu = m.decomposition.pairs[idx].mu;
            e += dp * dp + (mu / (s * s) - hv) * p * p;
            v += (2.0 * hv + hx) * p * p;
        }
        return Ok([e * jac, v * jac, 0.0]);
    }
    let nf = n as f64;
    let mut acc = [0.0; 3];
    for i in 0..pb.quad.len() {
        let th = pb.quad.point(i);
        let x: Vec<f64> = th.iter().map(|t| s * t).collect();
        let val = u.value(&x);
        let g = pb.gradient_at(u, &x, th)?;
        let g2: f64 = g.iter().map(|t| t * t).sum();
        let hv = (pb.h.eval)(&x);
        let fv = (pb.f.f)(&x, val);
        let big_f = (pb.f.big_f)(&x, val);
        let fx = (pb.f.gradx_f_dot_x)(&x, val);
        let w = pb.quad.weights[i];
        acc[0] += w * (g2 - pb.potential(th, s) * val * val - hv * val * val - fv * val);
        acc[1] += w * (2.0 * hv + (pb.h.grad_dot_x)(&x)) * val * val;
        acc[2] += w * ((nf - 2.0) * fv * val - 2.0 * nf * big_f - 2.0 * fx);
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(CssError::QuadratureFailure(format!("non-finite volume integrand at r = {s:e}")));
    }
    Ok([acc[0] * jac, acc[1] * jac, acc[2] * jac])
}

/// ∫_0^{r_j} g for ascending nodes: graded log panels below the first node
/// plus a fitted power-law head, then Gauss in ln s between nodes.
fn cumulative3(nodes: &[f64], g: &dyn Fn(f64) -> Result<[f64; 3]>, cheap: bool) -> Result<Vec<[f64; 3]>> {
    let r0 = nodes[0];
    // sphere-quadrature integrands are costly: one panel per decade over eight
    let (decades, panels) = if cheap { (12, 24) } else { (8, 8) };
    let lead = r0 * 10f64.powi(-decades);
    let rule = log_panels(lead, r0, panels, 8);
    let mut c = [0.0; 3];
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = g(*s)?;
        for d in 0..3 {
            c[d] += w * v[d];
        }
    }
    let g_lead = g(lead)?;
    let g_half = g(lead * 0.5)?;
    for d in 0..3 {
        let (a, b) = (g_lead[d], g_half[d]);
        c[d] += head_estimate(&|s: f64| if s == lead { a } else { b }, lead)?;
    }
    let base = gauss_legendre(8);
    let mut out = Vec::with_capacity(nodes.len());
    out.push(c);
    for j in 0..nodes.len() - 1 {
        let (tl, th) = (nodes[j].ln(), nodes[j + 1].ln());
        let h = 0.5 * (th - tl);
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            let s = (tl + h * (x + 1.0)).exp();
            let v = g(s)?;
            for d in 0..3 {
                c[d] += h * w * s * v[d];
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// D(r) = r^{2−N}∫_{B_r}(|∇u|² − a u²/|x|² − h u² − f(x,u)u).
pub fn d_of(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    let modal = pb.modal_path(u).is_some();
    let c = cumulative3(&[r], &|s| volume_densities(u, pb, s, modal), modal)?;
    Ok(r.powi(2 - pb.dim() as i32) * c[0][0])
}

pub fn d_of_quadrature(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    let c = cumulative3(&[r], &|s| volume_densities(u, pb, s, false), false)?;
    Ok(r.powi(2 - pb.dim() as i32) * c[0][0])
}

/// N(r) = D(r)/H(r).
pub fn frequency(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    let h = h_of(u, pb, r)?;
    if h < 1e-300 {
        return Err(CssError::ZeroBoundaryNorm(r));
    }
    Ok(d_of(u, pb, r)? / h)
}

pub fn nu1_from(b: &BoundarySums, r: f64) -> f64 {
    2.0 * r * (b.ur_ur * b.uu - b.u_ur * b.u_ur) / (b.uu * b.uu)
}

pub fn nu1(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    let b = boundary_sums(u, pb, r)?;
    if b.uu < 1e-300 {
        return Err(CssError::ZeroBoundaryNorm(r));
    }
    Ok(nu1_from(&b, r))
}

fn boundary_f_term(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    if pb.f.is_zero() {
        return Ok(0.0);
    }
    sphere_integral(&pb.quad, r, |x, _| {
        let v = u.value(x);
        2.0 * (pb.f.big_f)(x, v) - (pb.f.f)(x, v) * v
    })
}

fn nu2_from(vol: &[f64; 3], bf: f64, uu: f64, r: f64, n: usize) -> f64 {
    // every ∂B_r integral carries r^{N-1}, volume ones are absolute
    let area = r.powi(n as i32 - 1);
    (-vol[1] + vol[2]) / (area * uu) + r * bf / uu
}

pub fn nu2(u: &dyn Field, pb: &Problem, r: f64) -> Result<f64> {
    let modal = pb.modal_path(u).is_some();
    let c = cumulative3(&[r], &|s| volume_densities(u, pb, s, modal), modal)?;
    let uu = h_of(u, pb, r)?;
    if uu < 1e-300 {
        return Err(CssError::ZeroBoundaryNorm(r));
    }
    Ok(nu2_from(&c[0], boundary_f_term(u, pb, r)?, uu, r, pb.dim()))
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyTrace {
    pub dim_n: usize,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    /// H' from the boundary flux
    pub dh: Vec<f64>,
    pub d: Vec<f64>,
    pub n: Vec<f64>,
    pub nu1: Vec<f64>,
    pub nu2: Vec<f64>,
    pub per_decade: usize,
    pub modal: bool,
}

pub fn frequency_trace(u: &dyn Field, pb: &Problem, r_lo: f64, r_hi: f64, per_decade: usize) -> Result<FrequencyTrace> {
    let grid = LogGrid::new(r_lo, r_hi, per_decade);
    let r = grid.radii();
    let modal = pb.modal_path(u).is_some();
    let n = pb.dim();
    let cum = cumulative3(&r, &|s| volume_densities(u, pb, s, modal), modal)?;
    let mut tr = FrequencyTrace {
        dim_n: n,
        r: r.clone(),
        h: vec![],
        dh: vec![],
        d: vec![],
        n: vec![],
        nu1: vec![],
        nu2: vec![],
        per_decade,
        modal,
    };
    for (j, &rj) in r.iter().enumerate() {
        let b = boundary_sums(u, pb, rj)?;
        if b.uu < 1e-300 {
            return Err(CssError::ZeroBoundaryNorm(rj));
        }
        let d = rj.powi(2 - n as i32) * cum[j][0];
        tr.h.push(b.uu);
        tr.dh.push(2.0 * b.u_ur);
        tr.d.push(d);
        tr.n.push(d / b.uu);
        tr.nu1.push(nu1_from(&b, rj));
        tr.nu2.push(nu2_from(&cum[j], boundary_f_term(u, pb, rj)?, b.uu, rj, n));
    }
    Ok(tr)
}

/// d/dr of samples on a log grid: fourth-order centred differences in ln r,
/// second-order one-sided at the two ends of each side.
pub fn log_derivative(r: &[f64], v: &[f64]) -> Vec<f64> {
    let m = r.len();
    assert!(m >= 5);
    let dt = (r[m - 1] / r[0]).ln() / (m - 1) as f64;
    (0..m)
        .map(|j| {
            let dv = if j >= 2 && j + 2 < m {
                (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * dt)
            } else if j < 2 {
                (-3.0 * v[j] + 4.0 * v[j + 1] - v[j + 2]) / (2.0 * dt)
            } else {
                (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * dt)
            };
            dv / r[j]
        })
        .collect()
}

impl FrequencyTrace {
    /// N' by differences, for comparison with ν₁ + ν₂.
    pub fn n_prime(&self) -> Vec<f64> {
        log_derivative(&self.r, &self.n)
    }

    /// H' by differences, for comparison with the flux form.
    pub fn h_prime_fd(&self) -> Vec<f64> {
        log_derivative(&self.r, &self.h)
    }

    pub fn decades(&self) -> f64 {
        (self.r[self.r.len() - 1] / self.r[0]).log10()
    }

    /// min over interior samples of N' − ν₂ (ν₁ ≥ 0 makes this nonnegative).
    pub fn min_n_prime_minus_nu2(&self) -> f64 {
        let np = self.n_prime();
        (2..self.r.len() - 2).map(|j| np[j] - self.nu2[j]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GammaFit {
    pub gamma: f64,
    /// None when N is constant along the trace
    pub delta: Option<f64>,
    pub c3: f64,
    pub exact: bool,
}

/// γ by Aitken extrapolation over the smallest decade, δ by log-log regression
/// of |N − γ| over the smallest three decades, C₃ from N − γ ≥ −C₃ r^δ.
pub fn estimate_gamma(tr: &FrequencyTrace) -> Result<GammaFit> {
    if tr.decades() < 3.0 - 1e-9 {
        return Err(CssError::NoConvergenceDetected(format!("trace spans {:.2} < 3 decades", tr.decades())));
    }
    let scale = tr.n.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let spread = tr.n.iter().map(|v| (v - tr.n[0]).abs()).fold(0.0, f64::max);
    if spread <= 1e-10 * scale {
        return Ok(GammaFit { gamma: tr.n[0], delta: None, c3: 0.0, exact: true });
    }
    let d = tr.per_decade;
    let (a, b, c) = (tr.n[0], tr.n[d / 2], tr.n[d]);
    let rho = (a - b) / (b - c);
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CssError::NoConvergenceDetected(format!(
            "successive variations of N do not shrink toward the origin (ratio {rho})"
        )));
    }
    let gamma = a - (a - b).powi(2) / ((a - b) - (b - c));
    let top = tr.r[0] * 1e3 * (1.0 + 1e-9);
    let pts: Vec<(f64, f64)> = tr
        .r
        .iter()
        .zip(&tr.n)
        .filter(|(r, v)| **r <= top && (**v - gamma).abs() > 1e-13 * scale)
        .map(|(r, v)| (r.ln(), (v - gamma).abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(CssError::NoConvergenceDetected("too few samples above round-off".into()));
    }
    let delta = slope(&pts);
    if !(delta > 0.0) {
        return Err(CssError::NoConvergenceDetected(format!("fitted rate exponent {delta} is not positive")));
    }
    let c3 = tr
        .r
        .iter()
        .zip(&tr.n)
        .map(|(r, v)| (gamma - v).max(0.0) / r.powf(delta))
        .fold(0.0, f64::max);
    Ok(GammaFit { gamma, delta: Some(delta), c3, exact: false })
}

pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Level whose σ⁺ matches the fitted γ.
pub fn match_gamma_to_spectrum(fit: &GammaFit, dec: &EigenDecomposition, tol: f64) -> Result<usize> {
    dec.level_for_gamma(fit.gamma, tol)
}

/// δ = min{ε, N(q−2*)/q·(α−2/2*), 2(q−2*)/q}.
pub fn delta_exponent(eps: f64, q: f64, n: usize, alpha_holder: f64) -> f64 {
    let ts = two_star(n);
    let nf = n as f64;
    eps.min(nf * (q - ts) / q * (alpha_holder - 2.0 / ts)).min(2.0 * (q - ts) / q)
}

/// Default Hölder exponent, the midpoint of (2/2*, 1).
pub fn default_holder_alpha(n: usize) -> f64 {
    (2.0 / two_star(n) + 1.0) / 2.0
}

/// q_lim = (2*/2)·min{4/Λ − 2, 2*} for Λ > 0, (2*)²/2 for Λ = 0.
pub fn q_lim_exponent(lambda: f64, n: usize) -> f64 {
    let ts = two_star(n);
    if lambda <= 0.0 {
        ts * ts / 2.0
    } else {
        ts / 2.0 * (4.0 / lambda - 2.0).min(ts)
    }
}

/// q = (2* + q_lim)/2.
pub fn midpoint_q(lambda: f64, n: usize) -> f64 {
    (two_star(n) + q_lim_exponent(lambda, n)) / 2.0
}

/// Best constant S in S‖u‖²_{2*} ≤ ‖∇u‖²₂ on ℝ^N.
pub fn sobolev_constant(n: usize) -> f64 {
    let nf = n as f64;
    std::f64::consts::PI * nf * (nf - 2.0) * (gamma_fn(nf / 2.0) / gamma_fn(nf)).powf(2.0 / nf)
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdData {
    pub lambda: f64,
    pub c_h: f64,
    pub eps: f64,
    pub c_f: f64,
    pub u_norm: f64,
    pub n: usize,
    pub k: usize,
}

impl ThresholdData {
    pub fn lhs(&self, r: f64) -> f64 {
        let (n, k) = (self.n, self.k);
        let nf = n as f64;
        let ts = two_star(n);
        let s = sobolev_constant(n);
        let kk = 2.0 / (k as f64 - 2.0);
        let comb = binomial(n, k) * kk * kk * (1.0 + if n >= 2 * k { binomial(n - k, k) } else { 0.0 });
        self.lambda
            + self.c_h * r.powf(self.eps) * comb
            + self.c_f / s * ((sphere_area(n) / nf).powf(2.0 / nf) * r * r + self.u_norm.powf(ts - 2.0))
    }

    /// Largest r₀ ≤ radius with lhs(r₀) < 1, by bisection.
    pub fn r0(&self, radius: f64) -> Result<f64> {
        if self.k < 3 {
            return Err(CssError::DimensionTooSmall { n: self.n, k: self.k });
        }
        if self.lhs(0.0) >= 1.0 {
            return Err(CssError::NoAdmissibleRadius(format!("value at r = 0 is {}", self.lhs(0.0))));
        }
        if self.lhs(radius) < 1.0 {
            return Ok(radius);
        }
        let (mut lo, mut hi) = (0.0, radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.lhs(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * radius {
                break;
            }
        }
        Ok(lo)
    }
}

/// Admissible radius for the given data inside B_radius.
pub fn r0_threshold(
    coeff: &AngularCoefficient,
    h: &PerturbationH,
    f: &NonlinearityF,
    u_norm_2star: f64,
    radius: f64,
) -> Result<f64> {
    let lambda = lambda_of(coeff)?;
    ThresholdData {
        lambda,
        c_h: h.c_h,
        eps: h.eps,
        c_f: f.c_f,
        u_norm: u_norm_2star,
        n: coeff.dim(),
        k: coeff.block(),
    }
    .r0(radius)
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub c4: f64,
    /// maxima over windows starting in each decade, smallest radii first
    pub per_decade: Vec<f64>,
    pub bound: f64,
}

/// ln H at ln r by cubic Lagrange interpolation in ln r.
fn log_h_at(tr: &FrequencyTrace, r: f64) -> Option<f64> {
    let m = tr.r.len();
    let (t0, t1) = (tr.r[0].ln(), tr.r[m - 1].ln());
    let t = r.ln();
    if t < t0 - 1e-12 || t > t1 + 1e-12 {
        return None;
    }
    let dt = (t1 - t0) / (m - 1) as f64;
    let u = (t - t0) / dt;
    let i = (u.floor() as isize - 1).clamp(0, m as isize - 4) as usize;
    let mut v = 0.0;
    for a in i..i + 4 {
        let mut l = 1.0;
        for b in i..i + 4 {
            if a != b {
                l *= (u - b as f64) / (a as f64 - b as f64);
            }
        }
        v += l * tr.h[a].ln();
    }
    Some(v)
}

/// max over sampled λ and R ∈ [1, 2] of max{H(Rλ)/H(λ), H(λ)/H(Rλ)}, with H
/// interpolated in log-log coordinates between trace nodes.
pub fn check_doubling(tr: &FrequencyTrace) -> DoublingReport {
    let decades = tr.decades().round().max(1.0) as usize;
    let mut per = vec![1.0f64; decades];
    let mut c4 = 1.0f64;
    for (i, &lam) in tr.r.iter().enumerate() {
        let base = tr.h[i].ln();
        for step in 1..=8 {
            let big_r = 1.0 + step as f64 / 8.0;
            let Some(lh) = log_h_at(tr, big_r * lam) else { break };
            let q = (lh - base).abs().exp();
            c4 = c4.max(q);
            let dec = (((lam / tr.r[0]).log10() + 1e-9) as usize).min(decades - 1);
            per[dec] = per[dec].max(q);
        }
    }
    let c2 = tr.n.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let bound = 4f64.powf(c2).max(2f64.powi(tr.dim_n as i32 - 2));
    DoublingReport { c4, per_decade: per, bound }
}

#[derive(Debug, Clone, Serialize)]
pub struct HBounds {
    pub k1: f64,
    pub k2: f64,
    /// lim r^{-2γ}H(r), extrapolated
    pub limit: f64,
    /// relative variation of r^{-2γ}H over the smallest decade
    pub last_decade_variation: f64,
}

pub fn check_h_bounds(tr: &FrequencyTrace, gamma: f64, sigma_probe: f64) -> HBounds {
    let g: Vec<f64> = tr.r.iter().zip(&tr.h).map(|(r, h)| h * r.powf(-2.0 * gamma)).collect();
    let k1 = g.iter().fold(0.0f64, |a, &v| a.max(v));
    let k2 = tr
        .r
        .iter()
        .zip(&tr.h)
        .map(|(r, h)| h * r.powf(-2.0 * gamma - sigma_probe))
        .fold(f64::INFINITY, f64::min);
    let d = tr.per_decade.min(g.len() - 1);
    let (a, b, c) = (g[0], g[d / 2], g[d]);
    let denom = (a - b) - (b - c);
    let rho = (a - b) / (b - c);
    let limit = if denom.abs() > 1e-14 * a.abs() && rho > 0.0 && rho < 1.0 {
        a - (a - b).powi(2) / denom
    } else {
        a
    };
    let hi = g[..=d].iter().fold(f64::NEG_INFINITY, |x, &v| x.max(v));
    let lo = g[..=d].iter().fold(f64::INFINITY, |x, &v| x.min(v));
    HBounds { k1, k2, limit, last_decade_variation: (hi - lo) / limit.abs() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use crate::spectrum::assemble_spectrum;
    use std::sync::Arc;

    fn setup(n: usize, k: usize, alpha: f64, count: usize) -> (Problem, Arc<EigenDecomposition>) {
        let coeff = AngularCoefficient::cylindrical(n, k, alpha).unwrap();
        let dec = Arc::new(assemble_spectrum(&coeff, count, 8).unwrap());
        (Problem::unperturbed(coeff, 10).unwrap(), dec)
    }

    #[test]
    fn homogeneous_h_d_and_n() {
        let (pb, dec) = setup(5, 3, 0.15, 2);
        let u = ModalSolution::homogeneous(dec, 0, 1.0, 1.0).unwrap();
        let g = u.modes[0].sigma_plus;
        for r in [1e-3, 0.1, 0.8] {
            let h = h_of(&u, &pb, r).unwrap();
            assert!((h - r.powf(2.0 * g)).abs() < 1e-12 * h);
            let d = d_of(&u, &pb, r).unwrap();
            assert!((d - g * r.powf(2.0 * g)).abs() < 1e-10 * h, "{d}");
            assert!((frequency(&u, &pb, r).unwrap() - g).abs() < 1e-9);
        }
        // the same through sphere quadrature; ψ₁ is constant in the block angles
        let pb = Problem::unperturbed(pb.coeff.clone(), 2).unwrap();
        let r = 0.3;
        let hq = h_of_quadrature(&u, &pb, r).unwrap();
        assert!((hq - r.powf(2.0 * g)).abs() < 1e-8 * hq);
        let dq = d_of_quadrature(&u, &pb, r).unwrap();
        assert!((dq - g * r.powf(2.0 * g)).abs() < 1e-6 * hq, "{dq} vs {}", g * r.powf(2.0 * g));
    }

    #[test]
    fn constant_field() {
        let coeff = AngularCoefficient::new(4, 3).unwrap();
        let pb = Problem::unperturbed(coeff, 6).unwrap();
        let u = FnField::new(4, |_| 2.0).with_gradient(|_| vec![0.0; 4]);
        let h = h_of(&u, &pb, 0.5).unwrap();
        assert!((h - 4.0 * sphere_area(4)).abs() < 1e-12);
        assert!(d_of(&u, &pb, 0.5).unwrap().abs() < 1e-14);
        assert_eq!(frequency(&u, &pb, 0.5).unwrap(), 0.0);
        let z = FnField::new(4, |_| 0.0).with_gradient(|_| vec![0.0; 4]);
        assert!(matches!(frequency(&z, &pb, 0.5), Err(CssError::ZeroBoundaryNorm(_))));
    }

    #[test]
    fn two_mode_dirichlet_sum_matches_quadrature() {
        let (pb, dec) = setup(4, 3, 0.1, 3);
        let j = dec.levels[1].first;
        let s0 = dec.levels[0].sigma_plus;
        let s1 = dec.levels[1].sigma_plus;
        let u = ModalSolution::from_powers(dec, &[(0, 1.0, s0), (j, -0.7, s1)], 1.0).unwrap();
        let r = 0.4;
        let fast = d_of(&u, &pb, r).unwrap();
        let slow = d_of_quadrature(&u, &pb, r).unwrap();
        assert!((fast - slow).abs() < 1e-6 * fast.abs(), "{fast} vs {slow}");
        let per_mode = s0 * r.powf(2.0 * s0) + 0.49 * s1 * r.powf(2.0 * s1);
        assert!((fast - per_mode).abs() < 1e-10 * fast.abs());
    }

    #[test]
    fn fd_gradient_near_singular_set_is_refused() {
        let (pb, _) = setup(4, 3, 0.1, 1);
        let u = FnField::new(4, |x| x[3]);
        assert!(matches!(d_of(&u, &pb, 0.5), Err(CssError::NearSingularGradient)));
    }

    #[test]
    fn perturbed_trace_identities() {
        let (mut pb, dec) = setup(5, 3, 3.0 / 16.0, 2);
        pb.h = PerturbationH::radial_power(0.1, 0.5).unwrap();
        let u = ModalSolution::generate(dec.clone(), pb.h.clone(), &[0], &[1.0], 1.0).unwrap();
        let tr = frequency_trace(&u, &pb, 1e-6, 1e-1, 20).unwrap();
        // D = rH'/2 and H' from the flux matches differences
        let fd = tr.h_prime_fd();
        for j in 2..tr.r.len() - 2 {
            assert!((tr.d[j] - tr.r[j] * tr.dh[j] / 2.0).abs() < 1e-7 * tr.d[j].abs().max(tr.h[j]));
            assert!((fd[j] - tr.dh[j]).abs() < 1e-6 * tr.dh[j].abs());
        }
        // single mode: ν₁ vanishes, N' = ν₂
        let np = tr.n_prime();
        for j in 2..tr.r.len() - 2 {
            assert!(tr.nu1[j].abs() < 1e-12 * (1.0 + tr.n[j].powi(2)) / tr.r[j]);
            assert!((np[j] - tr.nu2[j]).abs() < 1e-4 * tr.nu2[j].abs() + 1e-9);
        }
        assert!(tr.min_n_prime_minus_nu2() > -1e-6);
        let fit = estimate_gamma(&tr).unwrap();
        let sp = dec.levels[0].sigma_plus;
        assert!((fit.gamma - sp).abs() < 1e-4, "{} vs {sp}", fit.gamma);
        let delta = fit.delta.unwrap();
        assert!((0.4..=0.6).contains(&delta), "{delta}");
        assert_eq!(match_gamma_to_spectrum(&fit, &dec, 1e-4).unwrap(), 0);
        for (r, n) in tr.r.iter().zip(&tr.n) {
            assert!(n - fit.gamma >= -fit.c3 * r.powf(delta) * (1.0 + 1e-12));
            assert!(*n > -(5.0 - 2.0) / 2.0);
        }
        let dbl = check_doubling(&tr);
        assert!(dbl.c4 <= dbl.bound);
        let last = dbl.per_decade.len();
        assert!((dbl.per_decade[0] - dbl.per_decade[1]).abs() < 0.1 * dbl.per_decade[0]);
        assert!(last >= 2);
        let hb = check_h_bounds(&tr, fit.gamma, 0.1);
        assert!(hb.k1.is_finite() && hb.k2 > 0.0);
        assert!(hb.last_decade_variation < 0.05);
        assert!(hb.limit > 1e-8 * hb.k1);
    }

    #[test]
    fn homogeneous_trace_is_exact() {
        let (pb, dec) = setup(5, 3, 3.0 / 16.0, 1);
        let u = ModalSolution::homogeneous(dec, 0, 1.0, 1.0).unwrap();
        let tr = frequency_trace(&u, &pb, 1e-4, 1e-1, 10).unwrap();
        let fit = estimate_gamma(&tr).unwrap();
        assert!(fit.exact && fit.delta.is_none());
        let g = u.modes[0].sigma_plus;
        assert!((fit.gamma - g).abs() < 1e-9);
        let dbl = check_doubling(&tr);
        assert!((dbl.c4 - 2f64.powf(2.0 * g.abs())).abs() < 1e-9 * dbl.c4);
        let hb = check_h_bounds(&tr, g, 0.1);
        assert!((hb.k1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_trace_is_rejected() {
        let (pb, dec) = setup(5, 3, 0.1, 1);
        let u = ModalSolution::homogeneous(dec, 0, 1.0, 1.0).unwrap();
        let tr = frequency_trace(&u, &pb, 1e-2, 1e-1, 10).unwrap();
        assert!(matches!(estimate_gamma(&tr), Err(CssError::NoConvergenceDetected(_))));
    }

    #[test]
    fn exponent_formulas() {
        // 2* = 10/3 for N = 5
        assert!((delta_exponent(0.5, 20.0 / 3.0, 5, 0.9) - 0.5).abs() < 1e-15);
        assert!((delta_exponent(0.01, 20.0 / 3.0, 5, 0.9) - 0.01).abs() < 1e-15);
        assert!(delta_exponent(0.5, 10.0 / 3.0 + 1e-12, 5, 0.9) < 1e-11);
        assert!((q_lim_exponent(0.0, 5) - 50.0 / 9.0).abs() < 1e-13);
        assert!((q_lim_exponent(0.75, 5) - 50.0 / 9.0).abs() < 1e-13);
        assert!((q_lim_exponent(1.0 - 1e-12, 5) - 10.0 / 3.0).abs() < 1e-10);
        // S_3 = 3(π/2)^{4/3}
        assert!((sobolev_constant(3) - 3.0 * (std::f64::consts::PI / 2.0).powf(4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn admissible_radius() {
        let base = ThresholdData { lambda: 0.5, c_h: 0.0, eps: 0.5, c_f: 0.0, u_norm: 0.0, n: 5, k: 3 };
        assert_eq!(base.r0(0.8).unwrap(), 0.8);
        let bad = ThresholdData { lambda: 0.99, c_f: 50.0, u_norm: 1.0, ..base };
        assert!(matches!(bad.r0(1.0), Err(CssError::NoAdmissibleRadius(_))));
        let mut prev = f64::INFINITY;
        for c_h in [0.1, 0.5, 2.0, 8.0] {
            let d = ThresholdData { c_h, ..base };
            let r0 = d.r0(1.0).unwrap();
            assert!(r0 < prev);
            prev = r0;
            // dense scan oracle
            let m = 200_000;
            let scan = (0..=m).map(|i| i as f64 / m as f64).filter(|&r| d.lhs(r) < 1.0).fold(0.0, f64::max);
            assert!((scan - r0).abs() < 1.0 / m as f64 + 1e-12);
            let lo = r0 * (1.0 - 1e-8);
            let hi = r0 * (1.0 + 1e-8);
            assert!(d.lhs(lo) < 1.0 && d.lhs(hi) >= 1.0);
        }
    }
}
