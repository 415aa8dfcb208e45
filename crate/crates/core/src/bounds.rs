//! Weighted machinery built on the positive part â of the coefficient:
//! the weight ρ(x) = |x|^{σ̂} ψ̂₁(x/|x|), the weighted Sobolev constant and
//! the constants of the weighted Moser iteration.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CssError, Result};
use crate::field::{Field, SphereQuad};
use crate::numerics::gauss::{legendre_on, log_panels, Rule1d};
use crate::numerics::poly::Poly;
use crate::numerics::sphere::sphere_area;
use crate::numerics::{binomial, norm, two_star};
use crate::potential::AngularCoefficient;
use crate::spectrum::{assemble_spectrum_with, gamma_exponent, lambda_of, mu1_closed_form, AngularMode, EigenDecomposition, SpectrumOptions};

/// σ̂ = −(N−2)/2 + √(((N−2)/2)² + μ₁(â)).
pub fn sigma_hat_of(coeff: &AngularCoefficient) -> Result<f64> {
    Ok(WeightRho::build(coeff, 1.0, &WeightOptions::default())?.sigma_hat)
}

#[derive(Debug, Clone)]
pub struct WeightOptions {
    pub galerkin_degree: u32,
    pub max_sector_degree: u32,
    /// sphere degree of the grid used for inf ψ̂₁ and d
    pub grid_degree: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { galerkin_degree: 8, max_sector_degree: 12, grid_degree: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct WeightRho {
    pub coeff_hat: AngularCoefficient,
    pub lambda_hat: f64,
    pub mu1_hat: f64,
    pub sigma_hat: f64,
    /// first eigenfunction of −Δ_S − â, L²-normalized and positive
    pub psi_hat1: AngularMode,
    pub sign: f64,
    pub inf_psi: f64,
    pub radius: f64,
    /// sup over B_R of ρ^{2−2*}
    pub d: f64,
    pub decomposition: Option<Arc<EigenDecomposition>>,
}

fn constant_mode(n: usize) -> AngularMode {
    let c = 1.0 / sphere_area(n).sqrt();
    AngularMode::Harmonic { poly: Arc::new(Poly::monomial(vec![0; n], c)), degree: 0 }
}

impl WeightRho {
    pub fn build(coeff: &AngularCoefficient, radius: f64, opts: &WeightOptions) -> Result<Self> {
        let n = coeff.dim();
        let coeff_hat = coeff.a_hat();
        let lambda_hat = lambda_of(&coeff_hat)?;
        if lambda_hat >= 1.0 {
            return Err(CssError::IndefiniteForm(lambda_hat));
        }
        let (mu1_hat, psi_hat1, decomposition) = if coeff_hat.is_zero() {
            (0.0, constant_mode(n), None)
        } else {
            let so = SpectrumOptions {
                count: 1,
                max_sector_degree: opts.max_sector_degree,
                galerkin_degree: opts.galerkin_degree,
                ..Default::default()
            };
            let dec = assemble_spectrum_with(&coeff_hat, &so)?;
            let mu1 = mu1_closed_form(&coeff_hat).unwrap_or(dec.mu1());
            (mu1, dec.psi(0).clone(), Some(Arc::new(dec)))
        };
        let sigma_hat = gamma_exponent(n, mu1_hat)?.0;
        if sigma_hat > 1e-9 || mu1_hat > 1e-9 {
            return Err(CssError::ConditionViolated(format!("σ̂ = {sigma_hat}, μ₁(â) = {mu1_hat} should be ≤ 0")));
        }
        let quad = SphereQuad::adapted(&coeff_hat, opts.grid_degree)?;
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..quad.len() {
            let v = psi_hat1.eval(quad.point(i));
            sum += quad.weights[i] * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let sign = if sum >= 0.0 { 1.0 } else { -1.0 };
        let inf_psi = if sign > 0.0 { lo } else { -hi };
        if inf_psi <= 0.0 {
            return Err(CssError::ConditionViolated(format!("ψ̂₁ not positive on the grid (inf {inf_psi})")));
        }
        let ts = two_star(n);
        let d = radius.powf(sigma_hat * (2.0 - ts)) * inf_psi.powf(2.0 - ts);
        Ok(Self { coeff_hat, lambda_hat, mu1_hat, sigma_hat, psi_hat1, sign, inf_psi, radius, d, decomposition })
    }

    pub fn dim(&self) -> usize {
        self.coeff_hat.dim()
    }

    pub fn psi(&self, th: &[f64]) -> f64 {
        self.sign * self.psi_hat1.eval(th)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        r.powf(self.sigma_hat) * self.psi(&th)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        let p = self.psi(&th);
        let g = self.psi_hat1.grad(&th);
        let rs = r.powf(self.sigma_hat - 1.0);
        th.iter().zip(g).map(|(t, gt)| rs * (self.sigma_hat * p * t + self.sign * gt)).collect()
    }
}

/// Max relative residual of −Δρ − â ρ/|x|² over the cloud (4th-order differences).
pub fn rho_residual(w: &WeightRho, cloud: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in cloud {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        let dist = w.coeff_hat.dist_to_singular(&th);
        let hs = 1e-3 * r * dist.min(1.0);
        if !w.coeff_hat.is_zero() && dist < 1e-2 {
            return Err(CssError::NearSingularGradient);
        }
        let r0 = w.eval(x);
        let mut y = x.clone();
        let mut lap = 0.0;
        for d in 0..x.len() {
            let mut at = |o: f64| {
                y[d] = x[d] + o * hs;
                w.eval(&y)
            };
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            y[d] = x[d];
            lap += (-p2 + 16.0 * p1 - 30.0 * r0 + 16.0 * m1 - m2) / (12.0 * hs * hs);
        }
        let pot = w.coeff_hat.eval_unchecked(&th) * r0 / (r * r);
        let scale = lap.abs().max(pot.abs()).max(r0.abs() / (r * r));
        worst = worst.max((lap + pot).abs() / scale);
    }
    Ok(worst)
}

/// Points in the shell 0.2 ≤ |x| ≤ 1 at angular distance ≥ `eta` from the singular set.
pub fn sample_cloud(coeff: &AngularCoefficient, count: usize, eta: f64, seed: u64) -> Vec<Vec<f64>> {
    let n = coeff.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&x);
        if !(0.2..=1.0).contains(&r) {
            continue;
        }
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        if coeff.dist_to_singular(&th) >= eta {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevEstimate {
    pub value: f64,
    /// minimum per sphere-quadrature level, coarse to fine
    pub levels: Vec<f64>,
    pub nu: f64,
}

/// Discrete minimum of Q_â(u)/‖u‖²_{2*} over u = r^{σ̂}(1 + r^{2ν})^{−(N−2)/2} Σ c_j ψ̂_j,
/// ν scanned around its separable optimum and c over the first modes.
pub fn s_hat_constant(coeff: &AngularCoefficient) -> Result<SobolevEstimate> {
    let w = WeightRho::build(coeff, 1.0, &WeightOptions::default())?;
    let n = w.dim();
    let nf = n as f64;
    let ts = two_star(n);
    let (basis, mus): (Vec<AngularMode>, Vec<f64>) = match &w.decomposition {
        None => (vec![constant_mode(n)], vec![0.0]),
        Some(_) => {
            let so = SpectrumOptions { count: 3, ..Default::default() };
            let dec = assemble_spectrum_with(&w.coeff_hat, &so)?;
            (0..dec.len()).map(|i| (dec.psi(i).clone(), dec.pairs[i].mu)).unzip()
        }
    };
    let nu0 = (2.0 * w.sigma_hat + nf - 2.0) / (nf - 2.0);
    let base = legendre_on(400, -40.0, 40.0);
    let radial = |nu: f64| -> Result<(f64, f64, f64)> {
        // ∫g'² r^{N−1}, ∫g² r^{N−3}, ∫|g|^{2*} r^{N−1} in t = ln r
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (t, wt) in base.nodes.iter().zip(&base.weights) {
            let (t, wt) = (t / nu, wt / nu);
            let r = t.exp();
            let q = r.powf(2.0 * nu);
            let g = r.powf(w.sigma_hat) * (1.0 + q).powf(-(nf - 2.0) / 2.0);
            let dg = g / r * (w.sigma_hat - (nf - 2.0) * nu * q / (1.0 + q));
            let jac = r.powf(nf) * wt;
            a += jac * dg * dg;
            b += jac * g * g / (r * r);
            c += jac * g.abs().powf(ts);
        }
        Ok((a, b, c))
    };
    let mut levels = Vec::new();
    let mut best_nu = nu0;
    for deg in [4usize, 8] {
        let quad = SphereQuad::adapted(&w.coeff_hat, deg)?;
        let table: Vec<Vec<f64>> = (0..quad.len()).map(|i| basis.iter().map(|p| p.eval(quad.point(i))).collect()).collect();
        let p_int = |c: &[f64]| -> f64 {
            table
                .iter()
                .zip(&quad.weights)
                .map(|(row, wt)| wt * row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>().abs().powf(ts))
                .sum()
        };
        let quotient = |nu: f64, c: &[f64], p: f64| -> Result<f64> {
            let (a, b, cc) = radial(nu)?;
            let m2: f64 = c.iter().map(|v| v * v).sum();
            let mu2: f64 = c.iter().zip(&mus).map(|(v, m)| v * v * m).sum();
            Ok((a * m2 + b * mu2) / (cc * p).powf(2.0 / ts))
        };
        let mut c = vec![0.0; basis.len()];
        c[0] = 1.0;
        let mut p = p_int(&c);
        let mut nu = nu0;
        let mut best = quotient(nu, &c, p)?;
        let mut step = 0.2;
        while step > 1e-4 {
            let mut improved = false;
            for cand in [nu * (1.0 + step), nu / (1.0 + step)] {
                let q = quotient(cand, &c, p)?;
                if q < best * (1.0 - 1e-12) {
                    best = q;
                    nu = cand;
                    improved = true;
                }
            }
            for j in 1..c.len() {
                for dir in [step, -step] {
                    let mut cc = c.clone();
                    cc[j] += dir;
                    let pc = p_int(&cc);
                    let q = quotient(nu, &cc, pc)?;
                    if q < best * (1.0 - 1e-12) {
                        best = q;
                        c = cc;
                        p = pc;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best_nu = nu;
        levels.push(best);
    }
    let value = *levels.last().unwrap();
    let (a, b) = (levels[0], levels[1]);
    if (a - b).abs() > 1e-2 * b {
        return Err(CssError::NonConvergence(format!("weighted Sobolev quotient moved {a} -> {b} under refinement")));
    }
    Ok(SobolevEstimate { value, levels, nu: best_nu })
}

/// Smooth test function v(x) = η(|x|)(c₀ + b·x + xᵀAx) with the unit bump η.
#[derive(Debug, Clone)]
pub struct BumpPoly {
    pub c0: f64,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl BumpPoly {
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let c0 = rng.gen_range(-1.0..1.0);
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        Self { c0, b, a }
    }

    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            return (0.0, vec![0.0; n]);
        }
        let q = 1.0 - r2;
        let eta = (1.0 - 1.0 / q).exp();
        let mut g = vec![0.0; n];
        let v = self.eval_grad_with(x, eta, -2.0 * eta / (q * q), &mut g);
        (v, g)
    }

    /// Same with η(|x|) and η'(|x|)/|x| supplied; writes ∇v into `g`.
    fn eval_grad_with(&self, x: &[f64], eta: f64, deta_over_r: f64, g: &mut [f64]) -> f64 {
        let n = x.len();
        let mut p = self.c0;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let ax: f64 = row.iter().zip(x).map(|(u, v)| u * v).sum();
            p += (self.b[i] + ax) * x[i];
            g[i] = self.b[i] + 2.0 * ax;
        }
        for i in 0..n {
            g[i] = eta * g[i] + p * deta_over_r * x[i];
        }
        p * eta
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedSobolevCheck {
    pub constant: f64,
    pub worst_quotient: f64,
    pub count: usize,
    pub pass: bool,
}

/// ∫ρ²|∇v|² ≥ c (∫ρ^{2*}|v|^{2*})^{2/2*} for `count` seeded BumpPoly test functions.
pub fn weighted_sobolev_check(w: &WeightRho, constant: f64, count: usize, seed: u64, degree: usize) -> Result<WeightedSobolevCheck> {
    let n = w.dim();
    let ts = two_star(n);
    let quad = SphereQuad::adapted(&w.coeff_hat, degree)?;
    let psi: Vec<f64> = (0..quad.len()).map(|i| w.psi(quad.point(i))).collect();
    // the region below 1e−6 carries a negligible share of either side
    let mut rule = log_panels(1e-6, 0.1, 5, 8);
    let top = legendre_on(24, 0.1, 1.0);
    rule.nodes.extend(top.nodes);
    rule.weights.extend(top.weights);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fam: Vec<BumpPoly> = (0..count).map(|_| BumpPoly::random(n, &mut rng)).collect();
    let mut lhs = vec![0.0; count];
    let mut rhs = vec![0.0; count];
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (r, wr) in rule.nodes.iter().zip(&rule.weights) {
        let rs = r.powf(w.sigma_hat);
        let q = 1.0 - r * r;
        let eta = (1.0 - 1.0 / q).exp();
        let deta = -2.0 * eta / (q * q);
        let jac = wr * r.powi(n as i32 - 1);
        for i in 0..quad.len() {
            let th = quad.point(i);
            for (d, t) in th.iter().enumerate() {
                x[d] = r * t;
            }
            let rho = rs * psi[i];
            let wt = jac * quad.weights[i];
            let rho_ts = rho.powf(ts);
            for (j, f) in fam.iter().enumerate() {
                let v = f.eval_grad_with(&x, eta, deta, &mut g);
                lhs[j] += wt * rho * rho * g.iter().map(|c| c * c).sum::<f64>();
                rhs[j] += wt * rho_ts * v.abs().powf(ts);
            }
        }
    }
    let worst = lhs
        .iter()
        .zip(&rhs)
        .filter(|(_, r)| **r > 0.0)
        .map(|(l, r)| l / r.powf(2.0 / ts))
        .fold(f64::INFINITY, f64::min);
    Ok(WeightedSobolevCheck { constant, worst_quotient: worst, count, pass: worst >= constant })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportResidual {
    pub weighted: f64,
    pub form: f64,
    pub relative: f64,
}

/// ∫ρ²|∇v|² against ∫|∇(ρv)|² − â(ρv)²/|x|² for v = scale·η(|x−c|/s),
/// by a tensor Gauss rule on the cube around the support.
pub fn quadratic_form_transport(w: &WeightRho, center: &[f64], support: f64, scale: f64, per_dim: usize) -> Result<TransportResidual> {
    let n = w.dim();
    if norm(center) <= support {
        return Err(CssError::QuadratureFailure("support must avoid the origin".into()));
    }
    let rules: Vec<Rule1d> = center.iter().map(|c| legendre_on(per_dim, c - support, c + support)).collect();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let (mut lw, mut rf) = (0.0, 0.0);
    'outer: loop {
        let mut wt = 1.0;
        for d in 0..n {
            x[d] = rules[d].nodes[idx[d]];
            wt *= rules[d].weights[idx[d]];
        }
        let z: Vec<f64> = x.iter().zip(center).map(|(a, b)| (a - b) / support).collect();
        let z2: f64 = z.iter().map(|v| v * v).sum();
        if z2 < 1.0 {
            let q = 1.0 - z2;
            let v = scale * (1.0 - 1.0 / q).exp();
            let gv: Vec<f64> = z.iter().map(|zi| -v * 2.0 * zi / (q * q) / support).collect();
            let r = norm(&x);
            let th: Vec<f64> = x.iter().map(|c| c / r).collect();
            if w.coeff_hat.dist_to_singular(&th) < 1e-8 {
                return Err(CssError::QuadratureFailure("test support meets the singular set".into()));
            }
            let rho = w.eval(&x);
            let grho = w.gradient(&x);
            lw += wt * rho * rho * gv.iter().map(|c| c * c).sum::<f64>();
            let gu: f64 = grho.iter().zip(&gv).map(|(a, b)| (a * v + rho * b).powi(2)).sum();
            rf += wt * (gu - w.coeff_hat.eval_unchecked(&th) * (rho * v).powi(2) / (r * r));
        }
        for d in 0..n {
            idx[d] += 1;
            if idx[d] < per_dim {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    let relative = (lw - rf).abs() / lw.abs().max(rf.abs()).max(1e-300);
    Ok(TransportResidual { weighted: lw, form: rf, relative })
}

/// Inputs of the weighted Moser-iteration constants.
#[derive(Debug, Clone, Serialize)]
pub struct BkInput {
    pub q: f64,
    pub n: usize,
    pub k: usize,
    /// Lebesgue exponent s of V₊
    pub s: f64,
    /// ‖V₊‖ in L^s(ρ^{2*})
    pub v_norm: f64,
    pub c_h: f64,
    pub eps: f64,
    pub lambda_hat: f64,
    pub d: f64,
    pub s_hat: f64,
    /// dist(Ω′, ∂Ω)
    pub dist: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BkConstants {
    pub c_q: f64,
    pub ell_q: f64,
    pub bound_factor: f64,
    /// Hölder exponent α ∈ (2/2*, 1), midpoint default
    pub alpha: f64,
}

pub fn bk_constants(p: &BkInput) -> Result<BkConstants> {
    let nf = p.n as f64;
    if p.q <= 2.0 || p.s <= nf / 2.0 {
        return Err(CssError::ConditionViolated(format!("need q > 2 and s > N/2 (q = {}, s = {})", p.q, p.s)));
    }
    let c_q = (0.25f64).min(4.0 / (p.q + 4.0));
    let m = (16.0f64).max(p.q + 4.0);
    let ell1 = (m / p.s_hat * p.v_norm.powf(2.0 * p.s / nf)).powf(nf / (2.0 * p.s - nf));
    let e = p.eps;
    let kf = p.k as f64;
    let b1 = binomial(p.n, p.k);
    let b2 = 1.0 + if p.n >= 2 * p.k { binomial(p.n - p.k, p.k) } else { 0.0 };
    let ell2 = p.d * p.c_h.powf(2.0 / e) * (2.0 / (kf - 2.0)).powf(2.0 * (2.0 - e) / e) * b1.powf(2.0 / e) * b2.powf(2.0 / e)
        / (1.0 - p.lambda_hat).powf((2.0 - e) / e)
        * m.powf((2.0 - e) / e);
    let ell_q = ell1.max(ell2);
    let dd = p.dist * p.dist;
    let bound_factor = 20.0 / c_q * p.d / dd + 4.0 * (p.q - 2.0) * p.d / dd + 4.0 * ell_q / c_q;
    Ok(BkConstants { c_q, ell_q, bound_factor, alpha: (2.0 / two_star(p.n) + 1.0) / 2.0 })
}

/// s = q/(2*−2), the exponent of V₊ produced by |f(x,u)/u| with f of growth q.
pub fn s_exponent(q: f64, n: usize) -> f64 {
    q / (two_star(n) - 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellSup {
    pub r: f64,
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub sigma_hat: f64,
    pub d: f64,
    /// sup |u|/ρ over all shells, per sphere-quadrature level
    pub per_level: Vec<f64>,
    /// finest level, per shell
    pub shells: Vec<ShellSup>,
    pub pass: bool,
}

/// sup |u|/ρ on shells from R down to 1e−4·R; passes when the last two
/// levels agree within 10%.
pub fn pointwise_bound_check(u: &dyn Field, w: &WeightRho, radius: f64, levels: &[usize]) -> Result<BoundCheck> {
    if levels.len() < 2 {
        return Err(CssError::ConditionViolated("need at least two refinement levels".into()));
    }
    let n = w.dim();
    let radii: Vec<f64> = (0..=16).map(|j| radius * 10f64.powf(-(j as f64) / 4.0)).collect();
    let mut per_level = Vec::new();
    let mut shells = Vec::new();
    for &deg in levels {
        let quad = SphereQuad::adapted(&w.coeff_hat, deg)?;
        let psi: Vec<f64> = (0..quad.len()).map(|i| w.psi(quad.point(i))).collect();
        let sups: Vec<ShellSup> = std::thread::scope(|scope| {
            let handles: Vec<_> = radii
                .iter()
                .map(|&r| {
                    let quad = &quad;
                    let psi = &psi;
                    scope.spawn(move || {
                        let mut x = vec![0.0; n];
                        let rs = r.powf(w.sigma_hat);
                        let mut sup = 0.0f64;
                        for i in 0..quad.len() {
                            for (d, t) in quad.point(i).iter().enumerate() {
                                x[d] = r * t;
                            }
                            sup = sup.max(u.value(&x).abs() / (rs * psi[i]));
                        }
                        ShellSup { r, sup_ratio: sup }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("shell worker panicked")).collect()
        });
        per_level.push(sups.iter().map(|s| s.sup_ratio).fold(0.0, f64::max));
        shells = sups;
    }
    let (a, b) = (per_level[per_level.len() - 2], per_level[per_level.len() - 1]);
    let pass = b.is_finite() && (a - b).abs() <= 0.1 * b.abs().max(a.abs());
    Ok(BoundCheck { sigma_hat: w.sigma_hat, d: w.d, per_level, shells, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::sobolev_constant;
    use crate::field::FnField;
    use crate::potential::PerturbationH;
    use crate::radial::ModalSolution;
    use crate::spectrum::{assemble_spectrum, mu1_closed_form_cylindrical};

    #[test]
    fn sigma_hat_values() {
        let neg = AngularCoefficient::cylindrical(5, 3, -0.4).unwrap();
        assert_eq!(sigma_hat_of(&neg).unwrap(), 0.0);
        let c = AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).unwrap();
        assert!((sigma_hat_of(&c).unwrap() + 0.25).abs() < 1e-12);
        for (n, k, a) in [(6, 3, 0.1), (7, 4, 0.5)] {
            let c = AngularCoefficient::cylindrical(n, k, a).unwrap();
            let gp = mu1_closed_form_cylindrical(n, k, a).unwrap().gamma_prime;
            assert!((sigma_hat_of(&c).unwrap() - gp).abs() < 1e-12);
        }
        let bad = AngularCoefficient::new(6, 3).unwrap().with_cyl(&[1, 2, 3], 0.2).unwrap().with_cyl(&[4, 5, 6], 0.2).unwrap();
        let bad = bad.scaled(5.0);
        assert!(matches!(sigma_hat_of(&bad), Err(CssError::IndefiniteForm(_))));
    }

    #[test]
    fn rho_closed_form_and_residual() {
        let c = AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).unwrap();
        let w = WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap();
        let cloud = sample_cloud(&c, 30, 0.1, 3);
        let x = &cloud[0];
        let rho2: f64 = x[..3].iter().map(|v| v * v).sum();
        let ratio = w.eval(x) / rho2.powf(-0.125);
        for p in &cloud {
            let rho2: f64 = p[..3].iter().map(|v| v * v).sum();
            assert!((w.eval(p) / rho2.powf(-0.125) - ratio).abs() < 1e-8 * ratio);
        }
        assert!(rho_residual(&w, &cloud).unwrap() < 1e-6);
        let z = AngularCoefficient::cylindrical(5, 3, -0.2).unwrap();
        let wz = WeightRho::build(&z, 1.0, &WeightOptions::default()).unwrap();
        assert!(rho_residual(&wz, &cloud).unwrap() < 1e-9);
    }

    #[test]
    fn rho_residual_improves_with_galerkin_degree() {
        let c = AngularCoefficient::new(5, 3).unwrap().with_cyl(&[1, 2, 3], 0.1).unwrap().with_cyl(&[3, 4, 5], 0.1).unwrap();
        let cloud = sample_cloud(&c, 30, 0.2, 4);
        let pts: Vec<(f64, f64)> = [2u32, 4, 8]
            .iter()
            .map(|&g| {
                let o = WeightOptions { galerkin_degree: g, ..Default::default() };
                let res = rho_residual(&WeightRho::build(&c, 1.0, &o).unwrap(), &cloud).unwrap();
                ((g as f64).ln(), res.ln())
            })
            .collect();
        // least-squares order over two doublings
        let order = -crate::almgren::slope(&pts);
        assert!(order >= 1.0, "{pts:?} order {order}");
        assert!(pts[2].1 < pts[1].1 && pts[1].1 < pts[0].1);
    }

    #[test]
    fn d_stable_under_refinement() {
        let c = AngularCoefficient::new(5, 3).unwrap().with_cyl(&[1, 2, 3], 0.1).unwrap().with_cyl(&[3, 4, 5], 0.1).unwrap();
        let ds: Vec<f64> = [6usize, 10]
            .iter()
            .map(|&g| WeightRho::build(&c, 2.0, &WeightOptions { grid_degree: g, galerkin_degree: 4, ..Default::default() }).unwrap().d)
            .collect();
        assert!(ds[0] > 0.0 && (ds[0] - ds[1]).abs() < 0.01 * ds[1], "{ds:?}");
        let o = WeightOptions { galerkin_degree: 4, ..Default::default() };
        let w1 = WeightRho::build(&c, 1.0, &o).unwrap();
        let w2 = WeightRho::build(&c, 2.0, &o).unwrap();
        assert!(w2.d > w1.d && w1.inf_psi > 0.0);
    }

    #[test]
    fn s_hat_classical_and_monotone() {
        let zero = AngularCoefficient::cylindrical(5, 3, -0.3).unwrap();
        let s0 = s_hat_constant(&zero).unwrap();
        assert!((s0.value / sobolev_constant(5) - 1.0).abs() < 0.03, "{s0:?}");
        let a1 = s_hat_constant(&AngularCoefficient::cylindrical(5, 3, 0.05).unwrap()).unwrap();
        let a2 = s_hat_constant(&AngularCoefficient::cylindrical(5, 3, 0.15).unwrap()).unwrap();
        assert!(a2.value < a1.value && a1.value < s0.value, "{a1:?} {a2:?}");
    }

    #[test]
    fn weighted_sobolev_holds() {
        let c = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let s = s_hat_constant(&c).unwrap();
        let w = WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap();
        let chk = weighted_sobolev_check(&w, 0.9 * s.value, 100, 11, 4).unwrap();
        assert!(chk.pass, "{chk:?}");
    }

    #[test]
    fn transport_identity() {
        let c = AngularCoefficient::cylindrical(4, 3, 0.15).unwrap();
        let w = WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap();
        let center = [0.5, 0.3, 0.4, 0.2];
        let t1 = quadratic_form_transport(&w, &center, 0.2, 1.0, 24).unwrap();
        assert!(t1.relative < 1e-6, "{t1:?}");
        let t2 = quadratic_form_transport(&w, &center, 0.2, 2.0, 24).unwrap();
        assert!((t2.weighted / t1.weighted - 4.0).abs() < 1e-10);
        assert!((t2.form / t1.form - 4.0).abs() < 1e-10);
        let z = AngularCoefficient::cylindrical(4, 3, -0.1).unwrap();
        let wz = WeightRho::build(&z, 1.0, &WeightOptions::default()).unwrap();
        assert!(quadratic_form_transport(&wz, &center, 0.2, 1.0, 16).unwrap().relative < 1e-12);
    }

    #[test]
    fn bk_constant_values() {
        let mut p = BkInput {
            q: 4.0,
            n: 6,
            k: 3,
            s: 4.0,
            v_norm: 0.0,
            c_h: 0.0,
            eps: 0.5,
            lambda_hat: 0.2,
            d: 1.0,
            s_hat: 10.0,
            dist: 0.5,
        };
        let b = bk_constants(&p).unwrap();
        assert_eq!(b.c_q, 0.25);
        assert_eq!(b.ell_q, 0.0);
        assert!(b.bound_factor.is_finite() && (b.bound_factor - (80.0 * 4.0 + 8.0 * 4.0)).abs() < 1e-9);
        let mut prev = 0.0;
        for v in [0.1, 1.0, 3.0] {
            p.v_norm = v;
            let e = bk_constants(&p).unwrap().ell_q;
            assert!(e >= prev);
            prev = e;
        }
        for ch in [0.1, 1.0, 3.0] {
            p.c_h = ch;
            let e = bk_constants(&p).unwrap().ell_q;
            assert!(e >= prev);
            prev = e;
        }
        p.q = 20.0;
        assert_eq!(bk_constants(&p).unwrap().c_q, 1.0 / 6.0);
        p.s = 2.0;
        assert!(bk_constants(&p).is_err());
    }

    #[test]
    fn s_exponent_threshold() {
        for n in 3..10 {
            let ts = two_star(n);
            for q in [ts - 0.5, ts + 1e-6, ts + 1.0] {
                assert_eq!(s_exponent(q, n) > n as f64 / 2.0, q > ts);
            }
        }
    }

    #[test]
    fn pointwise_bound_rho_itself() {
        let c = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let w = Arc::new(WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap());
        let w2 = w.clone();
        let u = FnField::new(5, move |x| w2.eval(x));
        let chk = pointwise_bound_check(&u, &w, 1.0, &[4, 6]).unwrap();
        assert!(chk.pass);
        for s in &chk.shells {
            assert!((s.sup_ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_bound_higher_mode() {
        let c = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let w = WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap();
        let dec = Arc::new(assemble_spectrum(&c, 3, 8).unwrap());
        let i = dec.levels[1].first;
        let u = ModalSolution::homogeneous(dec.clone(), i, 1.0, 1.0).unwrap();
        assert!(dec.levels[1].sigma_plus > w.sigma_hat);
        let chk = pointwise_bound_check(&u, &w, 1.0, &[4, 6]).unwrap();
        assert!(chk.pass, "{chk:?}");
        let first = chk.shells.first().unwrap().sup_ratio;
        let last = chk.shells.last().unwrap().sup_ratio;
        assert!(last < 1e-2 * first);
    }

    #[test]
    fn pointwise_bound_negative_coefficient() {
        let c = AngularCoefficient::cylindrical(5, 3, -0.3).unwrap();
        let w = WeightRho::build(&c, 1.0, &WeightOptions::default()).unwrap();
        assert_eq!(w.sigma_hat, 0.0);
        let dec = Arc::new(assemble_spectrum(&c, 2, 8).unwrap());
        let h = PerturbationH::radial_power(1.0, 0.5).unwrap();
        let u = ModalSolution::generate(dec, h, &[0, 1], &[1.0, 0.5], 1.0).unwrap();
        let chk = pointwise_bound_check(&u, &w, 1.0, &[4, 6]).unwrap();
        assert!(chk.pass && chk.per_level[1].is_finite(), "{chk:?}");
    }
}
