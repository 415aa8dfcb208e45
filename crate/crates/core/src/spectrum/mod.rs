//! Spectrum of L_a = −Δ_S − a on S^{N−1}: closed forms, separated sector
//! solves, Rayleigh–Ritz for general coefficients, and the best constant Λ(a).

pub mod galerkin;
pub mod sector;

use std::sync::Arc;

use crate::error::{CssError, Result};
use crate::numerics::poly::{harmonic_basis, harmonic_dim, Poly};
use crate::potential::{AngularCoefficient, Term};

pub use galerkin::{galerkin_mu1, solve_general_galerkin, solve_general_galerkin_with, GalerkinMode, GalerkinOptions};
pub use sector::{solve_sector_sl, Profile1d, SectorEigen, SlScheme, SturmLiouvilleReduction};

/// Relative threshold under which numerically computed eigenvalues are
/// reported as one level.
pub const CLUSTER_TOL: f64 = 1e-6;

/// −((N−2)/2)²
pub fn spectral_floor(n: usize) -> f64 {
    -((n as f64 - 2.0) / 2.0).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub mu1: f64,
    pub gamma_prime: f64,
}

/// μ₁ for a single cylindrical term α/|θ_J|², #J = k.
pub fn mu1_closed_form_cylindrical(n: usize, k: usize, alpha: f64) -> Result<ClosedForm> {
    if k < 3 || k > n {
        return Err(CssError::DimensionTooSmall { n, k });
    }
    let (nf, kf) = (n as f64, k as f64);
    let crit = ((kf - 2.0) / 2.0).powi(2);
    if alpha >= crit {
        return Err(CssError::SupercriticalAlpha { alpha, critical: crit });
    }
    let root = (crit - alpha).sqrt();
    let mu1 = -(kf - 2.0) * (nf - kf) / 2.0 - alpha + (nf - kf) * root;
    let gamma_prime = -(kf - 2.0) / 2.0 + root;
    let check = gamma_prime * (gamma_prime + nf - 2.0);
    debug_assert!((check - mu1).abs() <= 1e-12 * mu1.abs().max(1.0));
    if (check - mu1).abs() > 1e-12 * mu1.abs().max(1.0) {
        return Err(CssError::ConditionViolated(format!("γ'(γ'+N−2) = {check} differs from μ₁ = {mu1}")));
    }
    Ok(ClosedForm { mu1, gamma_prime })
}

/// μ₁ for a single pair term α/|θ_{J1}−θ_{J2}|².
pub fn mu1_closed_form_two_body(n: usize, k: usize, alpha: f64) -> Result<ClosedForm> {
    if n < 2 * k || k < 3 {
        return Err(CssError::DimensionTooSmall { n, k });
    }
    let kf = k as f64;
    let crit = (kf - 2.0).powi(2) / 2.0;
    if alpha >= crit {
        return Err(CssError::SupercriticalAlpha { alpha, critical: crit });
    }
    mu1_closed_form_cylindrical(n, k, alpha / 2.0)
}

/// Closed-form μ₁ when the active part of a is a single cylindrical or pair term.
pub fn mu1_closed_form(coeff: &AngularCoefficient) -> Option<f64> {
    match coeff.active_terms().as_slice() {
        [Term::Cyl { j, alpha }] => mu1_closed_form_cylindrical(coeff.dim(), j.len(), *alpha).ok().map(|c| c.mu1),
        [Term::Pair { alpha, .. }] => mu1_closed_form_two_body(coeff.dim(), coeff.block(), *alpha).ok().map(|c| c.mu1),
        _ => None,
    }
}

/// (σ⁺, σ⁻) = −(N−2)/2 ± √(((N−2)/2)² + μ).
pub fn gamma_exponent(n: usize, mu: f64) -> Result<(f64, f64)> {
    let h = (n as f64 - 2.0) / 2.0;
    let disc = h * h + mu;
    if disc < 0.0 {
        return Err(CssError::BelowSpectralFloor { mu, floor: -h * h });
    }
    let root = disc.sqrt();
    let (sp, sm) = (-h + root, -h - root);
    for s in [sp, sm] {
        let r = s * (s + 2.0 * h) - mu;
        if r.abs() > 1e-12 * mu.abs().max(1.0) {
            return Err(CssError::ConditionViolated(format!("σ(σ+N−2)−μ = {r:e}")));
        }
    }
    Ok((sp, sm))
}

/// How a coefficient separates.
#[derive(Debug, Clone)]
pub enum Shape {
    /// a ≡ const on the sphere (k = N or a ≡ 0)
    Constant(f64),
    /// a = α/|z_B|² + α_c/|z_{B^c}|² in rotated coordinates z = Qθ, B = first k
    Sector { q: Arc<Vec<f64>>, k: usize, alpha: f64, alpha_c: f64 },
    General,
}

pub(crate) fn frame(n: usize, t: &Term) -> Vec<f64> {
    // rows: singular block first, then the rest in ascending order
    let q = t.rotation(n);
    let block = t.block().to_vec();
    let mut order = block.clone();
    order.extend((0..n).filter(|i| !block.contains(i)));
    let mut out = vec![0.0; n * n];
    for (row, &src) in order.iter().enumerate() {
        out[row * n..(row + 1) * n].copy_from_slice(&q[src * n..(src + 1) * n]);
    }
    out
}

pub fn classify(coeff: &AngularCoefficient) -> Shape {
    let n = coeff.dim();
    let active = coeff.active_terms();
    if active.is_empty() {
        return Shape::Constant(0.0);
    }
    if coeff.block() == n {
        return Shape::Constant(active[0].alpha());
    }
    if active.len() == 1 {
        let t = &active[0];
        return Shape::Sector {
            q: Arc::new(frame(n, t)),
            k: coeff.block(),
            alpha: t.effective_alpha(),
            alpha_c: 0.0,
        };
    }
    if active.len() == 2 {
        if let (Term::Cyl { j: a, alpha: x }, Term::Cyl { j: b, alpha: y }) = (&active[0], &active[1]) {
            if a.len() + b.len() == n && a.iter().all(|i| !b.contains(i)) {
                return Shape::Sector { q: Arc::new(frame(n, &active[0])), k: a.len(), alpha: *x, alpha_c: *y };
            }
        }
    }
    Shape::General
}

/// ψ = G(φ)·Ŷ₁(z_B)·Ŷ₂(z_{B^c}) with z = Qθ and tan φ = |z_B|/|z_{B^c}|.
#[derive(Debug, Clone)]
pub struct SeparatedMode {
    pub q: Arc<Vec<f64>>,
    pub k: usize,
    pub sector: (u32, u32),
    pub profile: Arc<Profile1d>,
    pub y1: Poly,
    pub y2: Poly,
}

impl SeparatedMode {
    fn rotate(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| self.q[i * n + j] * x[j]).sum()).collect()
    }

    fn eval_grad(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let n = theta.len();
        let z = self.rotate(theta);
        let (z1, z2) = z.split_at(self.k);
        let r1 = z1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r2 = z2.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rr = (r1 * r1 + r2 * r2).sqrt();
        let phi = r1.atan2(r2);
        let (g, dg) = self.profile.eval(phi);
        let (l1, l2) = (self.sector.0 as i32, self.sector.1 as i32);
        let y1 = self.y1.eval(z1) / r1.powi(l1);
        let y2 = self.y2.eval(z2) / r2.powi(l2);
        let val = g * y1 * y2;
        if !want_grad {
            return (val, vec![]);
        }
        let mut gz = vec![0.0; n];
        let gy1 = self.y1.gradient(z1);
        let gy2 = self.y2.gradient(z2);
        let rr2 = rr * rr;
        for i in 0..self.k {
            let dphi = r2 * z1[i] / (r1 * rr2);
            let dy1 = gy1[i] / r1.powi(l1) - l1 as f64 * self.y1.eval(z1) * z1[i] / r1.powi(l1 + 2);
            gz[i] = dg * dphi * y1 * y2 + g * dy1 * y2;
        }
        for i in 0..n - self.k {
            let dphi = -r1 * z2[i] / (r2 * rr2);
            let dy2 = gy2[i] / r2.powi(l2) - l2 as f64 * self.y2.eval(z2) * z2[i] / r2.powi(l2 + 2);
            gz[self.k + i] = dg * dphi * y1 * y2 + g * y1 * dy2;
        }
        // back to x coordinates: ∇_x = Qᵀ∇_z
        let gx = (0..n).map(|j| (0..n).map(|i| self.q[i * n + j] * gz[i]).sum()).collect();
        (val, gx)
    }
}

/// Angular eigenfunction, evaluable at unit vectors; gradients are those of
/// the degree-0 homogeneous extension (tangential on the sphere).
#[derive(Debug, Clone)]
pub enum AngularMode {
    Harmonic { poly: Arc<Poly>, degree: u32 },
    Separated(SeparatedMode),
    Galerkin(GalerkinMode),
}

impl AngularMode {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            AngularMode::Harmonic { poly, degree } => {
                let r = crate::numerics::norm(theta);
                poly.eval(theta) / r.powi(*degree as i32)
            }
            AngularMode::Separated(m) => m.eval_grad(theta, false).0,
            AngularMode::Galerkin(m) => m.eval(theta),
        }
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            AngularMode::Harmonic { poly, degree } => {
                let r2: f64 = theta.iter().map(|v| v * v).sum();
                let r = r2.sqrt();
                let p = poly.eval(theta);
                let l = *degree as i32;
                poly.gradient(theta)
                    .iter()
                    .zip(theta)
                    .map(|(g, x)| g / r.powi(l) - l as f64 * p * x / r.powi(l + 2))
                    .collect()
            }
            AngularMode::Separated(m) => m.eval_grad(theta, true).1,
            AngularMode::Galerkin(m) => m.grad(theta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub mu: f64,
    pub mode: AngularMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub mu: f64,
    pub multiplicity: usize,
    /// index of the first eigenpair of this level
    pub first: usize,
    pub sigma_plus: f64,
    /// formed by merging numerically distinct values within the threshold
    pub clustered: bool,
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub dim_n: usize,
    pub pairs: Vec<Eigenpair>,
    pub levels: Vec<Level>,
    pub method: &'static str,
}

impl EigenDecomposition {
    pub fn mu1(&self) -> f64 {
        self.levels[0].mu
    }

    pub fn psi(&self, i: usize) -> &AngularMode {
        &self.pairs[i].mode
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn level_of(&self, i: usize) -> usize {
        self.levels.iter().rposition(|l| l.first <= i).unwrap_or(0)
    }

    /// Eigenpair indices of the level whose σ⁺ is within tol of γ.
    pub fn level_for_gamma(&self, gamma: f64, tol: f64) -> Result<usize> {
        let hits: Vec<usize> = (0..self.levels.len())
            .filter(|&l| (self.levels[l].sigma_plus - gamma).abs() < tol)
            .collect();
        match hits.len() {
            1 => Ok(hits[0]),
            0 => Err(CssError::EigenspaceUnresolved(format!("no level with σ⁺ near {gamma}"))),
            _ => Err(CssError::EigenspaceUnresolved(format!("{} levels with σ⁺ near {gamma}", hits.len()))),
        }
    }

    pub fn level_members(&self, level: usize) -> std::ops::Range<usize> {
        let l = &self.levels[level];
        l.first..l.first + l.multiplicity
    }
}

/// Sort raw (μ, mode) pairs, cluster and keep the first `count` levels.
pub(crate) fn build_levels(
    n: usize,
    mut raw: Vec<Eigenpair>,
    count: usize,
    method: &'static str,
) -> Result<EigenDecomposition> {
    raw.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap());
    let mut levels: Vec<Level> = Vec::new();
    let mut pairs = Vec::new();
    for p in raw {
        let same = levels
            .last()
            .map(|l| (p.mu - l.mu).abs() <= CLUSTER_TOL * l.mu.abs().max(1.0))
            .unwrap_or(false);
        if same {
            let l = levels.last_mut().unwrap();
            if p.mu != l.mu {
                l.clustered = true;
            }
            l.multiplicity += 1;
        } else {
            if levels.len() == count {
                break;
            }
            levels.push(Level { mu: p.mu, multiplicity: 1, first: pairs.len(), sigma_plus: 0.0, clustered: false });
        }
        pairs.push(p);
    }
    for l in levels.iter_mut() {
        l.sigma_plus = gamma_exponent(n, l.mu)?.0;
    }
    Ok(EigenDecomposition { dim_n: n, pairs, levels, method })
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub count: usize,
    pub grid: usize,
    pub max_sector_degree: u32,
    pub galerkin_degree: u32,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { count: 4, grid: 2048, max_sector_degree: 12, galerkin_degree: 8 }
    }
}

pub fn assemble_spectrum(coeff: &AngularCoefficient, count: usize, max_sector_degree: u32) -> Result<EigenDecomposition> {
    assemble_spectrum_with(coeff, &SpectrumOptions { count, max_sector_degree, ..Default::default() })
}

pub fn assemble_spectrum_with(coeff: &AngularCoefficient, opts: &SpectrumOptions) -> Result<EigenDecomposition> {
    let n = coeff.dim();
    let count = opts.count.max(1);
    match classify(coeff) {
        Shape::Constant(alpha) => constant_spectrum(n, alpha, count, opts.max_sector_degree),
        Shape::Sector { q, k, alpha, alpha_c } => sector_spectrum(n, q, k, alpha, alpha_c, opts),
        Shape::General => solve_general_galerkin(coeff, opts.galerkin_degree, count),
    }
}

fn constant_spectrum(n: usize, alpha: f64, count: usize, max_degree: u32) -> Result<EigenDecomposition> {
    if (count as u32) > max_degree + 1 {
        return Err(CssError::TruncationInsufficient(max_degree as usize));
    }
    let mut raw = Vec::new();
    for l in 0..count as u32 {
        let mu = l as f64 * (l as f64 + n as f64 - 2.0) - alpha;
        for p in harmonic_basis(n, l) {
            raw.push(Eigenpair { mu, mode: AngularMode::Harmonic { poly: Arc::new(p), degree: l } });
        }
    }
    if raw[0].mu < spectral_floor(n) {
        return Err(CssError::IndefiniteOperator { mu1: raw[0].mu, floor: spectral_floor(n) });
    }
    build_levels(n, raw, count, "harmonic")
}

fn sector_spectrum(
    n: usize,
    q: Arc<Vec<f64>>,
    k: usize,
    alpha: f64,
    alpha_c: f64,
    opts: &SpectrumOptions,
) -> Result<EigenDecomposition> {
    let m = n - k;
    let count = opts.count.max(1);
    let reduction = |l1: u32, l2: u32| {
        let mut r = SturmLiouvilleReduction::new(n, k, alpha, (l1, l2));
        r.alpha_c = alpha_c;
        r.grid = opts.grid;
        r
    };
    let floor_of = |l1: u32, l2: u32| -> Result<f64> {
        let r = reduction(l1, l2);
        let s = r.exponent_sin().ok_or(CssError::SupercriticalAlpha {
            alpha,
            critical: (l1 as f64 + (k as f64 - 2.0) / 2.0).powi(2),
        })?;
        let t = r.exponent_cos().ok_or(CssError::SupercriticalAlpha {
            alpha: alpha_c,
            critical: (l2 as f64 + (m as f64 - 2.0) / 2.0).powi(2),
        })?;
        Ok((s + t) * (s + t + n as f64 - 2.0))
    };
    let l2_max = if m == 1 { 1 } else { opts.max_sector_degree };
    // sectors in order of their exact lowest eigenvalue
    let mut sectors = Vec::new();
    for l1 in 0..=opts.max_sector_degree {
        for l2 in 0..=l2_max {
            sectors.push((floor_of(l1, l2)?, l1, l2));
        }
    }
    sectors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut found: Vec<(f64, u32, u32, SectorEigen)> = Vec::new();
    let mut cutoff = f64::INFINITY;
    for &(e0, l1, l2) in &sectors {
        if e0 > cutoff + CLUSTER_TOL * cutoff.abs().max(1.0) {
            break;
        }
        for ev in solve_sector_sl(&reduction(l1, l2), count)? {
            found.push((ev.mu, l1, l2, ev));
        }
        cutoff = nth_level(found.iter().map(|f| f.0).collect(), count).unwrap_or(f64::INFINITY);
    }
    if !cutoff.is_finite() {
        return Err(CssError::TruncationInsufficient(opts.max_sector_degree as usize));
    }
    // the first sector beyond the sweep must lie above the last retained level
    let mut beyond = floor_of(opts.max_sector_degree + 1, 0)?;
    if m >= 2 {
        beyond = beyond.min(floor_of(0, opts.max_sector_degree + 1)?);
    }
    if beyond <= cutoff + CLUSTER_TOL * cutoff.abs().max(1.0) {
        return Err(CssError::TruncationInsufficient(opts.max_sector_degree as usize));
    }
    let mut raw = Vec::new();
    for (mu, l1, l2, ev) in found {
        if mu > cutoff + CLUSTER_TOL * cutoff.abs().max(1.0) {
            continue;
        }
        let b1 = harmonic_basis(k, l1);
        let b2 = harmonic_basis(m, l2);
        debug_assert_eq!(b1.len() * b2.len(), harmonic_dim(k, l1) * harmonic_dim(m, l2));
        for y1 in &b1 {
            for y2 in &b2 {
                raw.push(Eigenpair {
                    mu,
                    mode: AngularMode::Separated(SeparatedMode {
                        q: q.clone(),
                        k,
                        sector: (l1, l2),
                        profile: ev.profile.clone(),
                        y1: y1.clone(),
                        y2: y2.clone(),
                    }),
                });
            }
        }
    }
    build_levels(n, raw, count, "separated")
}

/// Value of the `count`-th distinct level among unsorted values.
fn nth_level(mut v: Vec<f64>, count: usize) -> Option<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut levels = 0;
    let mut last: Option<f64> = None;
    for x in v {
        if last.map(|l| (x - l).abs() > CLUSTER_TOL * l.abs().max(1.0)).unwrap_or(true) {
            levels += 1;
            last = Some(x);
            if levels == count {
                return Some(x);
            }
        }
    }
    None
}

/// Λ(a): supremum of ∫aψ² over ∫|∇ψ|² + ((N−2)/2)²∫ψ².
pub fn lambda_of(coeff: &AngularCoefficient) -> Result<f64> {
    let n = coeff.dim();
    if coeff.is_nonpositive() {
        return Ok(0.0);
    }
    let c0 = -spectral_floor(n);
    match classify(coeff) {
        Shape::Constant(alpha) => Ok((alpha / c0).max(0.0)),
        Shape::Sector { k, alpha, alpha_c, .. } => sector::sector_lambda(n, k, alpha, alpha_c),
        Shape::General => galerkin::lambda_general(coeff, 4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sphere::SphereRule;

    #[test]
    fn closed_form_examples() {
        assert_eq!(mu1_closed_form_cylindrical(5, 3, 0.0).unwrap().mu1, 0.0);
        let c = mu1_closed_form_cylindrical(5, 3, 3.0 / 16.0).unwrap();
        assert!((c.mu1 + 11.0 / 16.0).abs() < 1e-15);
        assert!((c.gamma_prime + 0.25).abs() < 1e-15);
        assert!(matches!(mu1_closed_form_cylindrical(5, 3, 0.25), Err(CssError::SupercriticalAlpha { .. })));
        let c = mu1_closed_form_cylindrical(7, 4, 0.5).unwrap();
        assert!((c.mu1 - (-3.5 + 3.0 * 0.5f64.sqrt())).abs() < 1e-14);
        assert!((c.mu1 + 1.378679656440357).abs() < 1e-12);
    }

    #[test]
    fn two_body_closed_form() {
        assert_eq!(mu1_closed_form_two_body(6, 3, 0.0).unwrap().mu1, 0.0);
        for a in [0.1, 0.3] {
            let x = mu1_closed_form_two_body(6, 3, a).unwrap().mu1;
            let y = mu1_closed_form_cylindrical(6, 3, a / 2.0).unwrap().mu1;
            assert_eq!(x, y);
        }
        assert!(matches!(mu1_closed_form_two_body(5, 3, 0.1), Err(CssError::DimensionTooSmall { .. })));
    }

    #[test]
    fn gamma_exponent_examples() {
        assert_eq!(gamma_exponent(5, 0.0).unwrap(), (0.0, -3.0));
        assert!((gamma_exponent(5, -11.0 / 16.0).unwrap().0 + 0.25).abs() < 1e-15);
        let (p, m) = gamma_exponent(5, 4.0).unwrap();
        assert!((p - 1.0).abs() < 1e-15 && (m + 4.0).abs() < 1e-15);
        assert!(matches!(gamma_exponent(5, -3.0), Err(CssError::BelowSpectralFloor { .. })));
    }

    #[test]
    fn laplace_beltrami_head() {
        let c = AngularCoefficient::cylindrical(5, 3, 0.0).unwrap();
        let d = assemble_spectrum(&c, 2, 8).unwrap();
        assert_eq!(d.levels.len(), 2);
        assert_eq!(d.levels[0].multiplicity, 1);
        assert!(d.levels[0].mu.abs() < 1e-12);
        assert!((d.levels[1].mu - 4.0).abs() < 1e-12);
        assert_eq!(d.levels[1].multiplicity, 5);
    }

    #[test]
    fn cylindrical_head_and_multiplicities() {
        let c = AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).unwrap();
        let d = assemble_spectrum(&c, 4, 10).unwrap();
        assert!((d.mu1() + 11.0 / 16.0).abs() < 1e-6 * 11.0 / 16.0);
        assert_eq!(d.levels[0].multiplicity, 1);
        // every level equals p(p+3) with p = s(l1) + l2 + 2j
        for l in &d.levels {
            assert!(l.multiplicity >= 1);
        }
        assert!((d.levels[0].sigma_plus + 0.25).abs() < 1e-6);
    }

    #[test]
    fn pair_matches_cylindrical_half() {
        let p = AngularCoefficient::two_body(6, 3, 0.3).unwrap();
        let c = AngularCoefficient::cylindrical(6, 3, 0.15).unwrap();
        let dp = assemble_spectrum(&p, 3, 8).unwrap();
        let dc = assemble_spectrum(&c, 3, 8).unwrap();
        for (a, b) in dp.levels.iter().zip(&dc.levels) {
            assert!((a.mu - b.mu).abs() < 1e-10);
            assert_eq!(a.multiplicity, b.multiplicity);
        }
    }

    fn gram(d: &EigenDecomposition, rule: &SphereRule) -> f64 {
        let n = d.len();
        let vals: Vec<Vec<f64>> = (0..rule.len()).map(|q| (0..n).map(|i| d.psi(i).eval(rule.point(q))).collect()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let g: f64 = (0..rule.len()).map(|q| rule.weights[q] * vals[q][i] * vals[q][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    #[test]
    fn separated_modes_orthonormal() {
        // α = 0 keeps the modes polynomial so a plain sphere rule is exact
        let c = AngularCoefficient::cylindrical(5, 3, 0.0).unwrap();
        let mut opts = SpectrumOptions { count: 3, ..Default::default() };
        opts.max_sector_degree = 6;
        let d = match classify(&c) {
            Shape::Constant(_) => {
                // force the sector path with a vanishing coefficient
                sector_spectrum(5, Arc::new(frame(5, &Term::Cyl { j: vec![0, 1, 2], alpha: 0.0 })), 3, 0.0, 0.0, &opts).unwrap()
            }
            _ => unreachable!(),
        };
        assert_eq!(d.levels[2].multiplicity, 14);
        let rule = SphereRule::new(5, 12);
        assert!(gram(&d, &rule) < 1e-6, "{}", gram(&d, &rule));
        let h = assemble_spectrum(&c, 3, 6).unwrap();
        assert!(gram(&h, &rule) < 1e-12);
    }

    #[test]
    fn separated_gradient_matches_finite_differences() {
        let c = AngularCoefficient::two_body(6, 3, 0.2).unwrap();
        let d = assemble_spectrum(&c, 3, 6).unwrap();
        let x = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6];
        let r = crate::numerics::norm(&x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        for i in 0..d.len() {
            let g = d.psi(i).grad(&th);
            for j in 0..6 {
                let h = 1e-6;
                let mut p = th.clone();
                let mut m = th.clone();
                p[j] += h;
                m[j] -= h;
                let fd = (d.psi(i).eval(&p) - d.psi(i).eval(&m)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()), "mode {i} comp {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn ground_state_positive_and_matches_closed_form_shape() {
        let c = AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).unwrap();
        let d = assemble_spectrum(&c, 1, 6).unwrap();
        let g = mu1_closed_form_cylindrical(5, 3, 3.0 / 16.0).unwrap().gamma_prime;
        // ψ₁ ∝ |θ_J|^{γ'}
        let pts = crate::potential::test_cloud(&c, 50, 1e-2);
        let ratios: Vec<f64> = pts
            .iter()
            .map(|x| {
                let r = crate::numerics::norm(x);
                let th: Vec<f64> = x.iter().map(|v| v / r).collect();
                let tj = (th[0] * th[0] + th[1] * th[1] + th[2] * th[2]).sqrt();
                d.psi(0).eval(&th) / tj.powf(g)
            })
            .collect();
        assert!(ratios.iter().all(|r| *r > 0.0));
        let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!((hi - lo) / hi < 1e-5, "{lo} {hi}");
    }

    #[test]
    fn lambda_examples() {
        let l = lambda_of(&AngularCoefficient::cylindrical(5, 3, 3.0 / 16.0).unwrap()).unwrap();
        assert!((l - 0.75).abs() < 0.02 * 0.75, "{l}");
        let l = lambda_of(&AngularCoefficient::two_body(6, 3, 0.2).unwrap()).unwrap();
        assert!((l - 0.4).abs() < 0.02 * 0.4, "{l}");
        let neg = AngularCoefficient::new(5, 3).unwrap().with_cyl(&[1, 2, 3], -1.0).unwrap().with_cyl(&[2, 3, 4], -0.5).unwrap();
        assert_eq!(lambda_of(&neg).unwrap(), 0.0);
    }
}
