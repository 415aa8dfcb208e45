//! Radial Fourier coefficients of solutions, the regular radial ODE, the
//! accumulated source Υ and its integral representation.

use std::sync::Arc;

use crate::error::{CssError, Result};
use crate::field::{sphere_integral, Field, SphereQuad};
use crate::numerics::gauss::log_panels;
use crate::numerics::norm;
use crate::potential::{NonlinearityF, PerturbationH};
use crate::spectrum::{gamma_exponent, AngularMode, EigenDecomposition};

pub const PER_DECADE: usize = 400;
pub const DECADES: f64 = 6.0;

/// Uniform grid in t = ln r.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, per_decade: usize) -> Self {
        assert!(r_min > 0.0 && r_max > r_min && per_decade > 0);
        let decades = (r_max / r_min).log10();
        let cells = (decades * per_decade as f64).round().max(4.0) as usize;
        let (t0, t1) = (r_min.ln(), r_max.ln());
        Self { t0, dt: (t1 - t0) / cells as f64, len: cells + 1 }
    }

    /// Default grid over [1e-6 R, R].
    pub fn standard(radius: f64) -> Self {
        Self::new(radius * 10f64.powf(-DECADES), radius, PER_DECADE)
    }

    pub fn r(&self, j: usize) -> f64 {
        (self.t0 + self.dt * j as f64).exp()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.r(j)).collect()
    }

    pub fn r_min(&self) -> f64 {
        self.t0.exp()
    }

    pub fn r_max(&self) -> f64 {
        self.r(self.len - 1)
    }
}

/// ∫_0^{r_j} f(s) ds at every node, from samples of f on a log grid. The
/// stretch below the first node uses the power law fitted to the first two
/// samples; a non-integrable fit is reported.
pub fn cumulative_log(grid: &LogGrid, f: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len;
    assert_eq!(f.len(), n);
    assert!(n >= 4);
    let g: Vec<f64> = (0..n).map(|j| f[j] * grid.r(j)).collect();
    let head = power_head(g[0], g[1], grid.dt)?;
    let mut out = Vec::with_capacity(n);
    out.push(head);
    let c = grid.dt / 24.0;
    for j in 0..n - 1 {
        let inc = if j == 0 {
            c * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3])
        } else if j + 2 >= n {
            c * (9.0 * g[j + 1] + 19.0 * g[j] - 5.0 * g[j - 1] + g[j - 2])
        } else {
            c * (-g[j - 1] + 13.0 * g[j] + 13.0 * g[j + 1] - g[j + 2])
        };
        out.push(out[j] + inc);
    }
    Ok(out)
}

/// ∫_{-∞}^{t0} g dt for g ≈ g0 e^{p(t - t0)} fitted through (g0, g1).
fn power_head(g0: f64, g1: f64, dt: f64) -> Result<f64> {
    if g0 == 0.0 {
        return Ok(0.0);
    }
    if g1 == 0.0 || g0.signum() != g1.signum() {
        return Err(CssError::DivergentIntegrand("integrand changes sign at the first node".into()));
    }
    let p = (g1 / g0).ln() / dt;
    if p <= 1e-8 {
        return Err(CssError::DivergentIntegrand(format!("fitted growth exponent {p} is not positive")));
    }
    Ok(g0 / p)
}

/// Frobenius series w = Σ a_n r^{n e} for r²h ≈ c r^e near the origin.
#[derive(Debug, Clone)]
struct Series {
    e: f64,
    coeffs: Vec<f64>,
}

impl Series {
    fn new(c: f64, e: f64, kappa: f64, r0: f64) -> Self {
        let mut coeffs = vec![1.0];
        if c != 0.0 {
            let x = r0.powf(e);
            for n in 1..200 {
                let ne = n as f64 * e;
                let a = -c * coeffs[n - 1] / (ne * (ne + kappa));
                coeffs.push(a);
                if (a * x.powi(n as i32)).abs() < 1e-18 {
                    break;
                }
            }
        }
        Self { e, coeffs }
    }

    /// (w, dw/dt)
    fn eval(&self, r: f64) -> (f64, f64) {
        let x = r.powf(self.e);
        let mut w = 0.0;
        let mut wt = 0.0;
        let mut p = 1.0;
        for (n, a) in self.coeffs.iter().enumerate() {
            w += a * p;
            wt += a * n as f64 * self.e * p;
            p *= x;
        }
        (w, wt)
    }
}

/// φ(r) = scale · r^σ · w(ln r), with w, w_t sampled on a log grid.
#[derive(Debug, Clone)]
pub struct SampledProfile {
    pub grid: LogGrid,
    pub sigma: f64,
    pub scale: f64,
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
    series: Series,
}

impl SampledProfile {
    fn w_at(&self, r: f64) -> (f64, f64) {
        let t = r.ln();
        let u = (t - self.grid.t0) / self.grid.dt;
        if u < 0.0 {
            return self.series.eval(r);
        }
        let j = (u.floor() as usize).min(self.grid.len - 2);
        let s = u - j as f64;
        let h = self.grid.dt;
        let (y0, y1) = (self.w[j], self.w[j + 1]);
        let (d0, d1) = (self.wt[j] * h, self.wt[j + 1] * h);
        // cubic Hermite on [t_j, t_{j+1}]
        let s2 = s * s;
        let s3 = s2 * s;
        let w = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dw = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h;
        (w, dw)
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (w, wt) = self.w_at(r);
        let p = self.scale * r.powf(self.sigma);
        (p * w, p * (self.sigma * w + wt) / r)
    }

    /// Local exponent r φ'/φ.
    pub fn local_exponent(&self, r: f64) -> f64 {
        let (w, wt) = self.w_at(r);
        self.sigma + wt / w
    }
}

#[derive(Debug, Clone)]
pub enum RadialProfile {
    Power { coef: f64, exponent: f64 },
    Sampled(Arc<SampledProfile>),
    /// factor · base(λ r)
    Rescaled { base: Arc<RadialProfile>, lambda: f64, factor: f64 },
}

impl RadialProfile {
    /// (φ(r), φ'(r))
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            RadialProfile::Power { coef, exponent } => {
                let v = coef * r.powf(*exponent);
                (v, exponent * v / r)
            }
            RadialProfile::Sampled(p) => p.eval(r),
            RadialProfile::Rescaled { base, lambda, factor } => {
                let (v, d) = base.eval(lambda * r);
                (factor * v, factor * lambda * d)
            }
        }
    }

    pub fn local_exponent(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Power { exponent, .. } => *exponent,
            RadialProfile::Sampled(p) => p.local_exponent(r),
            RadialProfile::Rescaled { base, lambda, .. } => base.local_exponent(lambda * r),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialMode {
    pub index: usize,
    pub mu: f64,
    pub sigma_plus: f64,
    pub profile: RadialProfile,
}

impl RadialMode {
    pub fn samples(&self, grid: &LogGrid) -> Vec<(f64, f64)> {
        (0..grid.len).map(|j| {
            let r = grid.r(j);
            (r, self.profile.eval(r).0)
        }).collect()
    }
}

fn local_law(h: &dyn Fn(f64) -> f64, r0: f64) -> (f64, f64) {
    // r²h ≈ c r^e from two probes one decade apart
    let q0 = r0 * r0 * h(r0);
    let r1 = 10.0 * r0;
    let q1 = r1 * r1 * h(r1);
    if q0 == 0.0 || q1 == 0.0 || q0.signum() != q1.signum() {
        return (0.0, 1.0);
    }
    let e = (q1 / q0).log10();
    if e <= 1e-3 {
        return (0.0, 1.0);
    }
    (q0 / r0.powf(e), e)
}

/// Regular solution of −φ'' − (N−1)φ'/r + μφ/r² = hφ on (0, R] with φ(R) = boundary.
/// Integrates w = r^{-σ⁺}φ in t = ln r from the Frobenius start at 1e-6 R.
pub fn solve_radial_ode(mu: f64, n: usize, h: &dyn Fn(f64) -> f64, radius: f64, boundary: f64) -> Result<SampledProfile> {
    solve_radial_ode_on(mu, n, h, &LogGrid::standard(radius), boundary)
}

pub fn solve_radial_ode_on(mu: f64, n: usize, h: &dyn Fn(f64) -> f64, grid: &LogGrid, boundary: f64) -> Result<SampledProfile> {
    let (sigma, sigma_minus) = gamma_exponent(n, mu)?;
    let kappa = sigma - sigma_minus;
    let r0 = grid.r_min();
    let (c, e) = local_law(h, r0);
    let series = Series::new(c, e, kappa, r0);
    let (mut w, mut wt) = series.eval(r0);
    let rhs = |t: f64, w: f64, wt: f64| {
        let r = t.exp();
        (wt, -kappa * wt - r * r * h(r) * w)
    };
    let sub = 4;
    let hstep = grid.dt / sub as f64;
    let mut ws = Vec::with_capacity(grid.len);
    let mut wts = Vec::with_capacity(grid.len);
    ws.push(w);
    wts.push(wt);
    for j in 0..grid.len - 1 {
        let mut t = grid.t0 + grid.dt * j as f64;
        for _ in 0..sub {
            let k1 = rhs(t, w, wt);
            let k2 = rhs(t + 0.5 * hstep, w + 0.5 * hstep * k1.0, wt + 0.5 * hstep * k1.1);
            let k3 = rhs(t + 0.5 * hstep, w + 0.5 * hstep * k2.0, wt + 0.5 * hstep * k2.1);
            let k4 = rhs(t + hstep, w + hstep * k3.0, wt + hstep * k3.1);
            w += hstep / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            wt += hstep / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            t += hstep;
        }
        if !(w.is_finite() && wt.is_finite()) {
            return Err(CssError::StiffFailure(grid.r(j + 1)));
        }
        ws.push(w);
        wts.push(wt);
    }
    // the regular branch keeps the local exponent near σ⁺ close to the origin
    let probe = ((grid.len - 1) as f64 / 3.0) as usize;
    if ws[probe] != 0.0 {
        let ex = sigma + wts[probe] / ws[probe];
        if (ex - sigma).abs() > (ex - sigma_minus).abs() {
            return Err(CssError::IrregularBranch(ex));
        }
    }
    let r_end = grid.r_max();
    let end = r_end.powf(sigma) * ws[grid.len - 1];
    if end == 0.0 || !end.is_finite() {
        return Err(CssError::ZeroBoundaryNorm(r_end));
    }
    Ok(SampledProfile { grid: grid.clone(), sigma, scale: boundary / end, w: ws, wt: wts, series })
}

/// u(rθ) = Σ φ_i(r) ψ_i(θ) over a finite set of eigenpairs.
#[derive(Clone)]
pub struct ModalSolution {
    pub decomposition: Arc<EigenDecomposition>,
    pub modes: Vec<RadialMode>,
    pub radius: f64,
    pub h: PerturbationH,
    pub f: NonlinearityF,
}

impl std::fmt::Debug for ModalSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModalSolution")
            .field("modes", &self.modes.iter().map(|m| m.index).collect::<Vec<_>>())
            .field("radius", &self.radius)
            .field("h", &self.h)
            .finish()
    }
}

impl ModalSolution {
    /// Σ c_i |x|^{p_i} ψ_i for (index, c, p) triples; a solution with h = 0
    /// when each p_i is σ⁺ of its eigenvalue.
    pub fn from_powers(dec: Arc<EigenDecomposition>, terms: &[(usize, f64, f64)], radius: f64) -> Result<Self> {
        let mut modes = Vec::new();
        for &(i, c, p) in terms {
            if i >= dec.len() {
                return Err(CssError::InvalidCoefficient(format!("mode {i} beyond the {} computed", dec.len())));
            }
            let mu = dec.pairs[i].mu;
            let sigma_plus = gamma_exponent(dec.dim_n, mu)?.0;
            modes.push(RadialMode { index: i, mu, sigma_plus, profile: RadialProfile::Power { coef: c, exponent: p } });
        }
        modes.sort_by_key(|m| m.index);
        Ok(Self { decomposition: dec, modes, radius, h: PerturbationH::zero(), f: NonlinearityF::zero() })
    }

    /// c |x|^{σ_i⁺} ψ_i.
    pub fn homogeneous(dec: Arc<EigenDecomposition>, index: usize, coef: f64, radius: f64) -> Result<Self> {
        let mu = dec.pairs.get(index).map(|p| p.mu).ok_or_else(|| {
            CssError::InvalidCoefficient(format!("mode {index} beyond the {} computed", dec.len()))
        })?;
        let sp = gamma_exponent(dec.dim_n, mu)?.0;
        Self::from_powers(dec, &[(index, coef, sp)], radius)
    }

    /// Solve the decoupled radial problems for a radial h; modes run on
    /// separate threads and are merged by index.
    pub fn generate(
        dec: Arc<EigenDecomposition>,
        h: PerturbationH,
        indices: &[usize],
        boundary: &[f64],
        radius: f64,
    ) -> Result<Self> {
        if indices.len() != boundary.len() {
            return Err(CssError::InvalidCoefficient(format!(
                "{} modes but {} boundary values",
                indices.len(),
                boundary.len()
            )));
        }
        let hr = h.radial.clone().ok_or_else(|| {
            CssError::InvalidCoefficient("solution generation needs a radial perturbation".into())
        })?;
        for &i in indices {
            if i >= dec.len() {
                return Err(CssError::InvalidCoefficient(format!("mode {i} beyond the {} computed", dec.len())));
            }
        }
        let n = dec.dim_n;
        let grid = LogGrid::standard(radius);
        let results: Vec<Result<RadialMode>> = std::thread::scope(|scope| {
            let handles: Vec<_> = indices
                .iter()
                .zip(boundary)
                .map(|(&i, &b)| {
                    let mu = dec.pairs[i].mu;
                    let hr = hr.clone();
                    let grid = &grid;
                    scope.spawn(move || {
                        let p = solve_radial_ode_on(mu, n, &*hr, grid, b)?;
                        Ok(RadialMode {
                            index: i,
                            mu,
                            sigma_plus: p.sigma,
                            profile: RadialProfile::Sampled(Arc::new(p)),
                        })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("mode solver panicked")).collect()
        });
        let mut modes = results.into_iter().collect::<Result<Vec<_>>>()?;
        modes.sort_by_key(|m| m.index);
        Ok(Self { decomposition: dec, modes, radius, h, f: NonlinearityF::zero() })
    }

    /// x ↦ factor · u(λx), still in modal form.
    pub fn rescaled(&self, lambda: f64, factor: f64) -> Self {
        let mut out = self.clone();
        for m in out.modes.iter_mut() {
            m.profile = RadialProfile::Rescaled { base: Arc::new(m.profile.clone()), lambda, factor };
        }
        out.radius = self.radius / lambda;
        // h(λx)λ² is the perturbation of the rescaled equation
        if let (Some(hr), false) = (self.h.radial.clone(), self.h.is_zero()) {
            let gd = self.h.grad_dot_x.clone();
            let n = self.dim();
            out.h = PerturbationH::radial_fn(
                move |r| lambda * lambda * hr(lambda * r),
                move |r| {
                    let mut x = vec![0.0; n];
                    x[0] = lambda * r;
                    lambda * lambda * gd(&x)
                },
                self.h.c_h * lambda.powf(self.h.eps),
                self.h.eps,
                &format!("rescaled({})", self.h.label),
            );
        }
        out
    }

    pub fn truncation(&self) -> usize {
        self.modes.len()
    }

    /// φ_i(r) for eigen index i (zero when the mode is absent).
    pub fn coefficient(&self, index: usize, r: f64) -> (f64, f64) {
        self.modes
            .iter()
            .filter(|m| m.index == index)
            .map(|m| m.profile.eval(r))
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
    }

    /// H(r) = Σ φ_i(r)².
    pub fn h_parseval(&self, r: f64) -> f64 {
        let mut acc = std::collections::BTreeMap::new();
        for m in &self.modes {
            *acc.entry(m.index).or_insert(0.0) += m.profile.eval(r).0;
        }
        acc.values().map(|v| v * v).sum()
    }
}

impl Field for ModalSolution {
    fn dim(&self) -> usize {
        self.decomposition.dim_n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        self.modes
            .iter()
            .map(|m| m.profile.eval(r).0 * self.decomposition.psi(m.index).eval(&th))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        let mut g = vec![0.0; x.len()];
        for m in &self.modes {
            let (p, dp) = m.profile.eval(r);
            let psi = self.decomposition.psi(m.index);
            let v = psi.eval(&th);
            let gs = psi.grad(&th);
            for d in 0..x.len() {
                g[d] += dp * v * th[d] + p * gs[d] / r;
            }
        }
        g
    }

    fn exact_gradient(&self) -> bool {
        true
    }

    fn modal(&self) -> Option<&ModalSolution> {
        Some(self)
    }
}

/// φ_i(λ) = ∫ u(λθ) ψ_i(θ) dS.
pub fn fourier_coefficient(u: &dyn Field, psi: &AngularMode, lambda: f64, quad: &SphereQuad) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(CssError::QuadratureFailure(format!("radius {lambda} must be positive")));
    }
    sphere_integral(quad, lambda, |x, th| u.value(x) * psi.eval(th))
}

/// ζ_i(s) = ∫ (h u + f(·,u))(sθ) ψ_i(θ) dS.
pub fn zeta_i(u: &dyn Field, h: &PerturbationH, f: &NonlinearityF, psi: &AngularMode, s: f64, quad: &SphereQuad) -> Result<f64> {
    sphere_integral(quad, s, |x, th| {
        let v = u.value(x);
        ((h.eval)(x) * v + (f.f)(x, v)) * psi.eval(th)
    })
}

fn same_decomposition(m: &ModalSolution, dec: &EigenDecomposition) -> bool {
    std::ptr::eq(&*m.decomposition, dec)
}

/// Υ_i(λ) = ∫_{B_λ} (h u + f(·,u)) ψ_i(x/|x|) dx.
///
/// Modal fields with radial h and f = 0 reduce to the 1-D integral
/// ∫_0^λ h φ_i s^{N-1} ds; otherwise nested radial × sphere quadrature.
pub fn upsilon_i(
    u: &dyn Field,
    h: &PerturbationH,
    f: &NonlinearityF,
    dec: &EigenDecomposition,
    i: usize,
    lambda: f64,
    quad: &SphereQuad,
) -> Result<f64> {
    let n = u.dim() as i32;
    if let (Some(m), Some(hr)) = (u.modal(), h.radial.as_ref()) {
        if f.is_zero() && same_decomposition(m, dec) {
            let rule = log_panels(lambda * 1e-14, lambda, 28, 8);
            let lead = rule.nodes.first().copied().unwrap_or(lambda);
            let g = |s: f64| hr(s) * m.coefficient(i, s).0 * s.powi(n - 1);
            let body = rule.integrate(g);
            let head = head_estimate(&g, lead)?;
            return Ok(body + head);
        }
    }
    let psi = dec.psi(i);
    let rule = log_panels(lambda * 1e-10, lambda, 20, 8);
    let mut acc = 0.0;
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * zeta_i(u, h, f, psi, *s, quad)? * s.powi(n - 1);
    }
    let g = |s: f64| zeta_i(u, h, f, psi, s, quad).unwrap_or(f64::NAN) * s.powi(n - 1);
    Ok(acc + head_estimate(&g, lambda * 1e-10)?)
}

pub(crate) fn head_estimate(g: &dyn Fn(f64) -> f64, lead: f64) -> Result<f64> {
    // ∫_0^{lead} g for g ≈ power law, fitted over the half decade below
    let g0 = g(lead);
    let g1 = g(lead * 0.5);
    if !(g0.is_finite() && g1.is_finite()) {
        return Err(CssError::QuadratureFailure("non-finite integrand near the origin".into()));
    }
    if g0 == 0.0 {
        return Ok(0.0);
    }
    if g1 == 0.0 || g1.signum() != g0.signum() {
        return Ok(0.0);
    }
    let p = (g0 / g1).log2();
    if p <= -1.0 {
        return Err(CssError::DivergentIntegrand(format!("integrand ~ s^{p} at the origin")));
    }
    Ok(g0 * lead / (p + 1.0))
}

/// Υ_i on every node of a log grid for a modal field with radial h, f = 0.
pub fn upsilon_samples(m: &ModalSolution, i: usize, grid: &LogGrid) -> Result<Vec<f64>> {
    let hr = m.h.radial.as_ref().ok_or_else(|| {
        CssError::InvalidCoefficient("Υ samples need a radial perturbation".into())
    })?;
    let n = m.dim() as i32;
    let f: Vec<f64> = (0..grid.len)
        .map(|j| {
            let r = grid.r(j);
            hr(r) * m.coefficient(i, r).0 * r.powi(n - 1)
        })
        .collect();
    if f.iter().all(|v| *v == 0.0) {
        return Ok(f);
    }
    cumulative_log(grid, &f)
}

/// Smallest C with |Υ(λ)| ≤ C λ^{N-2+δ+σ} over the samples.
pub fn upsilon_growth_constant(radii: &[f64], upsilon: &[f64], n: usize, delta: f64, sigma: f64) -> f64 {
    let p = n as f64 - 2.0 + delta + sigma;
    radii
        .iter()
        .zip(upsilon)
        .map(|(r, u)| u.abs() / r.powf(p))
        .fold(0.0, f64::max)
}

/// φ_i(λ) at every grid node from φ_i(R) and Υ_i samples:
/// λ^γ(R^{-γ}φ(R) + (2−N−γ)/(2−N−2γ)∫_λ^R s^{1−N−γ}Υ − γR^{2−N−2γ}/(2−N−2γ)∫_0^R s^{γ−1}Υ)
/// plus the exact remainder −γλ^{2−N−γ}/(N−2+2γ)∫_0^λ s^{γ−1}Υ.
pub fn integral_representation(phi_r: f64, grid: &LogGrid, upsilon: &[f64], gamma: f64, n: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    let denom = 2.0 - nf - 2.0 * gamma;
    if denom.abs() < 1e-12 {
        return Err(CssError::DegenerateDenominator(-denom));
    }
    let radii = grid.radii();
    let big_r = grid.r_max();
    let zero = upsilon.iter().all(|v| *v == 0.0);
    let (c1, c2) = if zero {
        (vec![0.0; grid.len], vec![0.0; grid.len])
    } else {
        let f1: Vec<f64> = radii.iter().zip(upsilon).map(|(s, u)| s.powf(1.0 - nf - gamma) * u).collect();
        let f2: Vec<f64> = radii.iter().zip(upsilon).map(|(s, u)| s.powf(gamma - 1.0) * u).collect();
        // the first integral only enters through differences
        let mut c1 = vec![0.0; grid.len];
        let g: Vec<f64> = f1.iter().zip(&radii).map(|(a, r)| a * r).collect();
        let c = grid.dt / 24.0;
        for j in 0..grid.len - 1 {
            let inc = if j == 0 {
                c * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3])
            } else if j + 2 >= grid.len {
                c * (9.0 * g[j + 1] + 19.0 * g[j] - 5.0 * g[j - 1] + g[j - 2])
            } else {
                c * (-g[j - 1] + 13.0 * g[j] + 13.0 * g[j + 1] - g[j + 2])
            };
            c1[j + 1] = c1[j] + inc;
        }
        (c1, cumulative_log(grid, &f2)?)
    };
    let i2 = c2[grid.len - 1];
    let c1_end = c1[grid.len - 1];
    Ok(radii
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let i1 = c1_end - c1[j];
            let main = l.powf(gamma)
                * (big_r.powf(-gamma) * phi_r + (2.0 - nf - gamma) / denom * i1
                    - gamma * big_r.powf(2.0 - nf - 2.0 * gamma) / denom * i2);
            let rem = -gamma * l.powf(2.0 - nf - gamma) / (nf - 2.0 + 2.0 * gamma) * c2[j];
            main + rem
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::AngularCoefficient;
    use crate::spectrum::assemble_spectrum;

    fn dec(coeff: &AngularCoefficient, count: usize) -> Arc<EigenDecomposition> {
        Arc::new(assemble_spectrum(coeff, count, 8).unwrap())
    }

    #[test]
    fn homogeneous_ode_is_exact() {
        for (n, mu) in [(3usize, 0.0), (5, -1.5), (4, 6.25)] {
            let p = solve_radial_ode(mu, n, &|_| 0.0, 2.0, 0.7).unwrap();
            let sp = gamma_exponent(n, mu).unwrap().0;
            for r in [2e-6, 1e-4, 0.3, 1.999] {
                let exact = 0.7 * (r / 2.0f64).powf(sp);
                assert!((p.eval(r).0 - exact).abs() < 1e-10 * exact.abs());
            }
        }
    }

    #[test]
    fn ode_below_floor_is_rejected() {
        let e = solve_radial_ode(-1.0, 3, &|_| 0.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, CssError::BelowSpectralFloor { .. }));
    }

    #[test]
    fn local_exponent_tends_to_sigma_plus() {
        let (n, mu) = (5, 1.2);
        let p = solve_radial_ode(mu, n, &|r| 0.1 * r.powf(-1.5), 1.0, 1.0).unwrap();
        let (sp, sm) = gamma_exponent(n, mu).unwrap();
        assert!((p.local_exponent(1e-4) - sp).abs() < 1e-3);
        // leading Frobenius correction −c r^ε/(ε + σ⁺ − σ⁻)
        for r in [1e-5f64, 1e-4, 1e-3] {
            let lead = -0.1 * r.powf(0.5) / (0.5 + sp - sm);
            assert!((p.local_exponent(r) - sp - lead).abs() < 0.05 * lead.abs());
        }
    }

    #[test]
    fn ode_satisfies_equation() {
        let (n, mu, c, eps) = (4usize, 0.5, 0.3, 0.4);
        let h = move |r: f64| c * r.powf(-2.0 + eps);
        let p = solve_radial_ode(mu, n, &h, 1.0, 1.0).unwrap();
        for r in [1e-3, 0.05, 0.6] {
            let d = 1e-4 * r;
            let (f0, f1) = p.eval(r);
            let fpp = (p.eval(r + d).1 - p.eval(r - d).1) / (2.0 * d);
            let res = -fpp - (n as f64 - 1.0) / r * f1 + mu / (r * r) * f0 - h(r) * f0;
            assert!(res.abs() < 1e-5 * (mu / (r * r) * f0).abs(), "r = {r}: {res}");
        }
    }

    #[test]
    fn integral_representation_of_power_upsilon() {
        // Υ = s^q drives φ = A s^{q-N+2} + C s^γ
        let (n, mu, q) = (5usize, 0.7, 3.4);
        let g = gamma_exponent(n, mu).unwrap().0;
        let b = q - n as f64 + 2.0;
        let a = q / (mu - b * (b + n as f64 - 2.0));
        let grid = LogGrid::standard(1.0);
        let ups: Vec<f64> = grid.radii().iter().map(|s| s.powf(q)).collect();
        let out = integral_representation(1.0, &grid, &ups, g, n).unwrap();
        for (j, r) in grid.radii().iter().enumerate() {
            let exact = a * r.powf(b) + (1.0 - a) * r.powf(g);
            assert!((out[j] - exact).abs() < 1e-9 * exact.abs(), "{r}");
        }
    }

    #[test]
    fn integral_representation_trivial_cases() {
        let grid = LogGrid::new(1e-3, 2.0, 50);
        let out = integral_representation(3.0, &grid, &vec![0.0; grid.len], 0.8, 4).unwrap();
        for (j, r) in grid.radii().iter().enumerate() {
            assert!((out[j] - (r / 2.0f64).powf(0.8) * 3.0).abs() < 1e-12);
        }
        let e = integral_representation(1.0, &grid, &vec![0.0; grid.len], -1.0, 4).unwrap_err();
        assert!(matches!(e, CssError::DegenerateDenominator(_)));
    }

    #[test]
    fn integral_representation_matches_ode() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.15).unwrap();
        let d = dec(&coeff, 2);
        let h = PerturbationH::radial_power(0.1, 0.5).unwrap();
        let sol = ModalSolution::generate(d.clone(), h, &[0], &[1.3], 1.0).unwrap();
        let grid = LogGrid::standard(1.0);
        let ups = upsilon_samples(&sol, 0, &grid).unwrap();
        let g = sol.modes[0].sigma_plus;
        let rep = integral_representation(1.3, &grid, &ups, g, 5).unwrap();
        let neg = integral_representation(-1.3, &grid, &ups.iter().map(|v| -v).collect::<Vec<_>>(), g, 5).unwrap();
        for (j, r) in grid.radii().iter().enumerate() {
            if *r < 1e-3 {
                continue;
            }
            let ode = sol.coefficient(0, *r).0;
            assert!((rep[j] - ode).abs() < 1e-6 * ode.abs(), "r = {r}: {} vs {ode}", rep[j]);
            assert!((neg[j] + rep[j]).abs() < 1e-14 * ode.abs().max(1.0));
        }
    }

    #[test]
    fn upsilon_closed_value() {
        let coeff = AngularCoefficient::cylindrical(4, 3, 0.1).unwrap();
        let d = dec(&coeff, 2);
        let n = 4usize;
        let eps = 0.5;
        let u = ModalSolution::homogeneous(d.clone(), 0, 1.0, 1.0).unwrap();
        let g = u.modes[0].sigma_plus;
        let h = PerturbationH::radial_power(1.0, eps).unwrap();
        let f = NonlinearityF::zero();
        let quad = SphereQuad::adapted(&coeff, 8).unwrap();
        for lam in [0.2f64, 1.0] {
            let p = n as f64 - 2.0 + eps + g;
            let exact = lam.powf(p) / p;
            let fast = upsilon_i(&u, &h, &f, &d, 0, lam, &quad).unwrap();
            assert!((fast - exact).abs() < 1e-10 * exact, "{fast} vs {exact}");
            let u_plain = crate::field::FnField::new(4, {
                let u = u.clone();
                move |x| u.value(x)
            });
            let slow = upsilon_i(&u_plain, &h, &f, &d, 0, lam, &quad).unwrap();
            assert!((slow - exact).abs() < 1e-6 * exact, "{slow} vs {exact}");
            // other modes are orthogonal
            let other = upsilon_i(&u, &h, &f, &d, 1, lam, &quad).unwrap();
            assert!(other.abs() < 1e-12);
        }
        let zero = upsilon_i(&u, &PerturbationH::zero(), &f, &d, 0, 0.5, &quad).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn fourier_coefficients_and_parseval() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.15).unwrap();
        let d = dec(&coeff, 3);
        let s0 = d.levels[0].sigma_plus;
        let s1 = d.levels[1].sigma_plus;
        let j = d.levels[1].first;
        let u = ModalSolution::from_powers(d.clone(), &[(0, 2.0, s0), (j, 3.0, s1)], 1.0).unwrap();
        let quad = SphereQuad::adapted(&coeff, 10).unwrap();
        let phi = fourier_coefficient(&u, d.psi(j), 0.5, &quad).unwrap();
        let exact = 3.0 * 0.5f64.powf(s1);
        assert!((phi - exact).abs() < 1e-8 * exact, "{phi} vs {exact}");
        let p0 = fourier_coefficient(&u, d.psi(0), 0.5, &quad).unwrap();
        assert!((p0 - 2.0 * 0.5f64.powf(s0)).abs() < 1e-8);
        for r in [1e-3, 0.3, 1.0] {
            let hq = sphere_integral(&quad, r, |x, _| u.value(x).powi(2)).unwrap();
            let hp = u.h_parseval(r);
            assert!((hq - hp).abs() < 1e-8 * hp, "r = {r}: {hq} vs {hp}");
        }
    }

    #[test]
    fn radial_independent_field() {
        let coeff = AngularCoefficient::cylindrical(4, 3, 0.1).unwrap();
        let d = dec(&coeff, 2);
        let u = ModalSolution::from_powers(d.clone(), &[(1, 1.0, 0.0)], 1.0).unwrap();
        let quad = SphereQuad::adapted(&coeff, 8).unwrap();
        for lam in [0.1, 0.9] {
            let v = fourier_coefficient(&u, d.psi(1), lam, &quad).unwrap();
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn modal_gradient_matches_differences() {
        let coeff = AngularCoefficient::cylindrical(4, 3, 0.1).unwrap();
        let d = dec(&coeff, 2);
        let h = PerturbationH::radial_power(0.2, 0.5).unwrap();
        let u = ModalSolution::generate(d, h, &[0, 1], &[1.0, -0.5], 1.0).unwrap();
        let x = [0.2, -0.3, 0.1, 0.25];
        let g = u.gradient(&x);
        let fd = crate::field::FnField::new(4, {
            let u = u.clone();
            move |y| u.value(y)
        })
        .gradient(&x);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn kelvin_of_homogeneous_field() {
        let coeff = AngularCoefficient::cylindrical(4, 3, 0.1).unwrap();
        let d = dec(&coeff, 1);
        let u = Arc::new(ModalSolution::homogeneous(d.clone(), 0, 1.0, 1.0).unwrap());
        let g = u.modes[0].sigma_plus;
        let k = crate::field::kelvin_transform(u.clone());
        for x in [[0.5, 0.3, -0.2, 0.9], [2.0, -1.0, 0.5, 0.1]] {
            let r = norm(&x);
            let th: Vec<f64> = x.iter().map(|v| v / r).collect();
            let exact = r.powf(-2.0 - g) * d.psi(0).eval(&th);
            assert!((k.value(&x) - exact).abs() < 1e-12 * exact.abs());
        }
    }
}
