//! Hardy-type inequalities and Pohozaev identities checked by quadrature.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::almgren::sobolev_constant;
use crate::error::{CssError, Result};
use crate::field::{Field, Problem, SphereQuad};
use crate::numerics::gauss::{legendre_on, ln_gamma_fn, log_panels, Rule1d};
use crate::numerics::sphere::sphere_area;
use crate::numerics::{norm, two_star};
use crate::potential::{AngularCoefficient, NonlinearityF, PerturbationH, Term};
use crate::radial::head_estimate;
use crate::spectrum::sector::SturmLiouvilleReduction;
use crate::spectrum::{assemble_spectrum, classify, lambda_of, AngularMode, EigenDecomposition, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyKind {
    Cylindrical,
    TwoBody,
    ManyParticle,
    Sphere,
    Boundary,
    BoundaryPair,
    /// boundary inequality with constant μ₁(a) + ((N−2)/2)²
    BoundarySpectral,
    Coercivity,
    CoercivityJ,
    CoercivityPair,
    HardySobolevBoundary,
}

impl HardyKind {
    pub const ALL: [HardyKind; 11] = [
        HardyKind::Cylindrical,
        HardyKind::TwoBody,
        HardyKind::ManyParticle,
        HardyKind::Sphere,
        HardyKind::Boundary,
        HardyKind::BoundaryPair,
        HardyKind::BoundarySpectral,
        HardyKind::Coercivity,
        HardyKind::CoercivityJ,
        HardyKind::CoercivityPair,
        HardyKind::HardySobolevBoundary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            HardyKind::Cylindrical => "cylindrical",
            HardyKind::TwoBody => "two_body",
            HardyKind::ManyParticle => "many_particle",
            HardyKind::Sphere => "sphere",
            HardyKind::Boundary => "boundary",
            HardyKind::BoundaryPair => "boundary_pair",
            HardyKind::BoundarySpectral => "boundary_spectral",
            HardyKind::Coercivity => "coercivity",
            HardyKind::CoercivityJ => "coercivity_J",
            HardyKind::CoercivityPair => "coercivity_pair",
            HardyKind::HardySobolevBoundary => "hardy_sobolev_boundary",
        }
    }

    /// Test functions live on B_r (true) or have compact support in ℝ^N.
    pub fn on_ball(&self) -> bool {
        !matches!(self, HardyKind::Cylindrical | HardyKind::TwoBody | HardyKind::ManyParticle | HardyKind::Sphere)
    }

    pub fn needs_pair(&self) -> bool {
        matches!(self, HardyKind::TwoBody | HardyKind::BoundaryPair | HardyKind::CoercivityPair)
    }

    fn needs_cyl(&self) -> bool {
        matches!(self, HardyKind::Cylindrical | HardyKind::Boundary | HardyKind::CoercivityJ)
    }

    fn needs_a(&self) -> bool {
        matches!(
            self,
            HardyKind::ManyParticle
                | HardyKind::Sphere
                | HardyKind::BoundarySpectral
                | HardyKind::Coercivity
                | HardyKind::CoercivityJ
                | HardyKind::CoercivityPair
                | HardyKind::HardySobolevBoundary
        )
    }
}

impl fmt::Display for HardyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HardyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        HardyKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown inequality kind {s:?}"))
    }
}

/// Radial factor g(r) of a separable test function.
#[derive(Debug, Clone)]
pub enum RadialFactor {
    /// r^p η(r/R) with the C^∞ bump η(t) = exp(1 − 1/(1−t²))
    Bump { radius: f64, power: f64 },
    /// Σ c_j r^j
    Poly(Vec<f64>),
}

impl RadialFactor {
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match self {
            RadialFactor::Bump { radius, power } => {
                let t = r / radius;
                if t >= 1.0 {
                    return (0.0, 0.0);
                }
                let q = 1.0 - t * t;
                let eta = (1.0 - 1.0 / q).exp();
                let deta = eta * (-2.0 * t / (q * q)) / radius;
                let rp = r.powf(*power);
                (rp * eta, rp * deta + power * r.powf(power - 1.0) * eta)
            }
            RadialFactor::Poly(c) => {
                let mut v = 0.0;
                let mut d = 0.0;
                for (j, cj) in c.iter().enumerate().rev() {
                    v = v * r + cj;
                    if j > 0 {
                        d = d * r + j as f64 * cj;
                    }
                }
                (v, d)
            }
        }
    }
}

/// Angular factor Ψ(θ).
#[derive(Debug, Clone)]
pub enum AngularFactor {
    /// |θ_J|^s, J 0-based
    CylPower { j: Vec<usize>, s: f64 },
    /// |θ_{J1} − θ_{J2}|^s
    PairPower { j1: Vec<usize>, j2: Vec<usize>, s: f64 },
    /// Σ c_i ψ_i; families sharing a basis share its tabulation
    Modes { basis: Arc<Vec<AngularMode>>, coefs: Vec<f64> },
}

impl AngularFactor {
    pub fn eval_grad(&self, th: &[f64]) -> (f64, Vec<f64>) {
        let n = th.len();
        match self {
            AngularFactor::CylPower { j, s } => {
                let t = Term::Cyl { j: j.clone(), alpha: 1.0 };
                power_term(&t, *s, th)
            }
            AngularFactor::PairPower { j1, j2, s } => {
                let t = Term::Pair { j1: j1.clone(), j2: j2.clone(), alpha: 1.0 };
                power_term(&t, *s, th)
            }
            AngularFactor::Modes { basis, coefs } => {
                let mut v = 0.0;
                let mut g = vec![0.0; n];
                for (psi, c) in basis.iter().zip(coefs) {
                    v += c * psi.eval(th);
                    for (gi, pi) in g.iter_mut().zip(psi.grad(th)) {
                        *gi += c * pi;
                    }
                }
                (v, g)
            }
        }
    }
}

// d^{s/2} with d = |θ_J|² or |θ_{J1}−θ_{J2}|², tangential gradient.
fn power_term(t: &Term, s: f64, th: &[f64]) -> (f64, Vec<f64>) {
    let d2 = t.d2(th);
    let v = d2.powf(0.5 * s);
    let gd = t.grad_d2(th);
    let radial: f64 = gd.iter().zip(th).map(|(a, b)| a * b).sum();
    let g = gd
        .iter()
        .zip(th)
        .map(|(gi, xi)| 0.5 * s * d2.powf(0.5 * s - 1.0) * (gi - radial * xi))
        .collect();
    (v, g)
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub radial: RadialFactor,
    pub angular: AngularFactor,
    pub label: String,
}

/// Best constant of H¹(B₁) ⊂ L^{2*}(B₁) with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SobolevBallEstimate {
    pub value: f64,
    pub provenance: String,
}

/// Upper estimate of S̃_N: minimum over radial profiles 1 + c r², capped by
/// the boundary-concentration limit S·2^{−2/N}.
pub fn estimate_s_tilde(n: usize) -> SobolevBallEstimate {
    let ts = two_star(n);
    let rule = legendre_on(64, 0.0, 1.0);
    let omega = sphere_area(n);
    let mut best = f64::INFINITY;
    for i in 0..=400 {
        let c = -0.95 + i as f64 * 0.01;
        let (mut num, mut den) = (0.0, 0.0);
        for (r, w) in rule.nodes.iter().zip(&rule.weights) {
            let g = 1.0 + c * r * r;
            let dg = 2.0 * c * r;
            let j = w * r.powi(n as i32 - 1) * omega;
            num += j * (dg * dg + g * g);
            den += j * g.abs().powf(ts);
        }
        best = best.min(num / den.powf(2.0 / ts));
    }
    let cap = sobolev_constant(n) * 2f64.powf(-2.0 / n as f64);
    SobolevBallEstimate {
        value: best.min(cap),
        provenance: format!("radial family 1+c r^2 minimum {best:.6}, boundary bubble cap {cap:.6}"),
    }
}

/// Constants an inequality check may need, estimated once per coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct HardyConstants {
    pub lambda: f64,
    pub mu1: f64,
    pub s_tilde: Option<SobolevBallEstimate>,
}

impl HardyConstants {
    pub fn compute(coeff: &AngularCoefficient, with_s_tilde: bool) -> Result<Self> {
        let lambda = lambda_of(coeff)?;
        let mu1 = if coeff.is_zero() { 0.0 } else { assemble_spectrum(coeff, 1, 8)?.mu1() };
        let s_tilde = with_s_tilde.then(|| estimate_s_tilde(coeff.dim()));
        Ok(Self { lambda, mu1, s_tilde })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub constant: f64,
    /// smallest LHS/RHS ratio over the family (finest quadrature)
    pub worst_quotient: f64,
    /// worst_quotient/constant − 1
    pub margin: f64,
    /// worst quotient per quadrature refinement level
    pub trend: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct AngularIntegrals {
    mass: f64,
    grad: f64,
    a: f64,
    cyl: f64,
    pair: f64,
    p2: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct RadialIntegrals {
    /// ∫ g'² r^{N−1}
    g1: f64,
    /// ∫ g² r^{N−3}
    g0: f64,
    /// g(R)² R^{N−1}
    gb: f64,
    /// ∫ |g|^{2*} r^{N−1}
    gp: f64,
}

fn radial_rule(radius: f64) -> Rule1d {
    let mut r = log_panels(radius * 1e-14, radius * 0.1, 26, 8);
    let top = legendre_on(64, radius * 0.1, radius);
    r.nodes.extend(top.nodes);
    r.weights.extend(top.weights);
    r
}

fn radial_integrals(g: &RadialFactor, n: usize, radius: f64) -> Result<RadialIntegrals> {
    let ts = two_star(n);
    let rule = radial_rule(radius);
    let lead = radius * 1e-14;
    let ni = n as i32;
    let f1 = |r: f64| g.eval(r).1.powi(2) * r.powi(ni - 1);
    let f0 = |r: f64| g.eval(r).0.powi(2) * r.powi(ni - 3);
    let fp = |r: f64| g.eval(r).0.abs().powf(ts) * r.powi(ni - 1);
    Ok(RadialIntegrals {
        g1: rule.integrate(f1) + head_estimate(&f1, lead)?,
        g0: rule.integrate(f0) + head_estimate(&f0, lead)?,
        gb: g.eval(radius).0.powi(2) * radius.powi(ni - 1),
        gp: rule.integrate(fp) + head_estimate(&fp, lead)?,
    })
}

/// ∫_{S^{N−1}} |θ_J|^p dS for #J = k.
pub fn cyl_moment(n: usize, k: usize, p: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    sphere_area(n) * (ln_gamma_fn(nf / 2.0) + ln_gamma_fn((kf + p) / 2.0) - ln_gamma_fn(kf / 2.0) - ln_gamma_fn((nf + p) / 2.0)).exp()
}

struct Weights<'a> {
    coeff: &'a AngularCoefficient,
    cyl: Term,
    pair: Option<Term>,
}

fn closed_form(psi: &AngularFactor, w: &Weights, kind: HardyKind) -> Option<AngularIntegrals> {
    let n = w.coeff.dim();
    let ts = two_star(n);
    let a_terms = if kind.needs_a() { w.coeff.active_terms() } else { vec![] };
    match psi {
        AngularFactor::CylPower { j, s } => {
            if kind.needs_pair() || *j != w.cyl.block() {
                return None;
            }
            let mut alpha = 0.0;
            for t in &a_terms {
                match t {
                    Term::Cyl { j: tj, alpha: al } if tj == j => alpha += al,
                    _ => return None,
                }
            }
            let k = j.len();
            let m = |p: f64| cyl_moment(n, k, p);
            Some(AngularIntegrals {
                mass: m(2.0 * s),
                grad: s * s * (m(2.0 * s - 2.0) - m(2.0 * s)),
                a: alpha * m(2.0 * s - 2.0),
                cyl: m(2.0 * s - 2.0),
                pair: 0.0,
                p2: m(ts * s),
            })
        }
        AngularFactor::PairPower { j1, j2, s } => {
            let same = |t: &Term| matches!(t, Term::Pair { j1: a, j2: b, .. } if a == j1 && b == j2);
            if !w.pair.as_ref().is_some_and(same) || kind.needs_cyl() {
                return None;
            }
            let mut alpha = 0.0;
            for t in &a_terms {
                if same(t) {
                    alpha += t.alpha();
                } else {
                    return None;
                }
            }
            // |θ_{J1}−θ_{J2}|² = 2|z_J|² after rotation
            let k = j1.len();
            let m = |p: f64| cyl_moment(n, k, p);
            let c = 2f64.powf(*s);
            Some(AngularIntegrals {
                mass: c * m(2.0 * s),
                grad: c * s * s * (m(2.0 * s - 2.0) - m(2.0 * s)),
                a: alpha * 0.5 * c * m(2.0 * s - 2.0),
                cyl: 0.0,
                pair: 0.5 * c * m(2.0 * s - 2.0),
                p2: 2f64.powf(0.5 * ts * s) * m(ts * s),
            })
        }
        AngularFactor::Modes { .. } => None,
    }
}

type Table = (Vec<f64>, Vec<f64>);

fn tabulate(basis: &[AngularMode], quad: &SphereQuad) -> Table {
    let (m, n) = (basis.len(), quad.dim);
    let mut vals = Vec::with_capacity(quad.len() * m);
    let mut grads = Vec::with_capacity(quad.len() * m * n);
    for i in 0..quad.len() {
        let th = quad.point(i);
        for psi in basis {
            vals.push(psi.eval(th));
            grads.extend(psi.grad(th));
        }
    }
    (vals, grads)
}

fn quadrature_integrals(psi: &AngularFactor, w: &Weights, quad: &SphereQuad, table: Option<&Table>) -> AngularIntegrals {
    let n = w.coeff.dim();
    let ts = two_star(n);
    let mut out = AngularIntegrals::default();
    let mut g = vec![0.0; n];
    for i in 0..quad.len() {
        let th = quad.point(i);
        let wt = quad.weights[i];
        let v = match (psi, table) {
            (AngularFactor::Modes { coefs, .. }, Some((vals, grads))) => {
                let m = coefs.len();
                g.iter_mut().for_each(|x| *x = 0.0);
                let mut v = 0.0;
                for (j, c) in coefs.iter().enumerate() {
                    v += c * vals[i * m + j];
                    let row = &grads[(i * m + j) * n..(i * m + j + 1) * n];
                    for (gi, ri) in g.iter_mut().zip(row) {
                        *gi += c * ri;
                    }
                }
                v
            }
            _ => {
                let (v, gg) = psi.eval_grad(th);
                g.copy_from_slice(&gg);
                v
            }
        };
        let v2 = v * v;
        out.mass += wt * v2;
        out.grad += wt * g.iter().map(|x| x * x).sum::<f64>();
        out.a += wt * w.coeff.eval_unchecked(th) * v2;
        out.cyl += wt * v2 / w.cyl.d2(th);
        if let Some(p) = &w.pair {
            out.pair += wt * v2 / p.d2(th);
        }
        out.p2 += wt * v.abs().powf(ts);
    }
    out
}

/// Cylindrical and pair weights the inequalities use: the first active term of
/// each kind, else J = {1..k} (and {k+1..2k} when 2k ≤ N).
pub fn weight_terms(coeff: &AngularCoefficient) -> Result<(Term, Option<Term>)> {
    let (n, k) = (coeff.dim(), coeff.block());
    let terms = coeff.active_terms();
    let cyl = terms
        .iter()
        .find(|t| matches!(t, Term::Cyl { .. }))
        .cloned()
        .unwrap_or(Term::Cyl { j: (0..k).collect(), alpha: 1.0 });
    let pair = terms.iter().find(|t| matches!(t, Term::Pair { .. })).cloned().or_else(|| {
        (2 * k <= n).then(|| Term::Pair { j1: (0..k).collect(), j2: (k..2 * k).collect(), alpha: 1.0 })
    });
    Ok((cyl, pair))
}

/// Coefficient carrying every singular set the integrands see, used only
/// to shape the sphere quadrature.
fn quadrature_shape(coeff: &AngularCoefficient, w: &Weights) -> Result<AngularCoefficient> {
    let (n, k) = (coeff.dim(), coeff.block());
    let mut sets: Vec<Term> = coeff.active_terms();
    sets.push(w.cyl.clone());
    sets.extend(w.pair.clone());
    let one = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let mut out = AngularCoefficient::new(n, k)?;
    for t in sets {
        let res = match &t {
            Term::Cyl { j, .. } => out.clone().with_cyl(&one(j), 1e-3),
            Term::Pair { j1, j2, .. } => out.clone().with_pair(&one(j1), &one(j2), 1e-3),
        };
        if let Ok(c) = res {
            out = c;
        }
    }
    Ok(out)
}

fn quotient(kind: HardyKind, n: usize, r: f64, c: &HardyConstants, alpha_plus: f64, ai: &AngularIntegrals, ri: &RadialIntegrals) -> (f64, f64) {
    let nf = n as f64;
    let hardy = ((n as f64 - 2.0) / 2.0).powi(2);
    let grad = ri.g1 * ai.mass + ri.g0 * ai.grad;
    let bd = (nf - 2.0) / (2.0 * r) * ri.gb * ai.mass;
    let a_int = ri.g0 * ai.a;
    let cyl = ri.g0 * ai.cyl;
    let pair = ri.g0 * ai.pair;
    match kind {
        HardyKind::Cylindrical | HardyKind::TwoBody => (grad, if kind.needs_pair() { pair } else { cyl }),
        HardyKind::ManyParticle => (alpha_plus * grad, a_int),
        HardyKind::Sphere => (alpha_plus * (ai.grad + hardy * ai.mass), ai.a),
        HardyKind::Boundary => (grad + bd, cyl),
        HardyKind::BoundaryPair => (grad + bd, pair),
        HardyKind::BoundarySpectral => (grad - a_int + bd, ri.g0 * ai.mass),
        HardyKind::Coercivity => (grad - a_int + c.lambda * bd, grad),
        HardyKind::CoercivityJ => (grad - a_int + bd, cyl),
        HardyKind::CoercivityPair => (grad - a_int + bd, pair),
        HardyKind::HardySobolevBoundary => {
            let ts = two_star(n);
            (grad - a_int + 0.5 * (1.0 + c.lambda) * bd, (ri.gp * ai.p2).powf(2.0 / ts))
        }
    }
}

/// Constant of the inequality LHS ≥ C·RHS for `kind`.
pub fn hardy_constant(kind: HardyKind, coeff: &AngularCoefficient, c: &HardyConstants) -> Result<f64> {
    let (n, k) = (coeff.dim() as f64, coeff.block() as f64);
    let cyl = ((k - 2.0) / 2.0).powi(2);
    let pair = (k - 2.0).powi(2) / 2.0;
    Ok(match kind {
        HardyKind::Cylindrical | HardyKind::ManyParticle | HardyKind::Sphere | HardyKind::Boundary => cyl,
        HardyKind::TwoBody | HardyKind::BoundaryPair => pair,
        HardyKind::BoundarySpectral => c.mu1 + ((n - 2.0) / 2.0).powi(2),
        HardyKind::Coercivity => 1.0 - c.lambda,
        HardyKind::CoercivityJ => (1.0 - c.lambda) * cyl,
        HardyKind::CoercivityPair => (1.0 - c.lambda) * pair,
        HardyKind::HardySobolevBoundary => {
            let s = c.s_tilde.as_ref().ok_or_else(|| CssError::UnknownConstant("S̃_N".into()))?;
            0.9 * s.value / 2.0 * (1.0 - c.lambda).min(c.mu1 + ((n - 2.0) / 2.0).powi(2))
        }
    })
}

/// Both sides of one inequality over a family of separable test functions,
/// at two sphere-quadrature levels. `scale` multiplies the constant.
pub fn verify_hardy(
    kind: HardyKind,
    coeff: &AngularCoefficient,
    family: &[TestFunction],
    r: f64,
    consts: &HardyConstants,
    scale: f64,
) -> Result<InequalityReport> {
    Ok(verify_hardy_many(&[kind], coeff, family, r, consts, scale)?.remove(0))
}

/// Several inequalities over one family; angular quadratures are shared.
pub fn verify_hardy_many(
    kinds: &[HardyKind],
    coeff: &AngularCoefficient,
    family: &[TestFunction],
    r: f64,
    consts: &HardyConstants,
    scale: f64,
) -> Result<Vec<InequalityReport>> {
    let (n, k) = (coeff.dim(), coeff.block());
    let (cyl, pair) = weight_terms(coeff)?;
    let w = Weights { coeff, cyl, pair };
    for kind in kinds {
        if kind.needs_pair() && 2 * k > n {
            return Err(CssError::InvalidCoefficient(format!("pair inequalities need 2k <= N (k = {k}, N = {n})")));
        }
        hardy_constant(*kind, coeff, consts)?;
    }
    let alpha_plus: f64 = coeff.active_terms().iter().map(|t| t.alpha().max(0.0)).sum();
    let mut radial = Vec::with_capacity(family.len());
    for f in family {
        let ball = radial_integrals(&f.radial, n, r)?;
        let whole = match f.radial {
            RadialFactor::Bump { radius, .. } => Some(radial_integrals(&f.radial, n, radius)?),
            RadialFactor::Poly(_) => None,
        };
        radial.push((ball, whole));
    }
    let need_quad = kinds.iter().any(|kind| family.iter().any(|f| closed_form(&f.angular, &w, *kind).is_none()));
    let levels: &[usize] = if need_quad { &[4, 6] } else { &[0] };
    let shape = quadrature_shape(coeff, &w)?;
    let mut trends = vec![Vec::new(); kinds.len()];
    for &deg in levels {
        let quad = if need_quad { Some(SphereQuad::adapted_with_depth(&shape, deg, 1e-12)?) } else { None };
        let mut tables: Vec<(*const Vec<AngularMode>, Table)> = Vec::new();
        let mut numeric = Vec::with_capacity(family.len());
        for f in family {
            let Some(q) = &quad else {
                numeric.push(None);
                continue;
            };
            if !kinds.iter().any(|kind| closed_form(&f.angular, &w, *kind).is_none()) {
                numeric.push(None);
                continue;
            }
            let table = if let AngularFactor::Modes { basis, .. } = &f.angular {
                let key = Arc::as_ptr(basis);
                if !tables.iter().any(|(kp, _)| *kp == key) {
                    tables.push((key, tabulate(basis, q)));
                }
                tables.iter().find(|(kp, _)| *kp == key).map(|(_, t)| t)
            } else {
                None
            };
            numeric.push(Some(quadrature_integrals(&f.angular, &w, q, table)));
        }
        for (ki, kind) in kinds.iter().enumerate() {
            let mut worst = f64::INFINITY;
            for (fi, f) in family.iter().enumerate() {
                let ai = match closed_form(&f.angular, &w, *kind) {
                    Some(c) => c,
                    None => numeric[fi].expect("quadrature integrals"),
                };
                let ri = if kind.on_ball() {
                    radial[fi].0
                } else {
                    radial[fi].1.ok_or_else(|| {
                        CssError::InvalidCoefficient(format!("{} needs compactly supported test functions", kind.name()))
                    })?
                };
                let (lhs, rhs) = quotient(*kind, n, r, consts, alpha_plus, &ai, &ri);
                if !(lhs.is_finite() && rhs.is_finite()) {
                    return Err(CssError::QuadratureFailure(format!("{}: non-finite side for {}", kind.name(), f.label)));
                }
                if rhs > 1e-300 {
                    worst = worst.min(lhs / rhs);
                }
            }
            trends[ki].push(worst);
        }
    }
    kinds
        .iter()
        .zip(trends)
        .map(|(kind, trend)| {
            let constant = scale * hardy_constant(*kind, coeff, consts)?;
            let worst_quotient = *trend.last().unwrap();
            let margin = if worst_quotient.is_infinite() {
                f64::INFINITY
            } else if constant > 0.0 {
                worst_quotient / constant - 1.0
            } else {
                worst_quotient - constant
            };
            // quadrature drift between levels must not exceed the margin
            let stable = trend.len() < 2 || {
                let (a, b) = (trend[0], trend[1]);
                !a.is_finite() || (a - b).abs() <= (1e-6 * b.abs()).max(b - constant)
            };
            Ok(InequalityReport {
                name: kind.name().into(),
                constant,
                worst_quotient,
                margin,
                trend,
                pass: margin >= 0.0 && stable,
            })
        })
        .collect()
}

/// Tensor products of a radial bump (or low-degree polynomial on B_r)
/// with spherical harmonics of degree ≤ l_max.
pub fn family_harmonics(n: usize, l_max: u32, ball: bool) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for l in 0..=l_max {
        for (i, p) in crate::numerics::poly::harmonic_basis(n, l).into_iter().take(2).enumerate() {
            let radial = if ball {
                RadialFactor::Poly(vec![1.0, 0.0, 0.5])
            } else {
                RadialFactor::Bump { radius: 1.0, power: 0.0 }
            };
            let psi = AngularMode::Harmonic { poly: Arc::new(p), degree: l };
            let angular = AngularFactor::Modes { basis: Arc::new(vec![psi]), coefs: vec![1.0] };
            out.push(TestFunction { radial, angular, label: format!("Y_{l},{i}") });
        }
    }
    out
}

/// η(|x|)|x_J|^s with s = −(k−2)/2 + t, approaching the Hardy optimizer.
pub fn family_near_optimizer(term: &Term, t: f64) -> TestFunction {
    let k = term.block().len() as f64;
    let s = -(k - 2.0) / 2.0 + t;
    let angular = match term {
        Term::Cyl { j, .. } => AngularFactor::CylPower { j: j.clone(), s },
        Term::Pair { j1, j2, .. } => AngularFactor::PairPower { j1: j1.clone(), j2: j2.clone(), s },
    };
    TestFunction { radial: RadialFactor::Bump { radius: 1.0, power: s }, angular, label: format!("near-optimizer t={t}") }
}

/// `count` seeded random combinations of the first eigenmodes with random radial parts.
pub fn family_random_modal(dec: &EigenDecomposition, count: usize, seed: u64, ball: bool) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Arc<Vec<AngularMode>> = Arc::new((0..dec.len().min(6)).map(|j| dec.psi(j).clone()).collect());
    (0..count)
        .map(|i| {
            let coefs: Vec<f64> = basis.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let radial = if ball {
                RadialFactor::Poly(vec![1.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            } else {
                RadialFactor::Bump { radius: 1.0, power: rng.gen_range(0.0..1.0) }
            };
            TestFunction { radial, angular: AngularFactor::Modes { basis: basis.clone(), coefs }, label: format!("random-{i}") }
        })
        .collect()
}

/// Zero test function (0 ≤ 0).
pub fn zero_function(n: usize) -> TestFunction {
    let p = crate::numerics::poly::Poly::monomial(vec![0; n], 0.0);
    TestFunction {
        radial: RadialFactor::Bump { radius: 1.0, power: 0.0 },
        angular: AngularFactor::Modes {
            basis: Arc::new(vec![AngularMode::Harmonic { poly: Arc::new(p), degree: 0 }]),
            coefs: vec![1.0],
        },
        label: "zero".into(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PohozaevReport {
    pub r: f64,
    /// identity with h integrated by parts, relative to its largest term
    pub poho: f64,
    /// energy identity ∫|∇u|² − a u²/|x|² = ∫_∂ u∂_νu + ∫hu² + ∫fu
    pub energy: f64,
    /// identity with the ∫h u (x·∇u) term
    pub poho_hx: f64,
    /// sampled relative PDE residual (non-modal fields only)
    pub pde_residual: Option<f64>,
}

struct Terms {
    grad: f64,
    a: f64,
    hu2: f64,
    dh_u2: f64,
    hu_xdu: f64,
    big_f: f64,
    dxf: f64,
    fu: f64,
}

fn terms_at(u: &dyn Field, pb: &Problem, pot: &dyn Fn(&[f64]) -> f64, x: &[f64], th: &[f64]) -> Result<(Terms, f64, f64)> {
    let v = u.value(x);
    let g = pb.gradient_at(u, x, th)?;
    let r = norm(x);
    let dr: f64 = g.iter().zip(th).map(|(a, b)| a * b).sum();
    let h = (pb.h.eval)(x);
    let t = Terms {
        grad: g.iter().map(|c| c * c).sum(),
        a: pot(th) * v * v / (r * r),
        hu2: h * v * v,
        dh_u2: (pb.h.grad_dot_x)(x) * v * v,
        hu_xdu: h * v * r * dr,
        big_f: (pb.f.big_f)(x, v),
        dxf: (pb.f.gradx_f_dot_x)(x, v),
        fu: (pb.f.f)(x, v) * v,
    };
    Ok((t, v, dr))
}

/// Residuals of the Pohozaev identities on B_r with the angular coefficient
/// of `pb` (or `potential` when given, e.g. a bounded regularization).
pub fn verify_pohozaev(u: &dyn Field, pb: &Problem, potential: Option<&dyn Fn(&[f64]) -> f64>, r: f64) -> Result<PohozaevReport> {
    let coeff = pb.coeff.clone();
    let default = move |th: &[f64]| coeff.eval_unchecked(th);
    let pot: &dyn Fn(&[f64]) -> f64 = potential.unwrap_or(&default);
    let n = pb.dim();
    let nf = n as f64;
    let pde_residual = if u.modal().is_some() { None } else { Some(pde_residual(u, pb, pot, r)?) };
    if let Some(res) = pde_residual {
        if res > 1e-6 {
            return Err(CssError::NotASolution(res));
        }
    }
    // volume integrals
    let rule = log_panels(r * 1e-12, r, 24, 8);
    let mut vol = [0.0f64; 8];
    let shell = |s: f64, acc: &mut [f64; 8]| -> Result<()> {
        let mut x = vec![0.0; n];
        let mut loc = [0.0f64; 8];
        for i in 0..pb.quad.len() {
            let th = pb.quad.point(i);
            for (d, c) in th.iter().enumerate() {
                x[d] = s * c;
            }
            let (t, _, _) = terms_at(u, pb, pot, &x, th)?;
            let w = pb.quad.weights[i];
            for (l, v) in loc.iter_mut().zip([t.grad, t.a, t.hu2, t.dh_u2, t.hu_xdu, t.big_f, t.dxf, t.fu]) {
                *l += w * v;
            }
        }
        for (a, l) in acc.iter_mut().zip(loc) {
            *a += l * s.powi(n as i32 - 1);
        }
        Ok(())
    };
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let mut loc = [0.0; 8];
        shell(*s, &mut loc)?;
        for (a, l) in vol.iter_mut().zip(loc) {
            *a += w * l;
        }
    }
    // power-law tail on (0, r·1e-12)
    let lead = r * 1e-12;
    for c in 0..8 {
        let g = |s: f64| {
            let mut loc = [0.0; 8];
            shell(s, &mut loc).map(|_| loc[c]).unwrap_or(f64::NAN)
        };
        vol[c] += head_estimate(&g, lead)?;
    }
    let [v_grad, v_a, v_hu2, v_dh, v_hxdu, v_f, v_dxf, v_fu] = vol;
    // boundary integrals
    let mut bd = [0.0f64; 6];
    let mut x = vec![0.0; n];
    for i in 0..pb.quad.len() {
        let th = pb.quad.point(i);
        for (d, c) in th.iter().enumerate() {
            x[d] = r * c;
        }
        let (t, v, dr) = terms_at(u, pb, pot, &x, th)?;
        let w = pb.quad.weights[i] * r.powi(n as i32 - 1);
        for (b, val) in bd.iter_mut().zip([t.grad, t.a, dr * dr, v * dr, t.hu2, t.big_f]) {
            *b += w * val;
        }
    }
    let [b_grad, b_a, b_dr2, b_udr, b_hu2, b_f] = bd;
    let rel = |terms: &[f64], lhs: f64, rhs: f64| {
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    };
    let l1 = -(nf - 2.0) / 2.0 * (v_grad - v_a);
    let l2 = r / 2.0 * (b_grad - b_a);
    let rf = r * b_dr2;
    let fterms = r * b_f - (v_dxf + nf * v_f);
    let h_parts = -0.5 * v_dh - nf / 2.0 * v_hu2 + r / 2.0 * b_hu2;
    let poho = rel(&[l1, l2, rf, 0.5 * v_dh, nf / 2.0 * v_hu2, r / 2.0 * b_hu2, r * b_f, v_dxf + nf * v_f], l1 + l2, rf + h_parts + fterms);
    let poho_hx = rel(&[l1, l2, rf, v_hxdu, r * b_f, v_dxf + nf * v_f], l1 + l2, rf + v_hxdu + fterms);
    let energy = rel(&[v_grad, v_a, b_udr, v_hu2, v_fu], v_grad - v_a, b_udr + v_hu2 + v_fu);
    Ok(PohozaevReport { r, poho, energy, poho_hx, pde_residual })
}

/// max over a sample cloud of |−Δu − a u/|x|² − h u − f| relative to the
/// largest of its terms; 4th-order finite-difference Laplacian.
fn pde_residual(u: &dyn Field, pb: &Problem, pot: &dyn Fn(&[f64]) -> f64, r: f64) -> Result<f64> {
    let n = pb.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 40 {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nx = norm(&x);
        if !(0.2..=1.0).contains(&nx) {
            continue;
        }
        x.iter_mut().for_each(|c| *c *= r);
        let th: Vec<f64> = x.iter().map(|c| c / norm(&x)).collect();
        if pb.coeff.dist_to_singular(&th) < 0.2 {
            continue;
        }
        done += 1;
        let hs = 1e-3 * norm(&x);
        let u0 = u.value(&x);
        let mut lap = 0.0;
        let mut y = x.clone();
        for d in 0..n {
            let mut at = |o: f64| {
                y[d] = x[d] + o * hs;
                u.value(&y)
            };
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            y[d] = x[d];
            lap += (-p2 + 16.0 * p1 - 30.0 * u0 + 16.0 * m1 - m2) / (12.0 * hs * hs);
        }
        let rr = norm(&x);
        let t = [lap, pot(&th) * u0 / (rr * rr), (pb.h.eval)(&x) * u0, (pb.f.f)(&x, u0)];
        let res = -t[0] - t[1] - t[2] - t[3];
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            worst = worst.max(res.abs() / scale);
        }
    }
    Ok(worst)
}

/// Sphere rule for energy-type integrands a ψ² near the singular cone. The
/// graded sector rule drops the tube of angular radius δ, which carries a
/// share ~ δ^{2s+k−2} (s the Frobenius exponent there); δ is chosen so that
/// share stays near 1e−12.
pub fn energy_quadrature(coeff: &AngularCoefficient, degree: usize) -> Result<SphereQuad> {
    let n = coeff.dim();
    let depth = match classify(coeff) {
        Shape::Sector { k, alpha, alpha_c, .. } => {
            let mut red = SturmLiouvilleReduction::new(n, k, alpha, (0, 0));
            red.alpha_c = alpha_c;
            let sup = |a: f64, c: f64| CssError::SupercriticalAlpha { alpha: a, critical: c };
            let s = red.exponent_sin().ok_or_else(|| sup(alpha, ((k as f64 - 2.0) / 2.0).powi(2)))?;
            let t = red.exponent_cos().ok_or_else(|| sup(alpha_c, ((n as f64 - k as f64 - 2.0) / 2.0).powi(2)))?;
            let mut p = 2.0 * s + k as f64 - 2.0;
            // the cos side is only truncated when it carries a singular term
            if alpha_c != 0.0 {
                p = p.min(2.0 * t + (n - k) as f64 - 2.0);
            }
            if p <= 0.0 {
                return Err(CssError::DivergentIntegrand(format!("tube share exponent {p}")));
            }
            (1e-12f64).powf(1.0 / p).clamp(1e-280, 1e-14)
        }
        _ => 1e-14,
    };
    SphereQuad::adapted_with_depth(coeff, degree, depth)
}

/// u = |x|^{σ⁺−γ'}|x_J|^{γ'}, the homogeneous solution for a single
/// cylindrical term α/|θ_J|² with J = {1..k}.
pub fn homogeneous_cylindrical(n: usize, k: usize, alpha: f64) -> Result<crate::field::FnField> {
    let cf = crate::spectrum::mu1_closed_form_cylindrical(n, k, alpha)?;
    let (sigma, _) = crate::spectrum::gamma_exponent(n, cf.mu1)?;
    let gp = cf.gamma_prime;
    Ok(crate::field::FnField::new(n, move |x| {
        let rho2: f64 = x[..k].iter().map(|v| v * v).sum();
        norm(x).powf(sigma - gp) * rho2.powf(gp / 2.0)
    })
    .with_gradient(move |x| {
        let rho2: f64 = x[..k].iter().map(|v| v * v).sum();
        let r = norm(x);
        let a = r.powf(sigma - gp);
        let b = rho2.powf(gp / 2.0);
        (0..x.len())
            .map(|i| {
                let da = (sigma - gp) * r.powf(sigma - gp - 2.0) * x[i];
                let db = if i < k { gp * rho2.powf(gp / 2.0 - 1.0) * x[i] } else { 0.0 };
                da * b + a * db
            })
            .collect()
    }))
}

/// u = |x_J|^{γ'}(1+|x|²) for a single cylindrical term α/|θ_J|², with the
/// radial h(r) = −2(N+2γ')/(1+r²) that makes it an exact solution.
pub fn manufactured_cylindrical(n: usize, k: usize, alpha: f64, degree: usize) -> Result<(Problem, Arc<dyn Field>)> {
    let coeff = AngularCoefficient::cylindrical(n, k, alpha)?;
    let gp = crate::spectrum::mu1_closed_form_cylindrical(n, k, alpha)?.gamma_prime;
    let c = -2.0 * (n as f64 + 2.0 * gp);
    let h = PerturbationH::radial_fn(
        move |r| c / (1.0 + r * r),
        move |r| -2.0 * c * r * r / (1.0 + r * r).powi(2),
        c.abs() * 3.0,
        0.5,
        "manufactured",
    );
    let mut pb = Problem::new(coeff, h, NonlinearityF::zero(), degree)?;
    pb.quad = Arc::new(energy_quadrature(&pb.coeff, degree)?);
    let u = crate::field::FnField::new(n, move |x| {
        let rho2: f64 = x[..k].iter().map(|v| v * v).sum();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        rho2.powf(gp / 2.0) * (1.0 + r2)
    })
    .with_gradient(move |x| {
            let rho2: f64 = x[..k].iter().map(|v| v * v).sum();
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let p = rho2.powf(gp / 2.0);
            (0..x.len())
                .map(|i| {
                    let radial = p * 2.0 * x[i];
                    if i < k {
                        radial + gp * rho2.powf(gp / 2.0 - 1.0) * x[i] * (1.0 + r2)
                    } else {
                        radial
                    }
                })
                .collect()
    });
    Ok((pb, Arc::new(u)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(coeff: &AngularCoefficient) -> HardyConstants {
        HardyConstants::compute(coeff, true).unwrap()
    }

    #[test]
    fn moments_match_quadrature() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let q = SphereQuad::adapted_with_depth(&coeff, 8, 1e-14).unwrap();
        for p in [0.0, 1.0, -0.5, -1.5] {
            let num = q.integrate(|th| (th[0] * th[0] + th[1] * th[1] + th[2] * th[2]).powf(p / 2.0));
            assert!((num - cyl_moment(5, 3, p)).abs() < 1e-10 * num, "p={p}");
        }
        assert!((cyl_moment(5, 3, 0.0) - sphere_area(5)).abs() < 1e-12);
    }

    #[test]
    fn cylindrical_near_optimizer_is_sharp() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let c = consts(&coeff);
        let term = coeff.active_terms()[0].clone();
        let mut prev = f64::INFINITY;
        for t in [0.1, 0.01, 1e-3, 1e-5] {
            let fam = vec![family_near_optimizer(&term, t)];
            let rep = verify_hardy(HardyKind::Cylindrical, &coeff, &fam, 1.0, &c, 1.0).unwrap();
            assert!(rep.pass && rep.worst_quotient < prev);
            prev = rep.worst_quotient;
        }
        assert!((prev - 0.25).abs() < 0.05 * 0.25);
        let fam = vec![family_near_optimizer(&term, 1e-5)];
        let rep = verify_hardy(HardyKind::Cylindrical, &coeff, &fam, 1.0, &c, 1.0 + 1e-3).unwrap();
        assert!(!rep.pass, "{rep:?}");
    }

    #[test]
    fn two_body_near_optimizer_is_sharp() {
        let coeff = AngularCoefficient::two_body(6, 3, 0.05).unwrap();
        let c = consts(&coeff);
        let term = coeff.active_terms()[0].clone();
        let rep = verify_hardy(HardyKind::TwoBody, &coeff, &[family_near_optimizer(&term, 1e-5)], 1.0, &c, 1.0).unwrap();
        assert!(rep.pass && rep.margin < 1e-3, "{rep:?}");
        let rep = verify_hardy(HardyKind::TwoBody, &coeff, &[family_near_optimizer(&term, 1e-5)], 1.0, &c, 1.0 + 1e-3).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn zero_function_passes() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let c = consts(&coeff);
        let rep = verify_hardy(HardyKind::Cylindrical, &coeff, &[zero_function(5)], 1.0, &c, 1.0).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn boundary_constant_function() {
        // u = 1 on B_1: only the boundary term on the left
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let c = consts(&coeff);
        let f = TestFunction {
            radial: RadialFactor::Poly(vec![1.0]),
            angular: AngularFactor::CylPower { j: vec![0, 1, 2], s: 0.0 },
            label: "one".into(),
        };
        let rep = verify_hardy(HardyKind::Boundary, &coeff, &[f], 1.0, &c, 1.0).unwrap();
        let lhs = 1.5 * sphere_area(5);
        let rhs = cyl_moment(5, 3, -2.0) / 3.0;
        assert!((rep.worst_quotient - lhs / rhs).abs() < 1e-9 * lhs / rhs);
        assert!(rep.pass && rep.margin > 0.0);
    }

    #[test]
    fn all_kinds_hold_on_families() {
        let coeff = AngularCoefficient::cylindrical(6, 3, 0.15).unwrap();
        let c = consts(&coeff);
        let dec = assemble_spectrum(&coeff, 4, 8).unwrap();
        for ball in [false, true] {
            let kinds: Vec<HardyKind> = HardyKind::ALL.into_iter().filter(|k| k.on_ball() == ball).collect();
            let mut fam = family_harmonics(6, 2, ball);
            fam.extend(family_random_modal(&dec, 20, 5, ball));
            for rep in verify_hardy_many(&kinds, &coeff, &fam, 1.0, &c, 1.0).unwrap() {
                assert!(rep.pass, "{rep:?}");
            }
        }
    }

    #[test]
    fn sobolev_constant_requires_estimate() {
        let coeff = AngularCoefficient::cylindrical(5, 3, 0.1).unwrap();
        let mut c = consts(&coeff);
        c.s_tilde = None;
        let r = verify_hardy(HardyKind::HardySobolevBoundary, &coeff, &family_harmonics(5, 1, true), 1.0, &c, 1.0);
        assert!(matches!(r, Err(CssError::UnknownConstant(_))));
        let e = estimate_s_tilde(5);
        let omega: f64 = sphere_area(5) / 5.0;
        assert!(e.value <= omega.powf(0.4) + 1e-12);
    }

    #[test]
    fn pohozaev_homogeneous() {
        // 3/16 has a stronger cone singularity: the rule must reach deeper
        for alpha in [0.1, 3.0 / 16.0] {
            let (n, k) = (5, 3);
            let coeff = AngularCoefficient::cylindrical(n, k, alpha).unwrap();
            let mut pb = Problem::unperturbed(coeff, 6).unwrap();
            pb.quad = Arc::new(energy_quadrature(&pb.coeff, 6).unwrap());
            let u = homogeneous_cylindrical(n, k, alpha).unwrap();
            for r in [0.5, 0.7] {
                let rep = verify_pohozaev(&u, &pb, None, r).unwrap();
                assert!(rep.poho < 1e-8 && rep.energy < 1e-8 && rep.poho_hx < 1e-8, "{alpha} {rep:?}");
                assert!(rep.pde_residual.unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn pohozaev_manufactured() {
        let (pb, u) = manufactured_cylindrical(5, 3, 3.0 / 16.0, 6).unwrap();
        let rep = verify_pohozaev(&*u, &pb, None, 0.5).unwrap();
        assert!(rep.poho < 1e-6 && rep.energy < 1e-6 && rep.poho_hx < 1e-6, "{rep:?}");
        // not a solution once h is dropped
        let mut bad = pb.clone();
        bad.h = PerturbationH::zero();
        assert!(matches!(verify_pohozaev(&*u, &bad, None, 0.5), Err(CssError::NotASolution(_))));
    }

    #[test]
    fn pohozaev_bounded_coefficient() {
        // bounded angular b, polynomial so the sphere rule is exact; q absorbs the rest
        let n = 4;
        let coeff = AngularCoefficient::cylindrical(n, 3, 0.2).unwrap();
        let b = Arc::new(|th: &[f64]| 0.3 + 0.2 * th[0] * th[0]);
        let uval = |x: &[f64]| 1.0 + x[0] + x.iter().map(|v| v * v).sum::<f64>();
        let x_du = |x: &[f64]| x[0] + 2.0 * x.iter().map(|v| v * v).sum::<f64>();
        let hf = |r: f64| 1.0 / (1.0 + r * r);
        let rdh = |r: f64| -2.0 * r * r / (1.0 + r * r).powi(2);
        let nf = n as f64;
        let (b1, b2) = (b.clone(), b.clone());
        let q = move |x: &[f64]| {
            let r = norm(x);
            let th: Vec<f64> = x.iter().map(|v| v / r).collect();
            -2.0 * nf - b1(&th) * uval(x) / (r * r) - hf(r) * uval(x)
        };
        let q1 = q.clone();
        let x_dq = move |x: &[f64]| {
            let r = norm(x);
            let th: Vec<f64> = x.iter().map(|v| v / r).collect();
            let (u, xd) = (uval(x), x_du(x));
            -b2(&th) * (xd - 2.0 * u) / (r * r) - rdh(r) * u - hf(r) * xd
        };
        let f = NonlinearityF {
            f: Arc::new(move |x, _| q(x)),
            big_f: Arc::new(move |x, s| q1(x) * s),
            f_s: Arc::new(|_, _| 0.0),
            gradx_f_dot_x: Arc::new(move |x, s| s * x_dq(x)),
            c_f: 0.0,
            label: "source".into(),
        };
        let h = PerturbationH::radial_fn(hf, rdh, 3.0, 0.5, "bounded");
        let mut pb = Problem::new(coeff, h, f, 6).unwrap();
        pb.quad = Arc::new(SphereQuad::plain(n, 12));
        let u = crate::field::FnField::new(n, uval).with_gradient(|x: &[f64]| {
            let mut g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            g[0] += 1.0;
            g
        });
        let pot: &dyn Fn(&[f64]) -> f64 = &*b;
        let rep = verify_pohozaev(&u, &pb, Some(pot), 0.6).unwrap();
        assert!(rep.poho_hx < 1e-6 && rep.energy < 1e-6 && rep.poho < 1e-6, "{rep:?}");
    }
}
