//! Rayleigh–Ritz on the sphere with a Jastrow-factored polynomial basis
//! ψ = F·p, F = Π_t d_t^{s_t}, where s_t is the regular Frobenius exponent of
//! term t. The factor carries the singular behaviour at Σ so polynomial
//! degree only has to resolve the smooth part.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{build_levels, frame, spectral_floor, AngularMode, EigenDecomposition, Eigenpair};
use crate::error::{CssError, Result};
use crate::numerics::gauss::{gauss_jacobi, ln_gamma_fn};
use crate::numerics::sphere::SphereRule;
use crate::potential::{AngularCoefficient, Term};

#[derive(Debug, Clone)]
pub struct GalerkinOptions {
    pub degree: u32,
    pub count: usize,
    /// restrict to the subspace invariant under the sign flips that preserve a
    pub symmetric: bool,
    /// use product quadrature even when closed-form moments are available
    pub force_quadrature: bool,
    /// extra nodes per direction for the product rules
    pub quad_boost: usize,
}

impl GalerkinOptions {
    pub fn new(degree: u32, count: usize) -> Self {
        Self { degree, count, symmetric: true, force_quadrature: false, quad_boost: 0 }
    }
}

#[derive(Debug)]
pub struct GalerkinBasis {
    n: usize,
    /// working coordinates w = Qθ (row-major), identity when None
    q: Option<Vec<f64>>,
    /// terms in working coordinates with their exponents (F_t = d2_t^{s_t/2})
    terms: Vec<(Term, f64)>,
    exps: Vec<Vec<u32>>,
}

impl GalerkinBasis {
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn to_work(&self, x: &[f64]) -> Vec<f64> {
        match &self.q {
            None => x.to_vec(),
            Some(q) => (0..self.n).map(|i| (0..self.n).map(|j| q[i * self.n + j] * x[j]).sum()).collect(),
        }
    }

    fn from_work(&self, g: &[f64]) -> Vec<f64> {
        match &self.q {
            None => g.to_vec(),
            Some(q) => (0..self.n).map(|j| (0..self.n).map(|i| q[i * self.n + j] * g[i]).sum()).collect(),
        }
    }

    /// F and ∇F at w (ambient gradient).
    fn jastrow(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 1.0;
        let mut glog = vec![0.0; self.n];
        for (t, s) in &self.terms {
            if *s == 0.0 {
                continue;
            }
            let d2 = t.d2(w);
            f *= d2.powf(0.5 * s);
            for (g, d) in glog.iter_mut().zip(t.grad_d2(w)) {
                *g += 0.5 * s * d / d2;
            }
        }
        let grad = glog.iter().map(|g| g * f).collect();
        (f, grad)
    }

    /// Values p_i(w) and ambient gradients ∇p_i(w).
    fn monomials(&self, w: &[f64], want_grad: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let maxd = self.exps.iter().flat_map(|e| e.iter()).copied().max().unwrap_or(0) as usize;
        let pw: Vec<Vec<f64>> = w
            .iter()
            .map(|&x| {
                let mut v = vec![1.0; maxd + 1];
                for p in 1..=maxd {
                    v[p] = v[p - 1] * x;
                }
                v
            })
            .collect();
        let vals: Vec<f64> = self.exps.iter().map(|e| (0..n).map(|d| pw[d][e[d] as usize]).product()).collect();
        if !want_grad {
            return (vals, vec![]);
        }
        let grads = self
            .exps
            .iter()
            .map(|e| {
                (0..n)
                    .map(|d| {
                        if e[d] == 0 {
                            return 0.0;
                        }
                        let mut p = e[d] as f64 * pw[d][e[d] as usize - 1];
                        for d2 in 0..n {
                            if d2 != d {
                                p *= pw[d2][e[d2] as usize];
                            }
                        }
                        p
                    })
                    .collect()
            })
            .collect();
        (vals, grads)
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinMode {
    pub basis: Arc<GalerkinBasis>,
    pub coef: Vec<f64>,
}

impl GalerkinMode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = crate::numerics::norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        let w = self.basis.to_work(&th);
        let (f, _) = self.basis.jastrow(&w);
        let (p, _) = self.basis.monomials(&w, false);
        f * p.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Gradient of the degree-0 homogeneous extension.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::numerics::norm(x);
        let th: Vec<f64> = x.iter().map(|v| v / r).collect();
        let w = self.basis.to_work(&th);
        let (f, gf) = self.basis.jastrow(&w);
        let (p, gp) = self.basis.monomials(&w, true);
        let pv: f64 = p.iter().zip(&self.coef).map(|(a, b)| a * b).sum();
        let mut g = vec![0.0; self.basis.n];
        for (i, c) in self.coef.iter().enumerate() {
            for d in 0..self.basis.n {
                g[d] += c * gp[i][d];
            }
        }
        let mut amb: Vec<f64> = (0..self.basis.n).map(|d| f * g[d] + pv * gf[d]).collect();
        let radial: f64 = amb.iter().zip(&w).map(|(a, b)| a * b).sum();
        for (a, b) in amb.iter_mut().zip(&w) {
            *a = (*a - radial * b) / r;
        }
        self.basis.from_work(&amb)
    }
}

fn frobenius(k: usize, alpha_eff: f64) -> Result<f64> {
    let h = (k as f64 - 2.0) / 2.0;
    let disc = h * h - alpha_eff;
    if disc <= 0.0 {
        return Err(CssError::SupercriticalAlpha { alpha: alpha_eff, critical: h * h });
    }
    Ok(-h + disc.sqrt())
}

/// Sign-flip classes: coordinates linked by a pair term flip together.
fn parity_classes(n: usize, terms: &[(Term, f64)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for (t, _) in terms {
        if let Term::Pair { j1, j2, .. } = t {
            for (&a, &b) in j1.iter().zip(j2) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Monomials of degree ≤ L with last exponent ≤ 1 (a basis of polynomials
/// restricted to the sphere), optionally invariant under the class flips.
fn basis_exponents(n: usize, degree: u32, classes: Option<&[usize]>) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        for e in crate::numerics::poly::exponents(n, d) {
            if e[n - 1] > 1 {
                continue;
            }
            if let Some(c) = classes {
                let ok = (0..n).all(|root| {
                    let s: u32 = (0..n).filter(|&i| c[i] == root).map(|i| e[i]).sum();
                    s % 2 == 0
                });
                if !ok {
                    continue;
                }
            }
            out.push(e);
        }
    }
    out
}

struct Matrices {
    m: DMatrix<f64>,
    /// ∫∇(Fp_i)·∇(Fp_j) − a F² p_i p_j
    h: DMatrix<f64>,
}

/// ∫_S |w_B|^{2s} w^e dS, B the first `k` coordinates.
fn moment(e: &[u32], k: usize, s: f64) -> f64 {
    if e.iter().any(|v| v % 2 == 1) {
        return 0.0;
    }
    let n = e.len();
    let eb: u32 = e[..k].iter().sum();
    let et: u32 = e.iter().sum();
    let mut l = std::f64::consts::LN_2;
    for &v in e {
        l += ln_gamma_fn((v as f64 + 1.0) / 2.0);
    }
    l += ln_gamma_fn((2.0 * s + eb as f64 + k as f64) / 2.0) - ln_gamma_fn((eb as f64 + k as f64) / 2.0);
    l -= ln_gamma_fn((2.0 * s + et as f64 + n as f64) / 2.0);
    l.exp()
}

fn exact_matrices(basis: &GalerkinBasis, k: usize, s: f64) -> Matrices {
    let n = basis.n;
    let nb = basis.len();
    let mut cache: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut mom = |e: Vec<u32>| -> f64 { *cache.entry(e.clone()).or_insert_with(|| moment(&e, k, s)) };
    let mut m = DMatrix::zeros(nb, nb);
    let mut kk = DMatrix::zeros(nb, nb);
    for i in 0..nb {
        for j in 0..=i {
            let ei = &basis.exps[i];
            let ej = &basis.exps[j];
            let sum: Vec<u32> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
            let mij = mom(sum.clone());
            let di: u32 = ei.iter().sum();
            let dj: u32 = ej.iter().sum();
            let mut kij = -(di as f64) * (dj as f64) * mij;
            for d in 0..n {
                if ei[d] > 0 && ej[d] > 0 {
                    let mut e = sum.clone();
                    e[d] -= 2;
                    kij += (ei[d] * ej[d]) as f64 * mom(e);
                }
            }
            m[(i, j)] = mij;
            m[(j, i)] = mij;
            kk[(i, j)] = kij;
            kk[(j, i)] = kij;
        }
    }
    // −Δ_S F − aF = s(s+N−2)F for a single term
    let e0 = s * (s + n as f64 - 2.0);
    let h = &kk + &m * e0;
    Matrices { m, h }
}

/// Product rule adapted to term t: θ = P_tᵀ(sin φ ω₁, cos φ ω₂) with the
/// singular power sin^{2s_t−2}φ folded into a Gauss–Jacobi rule in cos 2φ.
/// Returns (points, weights) where weights already divide out that power.
fn term_rule(n: usize, t: &Term, s: f64, degree: u32, boost: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = t.block().len();
    let m = n - k;
    let p = 2.0 * s - 2.0;
    let big_a = k as f64 - 1.0 + p;
    let big_b = m as f64 - 1.0;
    let nu = degree as usize + 8 + boost;
    let ru = gauss_jacobi(nu, (big_a - 1.0) / 2.0, (big_b - 1.0) / 2.0);
    let fac = 2f64.powf(-(big_a + big_b) / 2.0 - 1.0);
    let sdeg = 2 * degree as usize + 8 + 2 * boost;
    let r1 = SphereRule::new(k, sdeg);
    let r2 = SphereRule::new(m, sdeg);
    let pt = frame(n, t);
    let mut pts = Vec::with_capacity(ru.len() * r1.len() * r2.len());
    let mut wts = Vec::with_capacity(pts.capacity());
    let mut z = vec![0.0; n];
    for (u, wu) in ru.nodes.iter().zip(&ru.weights) {
        let sn = ((1.0 - u) / 2.0).sqrt();
        let cs = ((1.0 + u) / 2.0).sqrt();
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
                let th: Vec<f64> = (0..n).map(|j| (0..n).map(|i| pt[i * n + j] * z[i]).sum()).collect();
                pts.push(th);
                wts.push(wu * fac * r1.weights[a] * r2.weights[b] / sn.powf(p));
            }
        }
    }
    (pts, wts)
}

fn quadrature_matrices(basis: &GalerkinBasis, coeff_terms: &[Term], opts: &GalerkinOptions) -> Result<Matrices> {
    let n = basis.n;
    let nb = basis.len();
    let mut m = DMatrix::zeros(nb, nb);
    let mut kk = DMatrix::zeros(nb, nb);
    let mut aa = DMatrix::zeros(nb, nb);
    let chunk = 2048;
    for (ti, (t, s)) in basis.terms.iter().enumerate() {
        let (pts, wts) = term_rule(n, t, *s, opts.degree, opts.quad_boost);
        for (cp, cw) in pts.chunks(chunk).zip(wts.chunks(chunk)) {
            let c = cp.len();
            let mut xm = DMatrix::zeros(c, nb);
            let mut xa = DMatrix::zeros(c, nb);
            let mut xg: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::zeros(c, nb)).collect();
            for (row, (th, &w)) in cp.iter().zip(cw).enumerate() {
                // partition of unity over the singular sets
                let dt = basis.terms[ti].0.d2(th);
                let mut denom = 0.0;
                for (u, _) in &basis.terms {
                    denom += (dt / u.d2(th)).powi(4);
                }
                let chi = 1.0 / denom;
                let weight = w * chi;
                if !(weight.is_finite()) {
                    return Err(CssError::QuadratureFailure(format!("non-finite weight at {th:?}")));
                }
                if weight == 0.0 {
                    continue;
                }
                let sw = weight.sqrt();
                let (f, gf) = basis.jastrow(th);
                let (p, gp) = basis.monomials(th, true);
                let a: f64 = coeff_terms.iter().map(|t| t.alpha() / t.d2(th)).sum();
                for i in 0..nb {
                    let v = sw * f * p[i];
                    xm[(row, i)] = v;
                    xa[(row, i)] = a * v;
                    let amb: Vec<f64> = (0..n).map(|d| f * gp[i][d] + p[i] * gf[d]).collect();
                    let rad: f64 = amb.iter().zip(th.iter()).map(|(x, y)| x * y).sum();
                    for d in 0..n {
                        xg[d][(row, i)] = sw * (amb[d] - rad * th[d]);
                    }
                }
            }
            m.gemm_tr(1.0, &xm, &xm, 1.0);
            aa.gemm_tr(1.0, &xa, &xm, 1.0);
            for g in &xg {
                kk.gemm_tr(1.0, g, g, 1.0);
            }
        }
    }
    let aa = (&aa + aa.transpose()) * 0.5;
    let h = &kk - &aa;
    Ok(Matrices { m, h })
}

/// Partition-of-unity rule over all active terms: each term's Jacobi-weighted
/// product rule, cut down by χ_t = 1/Σ_u (d_t²/d_u²)⁴.
pub(crate) fn partition_rule(coeff: &AngularCoefficient, degree: u32, boost: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = coeff.dim();
    let k = coeff.block();
    let active = coeff.active_terms();
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for t in &active {
        let s = frobenius(k, t.effective_alpha())?;
        let (tp, tw) = term_rule(n, t, s, degree, boost);
        for (th, w) in tp.into_iter().zip(tw) {
            let dt = t.d2(&th);
            let denom: f64 = active.iter().map(|u| (dt / u.d2(&th)).powi(4)).sum();
            let weight = w / denom;
            if !weight.is_finite() {
                return Err(CssError::QuadratureFailure(format!("non-finite weight at {th:?}")));
            }
            if weight != 0.0 {
                pts.push(th);
                wts.push(weight);
            }
        }
    }
    Ok((pts, wts))
}

struct Setup {
    basis: Arc<GalerkinBasis>,
    exact: Option<(usize, f64)>,
    coeff_terms: Vec<Term>,
}

fn setup(coeff: &AngularCoefficient, opts: &GalerkinOptions) -> Result<Setup> {
    let n = coeff.dim();
    if n > 6 {
        return Err(CssError::InvalidCoefficient(format!("Rayleigh–Ritz path supports N ≤ 6, got N = {n}")));
    }
    let active = coeff.active_terms();
    let k = coeff.block();
    if active.len() <= 1 && !opts.force_quadrature {
        let (q, s) = match active.first() {
            None => (None, 0.0),
            Some(t) if k == n => {
                let _ = t;
                (None, 0.0)
            }
            Some(t) => (Some(frame(n, t)), frobenius(k, t.effective_alpha())?),
        };
        let classes: Vec<usize> = (0..n).collect();
        let exps = basis_exponents(n, opts.degree, opts.symmetric.then_some(&classes[..]));
        let terms = if s != 0.0 { vec![(Term::Cyl { j: (0..k).collect(), alpha: active[0].effective_alpha() }, s)] } else { vec![] };
        let coeff_terms = terms.iter().map(|(t, _)| t.clone()).collect();
        return Ok(Setup { basis: Arc::new(GalerkinBasis { n, q, terms, exps }), exact: Some((k.min(n), s)), coeff_terms });
    }
    if active.iter().any(|t| t.block().len() == n) {
        return Err(CssError::InvalidCoefficient("constant term mixed with singular terms".into()));
    }
    let mut terms = Vec::new();
    for t in &active {
        terms.push((t.clone(), frobenius(k, t.effective_alpha())?));
    }
    let classes = parity_classes(n, &terms);
    let exps = basis_exponents(n, opts.degree, opts.symmetric.then_some(&classes[..]));
    Ok(Setup { basis: Arc::new(GalerkinBasis { n, q: None, terms, exps }), exact: None, coeff_terms: active })
}

fn matrices(st: &Setup, opts: &GalerkinOptions) -> Result<Matrices> {
    match st.exact {
        Some((k, s)) => Ok(exact_matrices(&st.basis, k, s)),
        None => quadrature_matrices(&st.basis, &st.coeff_terms, opts),
    }
}

/// Generalized symmetric eigenproblem H c = μ M c by canonical
/// orthogonalization; returns eigenvalues ascending and M-orthonormal vectors.
fn gen_eigen(h: &DMatrix<f64>, m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    // diagonal scaling first, then drop near-null directions of M
    let nb = m.nrows();
    let dsc: Vec<f64> = (0..nb).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    let ms = DMatrix::from_fn(nb, nb, |i, j| m[(i, j)] * dsc[i] * dsc[j]);
    let hs = DMatrix::from_fn(nb, nb, |i, j| h[(i, j)] * dsc[i] * dsc[j]);
    let em = SymmetricEigen::new(ms);
    let top = em.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..nb).filter(|&i| em.eigenvalues[i] > 1e-13 * top).collect();
    let t = DMatrix::from_fn(nb, keep.len(), |i, c| em.eigenvectors[(i, keep[c])] / em.eigenvalues[keep[c]].sqrt());
    let hr = t.transpose() * &hs * &t;
    let hr = (&hr + hr.transpose()) * 0.5;
    let eh = SymmetricEigen::new(hr);
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| eh.eigenvalues[a].partial_cmp(&eh.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eh.eigenvalues[i]).collect();
    let vecs_scaled = &t * eh.eigenvectors.select_columns(&order);
    let vecs = DMatrix::from_fn(nb, order.len(), |i, c| vecs_scaled[(i, c)] * dsc[i]);
    (vals, vecs)
}

pub fn solve_general_galerkin(coeff: &AngularCoefficient, degree: u32, count: usize) -> Result<EigenDecomposition> {
    solve_general_galerkin_with(coeff, &GalerkinOptions::new(degree, count))
}

pub fn solve_general_galerkin_with(coeff: &AngularCoefficient, opts: &GalerkinOptions) -> Result<EigenDecomposition> {
    let n = coeff.dim();
    let st = setup(coeff, opts)?;
    let mats = matrices(&st, opts)?;
    let (vals, vecs) = gen_eigen(&mats.h, &mats.m);
    let mut raw = Vec::new();
    for (c, &mu) in vals.iter().enumerate() {
        let mut coef: Vec<f64> = vecs.column(c).iter().cloned().collect();
        // sign: positive mean, else positive at the point farthest from Σ
        let mean: f64 = coef.iter().enumerate().map(|(i, v)| v * mats.m.row(i).iter().zip(&st.basis.exps).filter(|(_, e)| e.iter().all(|&x| x == 0)).map(|(m, _)| *m).sum::<f64>()).sum();
        let flip = if mean.abs() > 1e-10 {
            mean < 0.0
        } else {
            let mode = GalerkinMode { basis: st.basis.clone(), coef: coef.clone() };
            let mut far = vec![0.0; n];
            far[n - 1] = 1.0;
            mode.eval(&far) < 0.0
        };
        if flip {
            coef.iter_mut().for_each(|v| *v = -*v);
        }
        raw.push(Eigenpair { mu, mode: AngularMode::Galerkin(GalerkinMode { basis: st.basis.clone(), coef }) });
    }
    if raw.is_empty() {
        return Err(CssError::TruncationInsufficient(opts.degree as usize));
    }
    if raw[0].mu < spectral_floor(n) {
        return Err(CssError::IndefiniteOperator { mu1: raw[0].mu, floor: spectral_floor(n) });
    }
    let d = build_levels(n, raw, opts.count, "galerkin")?;
    if d.levels.len() < opts.count {
        return Err(CssError::TruncationInsufficient(opts.degree as usize));
    }
    Ok(d)
}

/// Lowest Rayleigh–Ritz eigenvalue only.
pub fn galerkin_mu1(coeff: &AngularCoefficient, opts: &GalerkinOptions) -> Result<f64> {
    let st = setup(coeff, opts)?;
    let mats = matrices(&st, opts)?;
    Ok(gen_eigen(&mats.h, &mats.m).0[0])
}

/// Λ(a) for a general coefficient: Λ ≥ t ⇔ μ₁(a/t) ≤ −((N−2)/2)², located by
/// safeguarded regula falsi; Λ is at least the largest local Hardy ratio.
pub fn lambda_general(coeff: &AngularCoefficient, degree: u32) -> Result<f64> {
    let n = coeff.dim();
    let k = coeff.block() as f64;
    let c0 = -spectral_floor(n);
    let local = coeff
        .active_terms()
        .iter()
        .map(|t| t.effective_alpha().max(0.0) * (2.0 / (k - 2.0)).powi(2))
        .fold(0.0, f64::max);
    let opts = GalerkinOptions::new(degree, 1);
    let g = |t: f64| -> Result<f64> { Ok(galerkin_mu1(&coeff.scaled(1.0 / t), &opts)? + c0) };
    let mut lo = local * (1.0 + 1e-6);
    if lo == 0.0 {
        lo = 1e-8;
    }
    let mut glo = g(lo)?;
    if glo > 0.0 {
        return Ok(local);
    }
    let mut hi = coeff.lambda_upper_bound().max(lo) * 2.0 + 1.0;
    let mut ghi = g(hi)?;
    while ghi <= 0.0 {
        hi *= 2.0;
        ghi = g(hi)?;
    }
    let mut side = 0i32;
    for _ in 0..60 {
        let mid = (lo * ghi - hi * glo) / (ghi - glo);
        let gm = g(mid)?;
        if gm <= 0.0 {
            lo = mid;
            glo = gm;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            ghi = gm;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if hi - lo < 1e-9 * hi {
            break;
        }
    }
    Ok(lo)
}
