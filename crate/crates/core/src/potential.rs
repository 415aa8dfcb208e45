//! The potential class: angular coefficients built from cylindrical terms
//! α_J/|x_J|² and pair terms α/|x_{J1}-x_{J2}|², their regularizations, and the
//! admissible perturbations h and f.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CssError, Result};
use crate::numerics::{binomial, norm, two_star};

/// Distance below which a point is treated as lying on the singular set.
pub const SINGULAR_CUTOFF: f64 = 1e-14;
const UNIT_TOL: f64 = 1e-9;

/// Strictly increasing k-subset of {1..N}, stored 1-based as in the JSON schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: &[usize], n: usize, k: usize) -> Result<Self> {
        if entries.len() != k {
            return Err(CssError::InvalidCoefficient(format!(
                "index set {entries:?} has length {} but k = {k}",
                entries.len()
            )));
        }
        if entries.iter().any(|&e| e < 1 || e > n) {
            return Err(CssError::InvalidCoefficient(format!(
                "index set {entries:?} leaves the range 1..={n}"
            )));
        }
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CssError::InvalidCoefficient(format!(
                "index set {entries:?} is not strictly increasing"
            )));
        }
        Ok(Self(entries.to_vec()))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|e| e - 1).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairIndex {
    first: MultiIndex,
    second: MultiIndex,
}

impl PairIndex {
    pub fn new(first: MultiIndex, second: MultiIndex) -> Result<Self> {
        if first.0.iter().any(|e| second.0.contains(e)) {
            return Err(CssError::InvalidCoefficient(format!(
                "pair ({first}, {second}) is not disjoint"
            )));
        }
        if first >= second {
            return Err(CssError::InvalidCoefficient(format!(
                "pair ({first}, {second}) violates J1 < J2"
            )));
        }
        Ok(Self { first, second })
    }

    pub fn first(&self) -> &MultiIndex {
        &self.first
    }

    pub fn second(&self) -> &MultiIndex {
        &self.second
    }
}

/// One singular term, indices 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Cyl { j: Vec<usize>, alpha: f64 },
    Pair { j1: Vec<usize>, j2: Vec<usize>, alpha: f64 },
}

impl Term {
    pub fn alpha(&self) -> f64 {
        match self {
            Term::Cyl { alpha, .. } | Term::Pair { alpha, .. } => *alpha,
        }
    }

    /// |x_J|² or |x_{J1} - x_{J2}|².
    pub fn d2(&self, x: &[f64]) -> f64 {
        match self {
            Term::Cyl { j, .. } => j.iter().map(|&i| x[i] * x[i]).sum(),
            Term::Pair { j1, j2, .. } => j1.iter().zip(j2).map(|(&a, &b)| (x[a] - x[b]).powi(2)).sum(),
        }
    }

    /// ∇ of d2 at x.
    pub fn grad_d2(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            Term::Cyl { j, .. } => {
                for &i in j {
                    g[i] = 2.0 * x[i];
                }
            }
            Term::Pair { j1, j2, .. } => {
                for (&a, &b) in j1.iter().zip(j2) {
                    g[a] = 2.0 * (x[a] - x[b]);
                    g[b] = -2.0 * (x[a] - x[b]);
                }
            }
        }
        g
    }

    /// Distance-like quantity vanishing exactly on the term's singular set:
    /// |θ_J| or |θ_{J1}-θ_{J2}|/√2.
    pub fn dist(&self, x: &[f64]) -> f64 {
        match self {
            Term::Cyl { .. } => self.d2(x).sqrt(),
            Term::Pair { .. } => (0.5 * self.d2(x)).sqrt(),
        }
    }

    /// Factor c with d2 = c·|Qx restricted to the singular block|²: 1 for
    /// cylindrical terms, 2 for pairs.
    pub fn d2_scale(&self) -> f64 {
        match self {
            Term::Cyl { .. } => 1.0,
            Term::Pair { .. } => 2.0,
        }
    }

    /// Coefficient of the equivalent cylindrical term after the pair rotation.
    pub fn effective_alpha(&self) -> f64 {
        self.alpha() / self.d2_scale()
    }

    pub fn block(&self) -> &[usize] {
        match self {
            Term::Cyl { j, .. } => j,
            Term::Pair { j1, .. } => j1,
        }
    }

    pub fn involves(&self, i: usize) -> bool {
        match self {
            Term::Cyl { j, .. } => j.contains(&i),
            Term::Pair { j1, j2, .. } => j1.contains(&i) || j2.contains(&i),
        }
    }

    /// Orthogonal matrix Q (row-major N×N) such that d2(x) = d2_scale·|(Qx)_J|²
    /// where J = self.block(). Identity for cylindrical terms; for pairs the
    /// change of variables z1 = (y1-y2)/√2, z2 = (y1+y2)/√2.
    pub fn rotation(&self, n: usize) -> Vec<f64> {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        if let Term::Pair { j1, j2, .. } = self {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for (&a, &b) in j1.iter().zip(j2) {
                q[a * n + a] = s;
                q[a * n + b] = -s;
                q[b * n + a] = s;
                q[b * n + b] = s;
            }
        }
        q
    }
}

/// a(θ) = Σ α_J/|θ_J|² + Σ α_{J1J2}/|θ_{J1}-θ_{J2}|².
#[derive(Debug, Clone, PartialEq)]
pub struct AngularCoefficient {
    n: usize,
    k: usize,
    cyl: BTreeMap<MultiIndex, f64>,
    pairs: BTreeMap<PairIndex, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylJson {
    #[serde(rename = "J")]
    pub j: Vec<usize>,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairJson {
    #[serde(rename = "J1")]
    pub j1: Vec<usize>,
    #[serde(rename = "J2")]
    pub j2: Vec<usize>,
    pub alpha: f64,
}

/// Wire format of an angular coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub cyl: Vec<CylJson>,
    #[serde(default)]
    pub pairs: Vec<PairJson>,
}

impl AngularCoefficient {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 3 {
            return Err(CssError::InvalidCoefficient(format!("N = {n} must be at least 3")));
        }
        if k < 3 || k > n {
            return Err(CssError::InvalidCoefficient(format!("k = {k} must lie in [3, {n}]")));
        }
        Ok(Self { n, k, cyl: BTreeMap::new(), pairs: BTreeMap::new() })
    }

    pub fn with_cyl(mut self, j: &[usize], alpha: f64) -> Result<Self> {
        let idx = MultiIndex::new(j, self.n, self.k)?;
        if !alpha.is_finite() {
            return Err(CssError::InvalidCoefficient(format!("alpha for {idx} is not finite")));
        }
        if self.cyl.insert(idx.clone(), alpha).is_some() {
            return Err(CssError::InvalidCoefficient(format!("duplicate index set {idx}")));
        }
        Ok(self)
    }

    pub fn with_pair(mut self, j1: &[usize], j2: &[usize], alpha: f64) -> Result<Self> {
        if 2 * self.k > self.n {
            return Err(CssError::InvalidCoefficient(format!(
                "pair ({j1:?}, {j2:?}) requires 2k <= N"
            )));
        }
        let p = PairIndex::new(MultiIndex::new(j1, self.n, self.k)?, MultiIndex::new(j2, self.n, self.k)?)?;
        if !alpha.is_finite() {
            return Err(CssError::InvalidCoefficient(format!("alpha for pair {j1:?},{j2:?} is not finite")));
        }
        if self.pairs.insert(p, alpha).is_some() {
            return Err(CssError::InvalidCoefficient(format!("duplicate pair ({j1:?}, {j2:?})")));
        }
        Ok(self)
    }

    /// Single cylindrical term on J = {1..k}.
    pub fn cylindrical(n: usize, k: usize, alpha: f64) -> Result<Self> {
        let j: Vec<usize> = (1..=k).collect();
        Self::new(n, k)?.with_cyl(&j, alpha)
    }

    /// Single pair term J1 = {1..k}, J2 = {k+1..2k}.
    pub fn two_body(n: usize, k: usize, alpha: f64) -> Result<Self> {
        let j1: Vec<usize> = (1..=k).collect();
        let j2: Vec<usize> = (k + 1..=2 * k).collect();
        Self::new(n, k)?.with_pair(&j1, &j2, alpha)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn block(&self) -> usize {
        self.k
    }

    pub fn cyl_terms(&self) -> &BTreeMap<MultiIndex, f64> {
        &self.cyl
    }

    pub fn pair_terms(&self) -> &BTreeMap<PairIndex, f64> {
        &self.pairs
    }

    /// All terms in a fixed order: cylindrical (lexicographic) then pairs.
    pub fn terms(&self) -> Vec<Term> {
        let mut out: Vec<Term> = self
            .cyl
            .iter()
            .map(|(j, &alpha)| Term::Cyl { j: j.zero_based(), alpha })
            .collect();
        out.extend(self.pairs.iter().map(|(p, &alpha)| Term::Pair {
            j1: p.first.zero_based(),
            j2: p.second.zero_based(),
            alpha,
        }));
        out
    }

    /// Terms with nonzero coefficient.
    pub fn active_terms(&self) -> Vec<Term> {
        self.terms().into_iter().filter(|t| t.alpha() != 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.cyl.values().chain(self.pairs.values()).all(|&a| a == 0.0)
    }

    pub fn is_nonpositive(&self) -> bool {
        self.cyl.values().chain(self.pairs.values()).all(|&a| a <= 0.0)
    }

    pub fn validate_nonzero(&self) -> Result<()> {
        if self.is_zero() {
            return Err(CssError::InvalidCoefficient("all coefficients vanish (a ≡ 0)".into()));
        }
        Ok(())
    }

    fn check_unit(theta: &[f64]) -> Result<()> {
        let r = norm(theta);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(CssError::NotUnitVector(r));
        }
        Ok(())
    }

    /// min over active terms of |θ_J| and |θ_{J1}-θ_{J2}|/√2 (unnormalized input allowed).
    pub fn dist_to_singular(&self, theta: &[f64]) -> f64 {
        self.active_terms()
            .iter()
            .map(|t| t.dist(theta))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum without any checks; callers guarantee θ off Σ.
    pub fn eval_unchecked(&self, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for (j, &alpha) in &self.cyl {
            if alpha != 0.0 {
                let d2: f64 = j.0.iter().map(|&i| theta[i - 1] * theta[i - 1]).sum();
                s += alpha / d2;
            }
        }
        for (p, &alpha) in &self.pairs {
            if alpha != 0.0 {
                let d2: f64 = p
                    .first
                    .0
                    .iter()
                    .zip(&p.second.0)
                    .map(|(&a, &b)| (theta[a - 1] - theta[b - 1]).powi(2))
                    .sum();
                s += alpha / d2;
            }
        }
        s
    }

    pub fn eval_a(&self, theta: &[f64]) -> Result<f64> {
        Self::check_unit(theta)?;
        let d = self.dist_to_singular(theta);
        if d < SINGULAR_CUTOFF {
            return Err(CssError::SingularPoint(d));
        }
        Ok(self.eval_unchecked(theta))
    }

    /// Regularized coefficient: denominators d² + λ for λ > 0, plain a(θ) otherwise.
    pub fn eval_a_lambda(&self, theta: &[f64], lambda: f64) -> Result<f64> {
        if lambda <= 0.0 {
            return self.eval_a(theta);
        }
        Self::check_unit(theta)?;
        Ok(self.terms().iter().map(|t| t.alpha() / (t.d2(theta) + lambda)).sum())
    }

    /// Coefficient with every α replaced by its positive part.
    pub fn a_hat(&self) -> Self {
        let mut out = self.clone();
        out.cyl.values_mut().for_each(|a| *a = a.max(0.0));
        out.pairs.values_mut().for_each(|a| *a = a.max(0.0));
        out
    }

    /// Same index sets, every coefficient multiplied by s.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.cyl.values_mut().for_each(|a| *a *= s);
        out.pairs.values_mut().for_each(|a| *a *= s);
        out
    }

    /// V(x) = a(x/|x|)/|x|².
    pub fn eval_v(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if r < SINGULAR_CUTOFF {
            return Err(CssError::SingularPoint(r));
        }
        let d = self.dist_to_singular(x) / r;
        if d < SINGULAR_CUTOFF {
            return Err(CssError::SingularPoint(d));
        }
        Ok(self.eval_unchecked(x))
    }

    /// (2/(k-2))²·(Σ α_J⁺ + Σ α_{J1J2}⁺).
    pub fn lambda_upper_bound(&self) -> f64 {
        let s: f64 = self.cyl.values().chain(self.pairs.values()).map(|a| a.max(0.0)).sum();
        (2.0 / (self.k as f64 - 2.0)).powi(2) * s
    }

    /// Right-hand side weight of condition (H): Σ_{A_k}|x_J|^{-2+ε} + Σ_{B_k}|x_{J1}-x_{J2}|^{-2+ε}.
    pub fn condition_h_weight(&self, x: &[f64], eps: f64) -> f64 {
        let mut s = 0.0;
        for j in all_subsets(self.n, self.k) {
            let d2: f64 = j.iter().map(|&i| x[i] * x[i]).sum();
            s += d2.powf(0.5 * (eps - 2.0));
        }
        if 2 * self.k <= self.n {
            for (j1, j2) in all_pairs(self.n, self.k) {
                let d2: f64 = j1.iter().zip(&j2).map(|(&a, &b)| (x[a] - x[b]).powi(2)).sum();
                s += d2.powf(0.5 * (eps - 2.0));
            }
        }
        s
    }

    pub fn from_json_str(s: &str) -> std::result::Result<Self, String> {
        let raw: CoefficientJson = serde_json::from_str(s)
            .map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))?;
        Self::from_wire(&raw).map_err(|e| e.to_string())
    }

    pub fn from_wire(raw: &CoefficientJson) -> Result<Self> {
        let mut c = Self::new(raw.n, raw.k)?;
        for t in &raw.cyl {
            c = c.with_cyl(&t.j, t.alpha)?;
        }
        for t in &raw.pairs {
            c = c.with_pair(&t.j1, &t.j2, t.alpha)?;
        }
        Ok(c)
    }

    pub fn to_wire(&self) -> CoefficientJson {
        CoefficientJson {
            n: self.n,
            k: self.k,
            cyl: self.cyl.iter().map(|(j, &alpha)| CylJson { j: j.0.clone(), alpha }).collect(),
            pairs: self
                .pairs
                .iter()
                .map(|(p, &alpha)| PairJson { j1: p.first.0.clone(), j2: p.second.0.clone(), alpha })
                .collect(),
        }
    }

    /// Number of index sets in A_k and B_k.
    pub fn count_index_sets(&self) -> (f64, f64) {
        let a = binomial(self.n, self.k);
        let b = if 2 * self.k <= self.n {
            a * binomial(self.n - self.k, self.k) / 2.0
        } else {
            0.0
        };
        (a, b)
    }
}

/// All k-subsets of {0..n-1} in lexicographic order.
pub fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All ordered disjoint pairs J1 < J2 of k-subsets.
pub fn all_pairs(n: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let subs = all_subsets(n, k);
    let mut out = Vec::new();
    for (i, a) in subs.iter().enumerate() {
        for b in &subs[i + 1..] {
            if a.iter().all(|e| !b.contains(e)) {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FieldFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Linear perturbation h with its bound constants.
#[derive(Clone)]
pub struct PerturbationH {
    pub eval: ScalarFn,
    pub grad_dot_x: ScalarFn,
    /// radial profile when h depends on |x| only
    pub radial: Option<RadialFn>,
    pub c_h: f64,
    pub eps: f64,
    pub label: String,
}

impl fmt::Debug for PerturbationH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PerturbationH({}, C_h={}, eps={})", self.label, self.c_h, self.eps)
    }
}

impl PerturbationH {
    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            grad_dot_x: Arc::new(|_| 0.0),
            radial: Some(Arc::new(|_| 0.0)),
            c_h: 0.0,
            eps: 0.5,
            label: "zero".into(),
        }
    }

    /// h(x) = c|x|^{-2+ε}.
    pub fn radial_power(c: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CssError::InvalidCoefficient(format!("eps = {eps} must lie in (0,1)")));
        }
        let p = eps - 2.0;
        Ok(Self {
            eval: Arc::new(move |x| c * norm(x).powf(p)),
            grad_dot_x: Arc::new(move |x| c * p * norm(x).powf(p)),
            radial: Some(Arc::new(move |r| c * r.powf(p))),
            c_h: c.abs() * (1.0 + p.abs()),
            eps,
            label: format!("radial-power(c={c}, eps={eps})"),
        })
    }

    /// Arbitrary radial profile with its derivative term r h'(r).
    pub fn radial_fn(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        r_dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c_h: f64,
        eps: f64,
        label: &str,
    ) -> Self {
        let h = Arc::new(h);
        let h1 = h.clone();
        let h2 = h.clone();
        Self {
            eval: Arc::new(move |x| h1(norm(x))),
            grad_dot_x: Arc::new(move |x| r_dh(norm(x))),
            radial: Some(Arc::new(move |r| h2(r))),
            c_h,
            eps,
            label: label.into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.label == "zero"
    }

    /// Sampled check of condition (H) on quasi-random points of B_1 outside the
    /// η-tube around the singular cone.
    pub fn check(&self, coeff: &AngularCoefficient, samples: usize, eta: f64) -> Result<()> {
        for x in test_cloud(coeff, samples, eta) {
            let lhs = (self.eval)(&x).abs() + (self.grad_dot_x)(&x).abs();
            let rhs = self.c_h * coeff.condition_h_weight(&x, self.eps);
            if !(lhs <= rhs * (1.0 + 1e-12)) {
                return Err(CssError::ConditionViolated(format!(
                    "(H) fails at x = {x:?}: {lhs:e} > {rhs:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Nonlinearity f with primitive F and the derivatives entering (F).
#[derive(Clone)]
pub struct NonlinearityF {
    pub f: FieldFn,
    pub big_f: FieldFn,
    pub f_s: FieldFn,
    pub gradx_f_dot_x: FieldFn,
    pub c_f: f64,
    pub label: String,
}

impl fmt::Debug for NonlinearityF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NonlinearityF({}, C_f={})", self.label, self.c_f)
    }
}

impl NonlinearityF {
    pub fn zero() -> Self {
        Self {
            f: Arc::new(|_, _| 0.0),
            big_f: Arc::new(|_, _| 0.0),
            f_s: Arc::new(|_, _| 0.0),
            gradx_f_dot_x: Arc::new(|_, _| 0.0),
            c_f: 0.0,
            label: "zero".into(),
        }
    }

    /// f(x,s) = c|s|^{p-2}s with 2 <= p <= 2*.
    pub fn power(c: f64, p: f64, n: usize) -> Result<Self> {
        if !(2.0..=two_star(n)).contains(&p) {
            return Err(CssError::InvalidCoefficient(format!("power p = {p} outside [2, 2*]")));
        }
        Ok(Self {
            f: Arc::new(move |_, s| c * s.abs().powf(p - 2.0) * s),
            big_f: Arc::new(move |_, s| c * s.abs().powf(p) / p),
            f_s: Arc::new(move |_, s| c * (p - 1.0) * s.abs().powf(p - 2.0)),
            gradx_f_dot_x: Arc::new(|_, _| 0.0),
            c_f: c.abs() * p,
            label: format!("power(c={c}, p={p})"),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.label == "zero"
    }

    /// Sampled check of (F), F(x,0) = 0 and ∂F/∂s = f.
    pub fn check(&self, coeff: &AngularCoefficient, samples: usize, eta: f64) -> Result<()> {
        let ts = two_star(coeff.dim());
        let svals = [-3.0, -1.0, -0.25, 0.1, 0.5, 1.0, 2.5];
        for x in test_cloud(coeff, samples, eta) {
            if (self.big_f)(&x, 0.0).abs() > 1e-14 {
                return Err(CssError::ConditionViolated(format!("F(x,0) != 0 at {x:?}")));
            }
            for &s in &svals {
                let lhs = ((self.f)(&x, s) * s).abs()
                    + ((self.f_s)(&x, s) * s * s).abs()
                    + (self.gradx_f_dot_x)(&x, s).abs();
                let rhs = self.c_f * (s * s + s.abs().powf(ts));
                if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                    return Err(CssError::ConditionViolated(format!(
                        "(F) fails at x = {x:?}, s = {s}: {lhs:e} > {rhs:e}"
                    )));
                }
                let ds = 1e-5 * s.abs().max(1.0);
                let fd = ((self.big_f)(&x, s + ds) - (self.big_f)(&x, s - ds)) / (2.0 * ds);
                let fv = (self.f)(&x, s);
                if (fd - fv).abs() > 1e-6 * fv.abs().max(1e-8) {
                    return Err(CssError::ConditionViolated(format!(
                        "dF/ds != f at x = {x:?}, s = {s}: {fd} vs {fv}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Halton points of the unit ball, skipping the η-tube around the singular cone
/// of the active terms and a ball of radius η around the origin.
pub fn test_cloud(coeff: &AngularCoefficient, count: usize, eta: f64) -> Vec<Vec<f64>> {
    let n = coeff.dim();
    let terms = coeff.active_terms();
    let mut out = Vec::with_capacity(count);
    let mut i = 1;
    while out.len() < count && i < 1000 * count + 1000 {
        let x: Vec<f64> = (0..n).map(|d| 2.0 * radical_inverse(i, PRIMES[d]) - 1.0).collect();
        i += 1;
        let r = norm(&x);
        if r > 1.0 || r < eta {
            continue;
        }
        if terms.iter().any(|t| t.dist(&x) < eta) {
            continue;
        }
        out.push(x);
    }
    out
}
