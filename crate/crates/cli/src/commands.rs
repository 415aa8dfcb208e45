//! Subcommand bodies. Each one writes its artifacts and returns a summary.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use css_core::almgren::{check_doubling, check_h_bounds, estimate_gamma, frequency_trace, midpoint_q, FrequencyTrace, GammaFit};
use css_core::asymptotics::{beta_coefficients, beta_i, convergence_check, lambda_schedule};
use css_core::bounds::{
    bk_constants, pointwise_bound_check, s_exponent, s_hat_constant, weighted_sobolev_check, BkInput, WeightOptions, WeightRho,
};
use css_core::identities::{
    family_harmonics, family_near_optimizer, family_random_modal, energy_quadrature, homogeneous_cylindrical, manufactured_cylindrical,
    verify_hardy, verify_hardy_many, verify_pohozaev, weight_terms, HardyConstants, HardyKind, PohozaevReport,
};
use css_core::projection::{conformal_factor, iterate_reduction, lambda_b_check, project_potential, stereographic_inv};
use css_core::radial::LogGrid;
use css_core::spectrum::{
    assemble_spectrum_with, classify, lambda_of, mu1_closed_form, mu1_closed_form_cylindrical, spectral_floor,
    EigenDecomposition, Shape, SpectrumOptions,
};
use css_core::{AngularCoefficient, CssError, ModalSolution, NonlinearityF, PerturbationH, Problem, Term};

use crate::config::{load_potential, Loaded, Suite};
use crate::output::{float, write_csv, write_json};

pub const COMMANDS: [&str; 7] = ["spectrum", "solve", "almgren", "asymptotics", "project", "verify", "bound-check"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// measured quantity, null for yes/no checks
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
}

impl Check {
    /// value ≤ tolerance
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), pass: value <= tolerance, value: Some(value), tolerance: Some(tolerance) }
    }

    fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), pass, value: None, tolerance: None }
    }
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub command: &'static str,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Summary {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// data fields plus command, potential hash and checks
    pub fn to_value(&self, potential_hash: &str) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command));
        m.insert("potential_hash".into(), json!(potential_hash));
        m.insert("checks".into(), serde_json::to_value(&self.checks).unwrap());
        m.insert("pass".into(), json!(self.pass()));
        if let Value::Object(d) = &self.data {
            for (k, v) in d {
                m.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        Value::Object(m)
    }
}

struct Generated {
    pb: Problem,
    u: ModalSolution,
}

/// Shared state of one run; expensive pieces are computed once.
pub struct Ctx {
    pub loaded: Loaded,
    pub out: PathBuf,
    pub tol: f64,
    dec: Mutex<Option<Arc<EigenDecomposition>>>,
    generated: Mutex<Option<Arc<Generated>>>,
    trace: Mutex<Option<Arc<(FrequencyTrace, GammaFit)>>>,
}

fn cached<T>(slot: &Mutex<Option<Arc<T>>>, f: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    let mut g = slot.lock().unwrap();
    if let Some(v) = &*g {
        return Ok(v.clone());
    }
    let v = Arc::new(f()?);
    *g = Some(v.clone());
    Ok(v)
}

impl Ctx {
    pub fn new(loaded: Loaded, out: PathBuf, tol: f64) -> Self {
        Self { loaded, out, tol, dec: Mutex::new(None), generated: Mutex::new(None), trace: Mutex::new(None) }
    }

    fn coeff(&self) -> &AngularCoefficient {
        &self.loaded.coeff
    }

    fn spectrum_options(&self) -> SpectrumOptions {
        let b = &self.loaded.config.spectrum;
        SpectrumOptions {
            count: b.count,
            grid: b.grid,
            max_sector_degree: b.max_sector_degree,
            galerkin_degree: b.galerkin_degree,
        }
    }

    fn decomposition(&self) -> Result<Arc<EigenDecomposition>> {
        cached(&self.dec, || Ok(assemble_spectrum_with(self.coeff(), &self.spectrum_options()).context("spectrum")?))
    }

    fn generated(&self) -> Result<Arc<Generated>> {
        cached(&self.generated, || {
            let dec = self.decomposition()?;
            let sb = &self.loaded.config.solve;
            let h = PerturbationH::radial_power(sb.h_coef, sb.h_eps).context("solve")?;
            let pb = Problem::new(self.coeff().clone(), h.clone(), NonlinearityF::zero(), 4).context("solve")?;
            let u = ModalSolution::generate(dec, h, &sb.modes, &sb.boundary, sb.radius).context("solve")?;
            Ok(Generated { pb, u })
        })
    }

    fn trace(&self) -> Result<Arc<(FrequencyTrace, GammaFit)>> {
        cached(&self.trace, || {
            let g = self.generated()?;
            let ab = &self.loaded.config.almgren;
            let tr = frequency_trace(&g.u, &g.pb, ab.r_lo, ab.r_hi, ab.per_decade).context("almgren")?;
            let fit = estimate_gamma(&tr).context("almgren")?;
            Ok((tr, fit))
        })
    }

    fn emit(&self, s: &Summary, csv: Option<(&str, &[&str], Vec<Vec<String>>)>) -> Result<()> {
        let stem = s.command.replace('-', "_");
        write_json(&self.out, &format!("{stem}.json"), &s.to_value(&self.loaded.potential_hash))?;
        if let Some((name, header, rows)) = csv {
            write_csv(&self.out, name, header, &rows)?;
        }
        Ok(())
    }
}

pub fn run(ctx: &Ctx, command: &str) -> Result<Summary> {
    match command {
        "spectrum" => spectrum(ctx),
        "solve" => solve(ctx),
        "almgren" => almgren(ctx),
        "asymptotics" => asymptotics(ctx),
        "project" => project(ctx),
        "verify" => verify(ctx, ctx.loaded.config.verify.suite),
        "bound-check" => bound_check(ctx),
        other => anyhow::bail!("unknown command {other}"),
    }
}

/// A single cylindrical term on J = {1..k}: (k, α).
fn leading_cylinder(coeff: &AngularCoefficient) -> Option<(usize, f64)> {
    match coeff.active_terms().as_slice() {
        [Term::Cyl { j, alpha }] if j.iter().enumerate().all(|(i, v)| i == *v) => Some((j.len(), *alpha)),
        _ => None,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Largest relative deviation of `out` from every number stored in `golden`
/// (the golden may hold a subset of the keys); infinite on structural mismatch.
pub fn golden_deviation(out: &Value, golden: &Value) -> f64 {
    match (out, golden) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            if b.abs() < 1e-12 {
                (a - b).abs()
            } else {
                rel(a, b)
            }
        }
        (Value::Object(a), Value::Object(b)) => b
            .iter()
            .map(|(k, v)| a.get(k).map_or(f64::INFINITY, |x| golden_deviation(x, v)))
            .fold(0.0, f64::max),
        (Value::Array(a), Value::Array(b)) if a.len() >= b.len() => {
            a.iter().zip(b).map(|(x, y)| golden_deviation(x, y)).fold(0.0, f64::max)
        }
        (a, b) if a == b => 0.0,
        _ => f64::INFINITY,
    }
}

/// Compares against `$CSS_GOLDEN_DIR/<potential stem>.<command>.json` when present.
fn golden_check(ctx: &Ctx, command: &str, out: &Value) -> Result<Option<Check>> {
    let Some(dir) = std::env::var_os("CSS_GOLDEN_DIR") else { return Ok(None) };
    let stem = ctx.loaded.config.potential.file_stem().and_then(|s| s.to_str()).unwrap_or("potential");
    let path = Path::new(&dir).join(format!("{stem}.{command}.json"));
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let golden: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(Check::at_most("golden", golden_deviation(out, &golden), 1e-6 * ctx.tol)))
}

/// μ₁ above the floor, with the analytic "no real exponent" answers read as below.
fn mu1_above_floor(coeff: &AngularCoefficient, opts: &SpectrumOptions) -> Result<(Option<f64>, bool)> {
    let floor = spectral_floor(coeff.dim());
    let one = SpectrumOptions { count: 1, ..opts.clone() };
    match assemble_spectrum_with(coeff, &one) {
        Ok(d) => Ok((Some(d.mu1()), d.mu1() > floor)),
        Err(CssError::SupercriticalAlpha { .. } | CssError::IndefiniteOperator { .. } | CssError::BelowSpectralFloor { .. }) => {
            Ok((None, false))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn spectrum(ctx: &Ctx) -> Result<Summary> {
    let coeff = ctx.coeff();
    let n = coeff.dim();
    let dec = ctx.decomposition()?;
    let lambda = lambda_of(coeff).context("spectrum")?;
    let floor = spectral_floor(n);
    let mu1 = dec.mu1();
    let levels: Vec<Value> = dec
        .levels
        .iter()
        .map(|l| json!({"mu": l.mu, "multiplicity": l.multiplicity, "sigma_plus": l.sigma_plus, "clustered": l.clustered}))
        .collect();
    let mut data = json!({
        "N": n,
        "k": coeff.block(),
        "method": dec.method,
        "lambda": lambda,
        "floor": floor,
        "mu1": mu1,
        "levels": levels,
    });
    let mut checks = vec![Check::flag("positivity_equivalence", (lambda < 1.0) == (mu1 > floor))];
    if let Some(cf) = mu1_closed_form(coeff) {
        data["closed_form_mu1"] = json!(cf);
        checks.push(Check::at_most("closed_form", rel(mu1, cf), 1e-6 * ctx.tol));
    }
    let full = Summary { command: "spectrum", checks: checks.clone(), data: data.clone() }.to_value(&ctx.loaded.potential_hash);
    checks.extend(golden_check(ctx, "spectrum", &full)?);
    let rows = dec
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), float(l.mu), l.multiplicity.to_string(), float(l.sigma_plus)])
        .collect();
    let s = Summary { command: "spectrum", checks, data };
    ctx.emit(&s, Some(("spectrum.csv", &["level", "mu", "multiplicity", "sigma_plus"], rows)))?;
    Ok(s)
}

pub fn solve(ctx: &Ctx) -> Result<Summary> {
    let sb = &ctx.loaded.config.solve;
    let g = ctx.generated()?;
    let radii = LogGrid::new(sb.r_min, sb.radius, sb.per_decade).radii();
    let mut header = vec!["r".to_string()];
    for m in &g.u.modes {
        header.push(format!("phi_{}", m.index));
        header.push(format!("dphi_{}", m.index));
    }
    let rows: Vec<Vec<String>> = radii
        .iter()
        .map(|&r| {
            let mut row = vec![float(r)];
            for m in &g.u.modes {
                let (v, d) = m.profile.eval(r);
                row.push(float(v));
                row.push(float(d));
            }
            row
        })
        .collect();
    let mut checks = Vec::new();
    let mut modes = Vec::new();
    for m in &g.u.modes {
        let e = m.profile.local_exponent(sb.r_min);
        checks.push(Check::at_most(format!("regular_branch_{}", m.index), (e - m.sigma_plus).abs(), 1e-3 * ctx.tol));
        modes.push(json!({"index": m.index, "mu": m.mu, "sigma_plus": m.sigma_plus, "local_exponent": e, "boundary": m.profile.eval(sb.radius).0}));
    }
    let data = json!({"radius": sb.radius, "h_coef": sb.h_coef, "h_eps": sb.h_eps, "r_min": sb.r_min, "modes": modes});
    let s = Summary { command: "solve", checks, data };
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.emit(&s, Some(("solve.csv", &hdr, rows)))?;
    Ok(s)
}

/// Expected rate of N → γ: ε from h, capped by twice the gap to the next excited mode.
fn expected_delta(g: &Generated, h_eps: f64, h_coef: f64) -> Option<f64> {
    let lo = g.u.modes.first()?.sigma_plus;
    let gap = g.u.modes.iter().map(|m| m.sigma_plus - lo).filter(|d| *d > 1e-9).fold(f64::INFINITY, f64::min);
    let d = if h_coef != 0.0 { h_eps.min(2.0 * gap) } else { 2.0 * gap };
    d.is_finite().then_some(d)
}

pub fn almgren(ctx: &Ctx) -> Result<Summary> {
    let ab = &ctx.loaded.config.almgren;
    let sb = &ctx.loaded.config.solve;
    let dec = ctx.decomposition()?;
    let g = ctx.generated()?;
    let t = ctx.trace()?;
    let (tr, fit) = (&t.0, &t.1);
    let low = &g.u.modes[0];
    let mut checks = vec![
        Check::at_most("gamma_vs_sigma_plus", (fit.gamma - low.sigma_plus).abs(), ab.gamma_tol * ctx.tol),
        Check { pass: tr.min_n_prime_minus_nu2() >= -1e-6 * ctx.tol, ..Check::at_most("monotonicity", -tr.min_n_prime_minus_nu2(), 1e-6 * ctx.tol) },
    ];
    if let (Some(delta), Some(exp)) = (fit.delta, expected_delta(&g, sb.h_eps, sb.h_coef)) {
        checks.push(Check::at_most("rate_exponent", (delta - exp).abs() / exp, 0.2 * ctx.tol));
    }
    let dbl = check_doubling(tr);
    checks.push(Check::at_most("doubling", dbl.c4, dbl.bound));
    let hb = check_h_bounds(tr, fit.gamma, 0.1);
    // exact homogeneous solution of the lowest mode: N is constant
    let hom = ModalSolution::homogeneous(dec.clone(), low.index, 1.0, 1.0).context("almgren")?;
    let pb0 = Problem::unperturbed(ctx.coeff().clone(), 4).context("almgren")?;
    let tr0 = frequency_trace(&hom, &pb0, ab.r_lo.max(1e-3 * ab.r_hi), ab.r_hi, ab.per_decade).context("almgren")?;
    let drift = tr0.n.iter().map(|v| (v - low.sigma_plus).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("homogeneous_constancy", drift, 1e-8 * ctx.tol));
    let data = json!({
        "gamma": fit.gamma,
        "delta": fit.delta,
        "c3": fit.c3,
        "sigma_plus": low.sigma_plus,
        "decades": tr.decades(),
        "doubling": {"c4": dbl.c4, "bound": dbl.bound, "per_decade": dbl.per_decade},
        "h_bounds": hb,
    });
    let rows = (0..tr.r.len())
        .map(|j| vec![float(tr.r[j]), float(tr.h[j]), float(tr.d[j]), float(tr.n[j]), float(tr.nu1[j]), float(tr.nu2[j])])
        .collect();
    let s = Summary { command: "almgren", checks, data };
    ctx.emit(&s, Some(("almgren.csv", &["r", "H", "D", "N", "nu1", "nu2"], rows)))?;
    Ok(s)
}

pub fn asymptotics(ctx: &Ctx) -> Result<Summary> {
    let xb = &ctx.loaded.config.asymptotics;
    let dec = ctx.decomposition()?;
    let g = ctx.generated()?;
    let t = ctx.trace()?;
    let gamma_tol = xb.gamma_tol * ctx.tol;
    let profile = beta_coefficients(&g.u, &g.pb, &dec, t.1.gamma, xb.radius, gamma_tol).context("asymptotics")?;
    let radii: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|f| f * xb.radius).filter(|r| *r <= g.u.radius).collect();
    let mut spread = 0.0f64;
    for i in profile.indices.clone() {
        let b = radii
            .iter()
            .map(|&r| beta_i(&g.u, &g.pb, &dec, i, profile.gamma, r))
            .collect::<Result<Vec<_>, _>>()
            .context("asymptotics")?;
        let hi = b.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lo = b.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        spread = spread.max(hi - lo);
    }
    let lambdas = lambda_schedule(g.u.radius);
    let conv = convergence_check(&g.u, &g.pb, &profile, &lambdas).context("asymptotics")?;
    let halving: Vec<f64> = conv.points.windows(2).map(|w| w[0].h1_error / w[1].h1_error).collect();
    let hb = check_h_bounds(&t.0, profile.gamma, 0.0);
    let b2 = profile.beta_norm2();
    let checks = vec![
        Check::at_most("beta_radius_independence", spread, 1e-6 * ctx.tol),
        Check::flag("h1_convergence", conv.monotone_tail && conv.rate > 0.0),
        Check::at_most("h_limit_vs_beta", rel(hb.limit, b2), 0.01 * ctx.tol),
    ];
    let data = json!({
        "gamma": profile.gamma,
        "k0": profile.k0(),
        "m": profile.multiplicity(),
        "beta": profile.beta,
        "R_used": profile.r_used,
        "convergence": {
            "points": conv.points,
            "monotone_tail": conv.monotone_tail,
            "rate": conv.rate,
            "halving_factors": halving,
        },
        "h_limit": hb.limit,
    });
    let rows = conv.points.iter().map(|p| vec![float(p.lambda), float(p.h1_error)]).collect();
    let s = Summary { command: "asymptotics", checks, data };
    ctx.emit(&s, Some(("asymptotics.csv", &["lambda", "h1_error"], rows)))?;
    Ok(s)
}

pub fn project(ctx: &Ctx) -> Result<Summary> {
    let pbk = &ctx.loaded.config.project;
    let coeff = ctx.coeff();
    let n = coeff.dim();
    let dec = ctx.decomposition()?;
    let mu = dec.mu1();
    let p = project_potential(coeff, mu).context("project")?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.loaded.seed("project")?);
    let mut worst = 0.0f64;
    for _ in 0..pbk.points {
        let y: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scale = conformal_factor(&y) * coeff.eval_unchecked(&stereographic_inv(&y)).abs() + 1.0;
        worst = worst.max(p.identity_residual(&y).abs() / scale);
    }
    let lb = lambda_b_check(coeff).context("project")?;
    let steps = iterate_reduction(coeff, mu, pbk.depth).context("project")?;
    let mut checks = vec![
        Check::at_most("identity_residual", worst, pbk.residual_tol * ctx.tol),
        Check::flag("lambda_b_below_one", lb.pass),
    ];
    if let (Some((k, alpha)), Some(first)) = (leading_cylinder(coeff), steps.first()) {
        if let Ok(cf) = mu1_closed_form_cylindrical(n, k, alpha) {
            checks.push(Check::at_most("gamma_tilde_vs_gamma_prime", (first.gamma_tilde - cf.gamma_prime).abs(), 1e-6 * ctx.tol));
        }
    }
    let reduction: Vec<Value> = steps
        .iter()
        .map(|s| json!({"dim": s.problem.dim(), "mu_b": s.mu_b, "gamma_tilde": s.gamma_tilde, "b": s.problem.b.to_wire()}))
        .collect();
    let rows = steps
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), s.problem.dim().to_string(), float(s.mu_b), float(s.gamma_tilde)])
        .collect();
    let data = json!({
        "mu": mu,
        "b": p.b.to_wire(),
        "points": pbk.points,
        "max_identity_residual": worst,
        "lambda_a": lb.lambda_a,
        "lambda_b": lb.lambda_b,
        "reduction": reduction,
    });
    let s = Summary { command: "project", checks, data };
    ctx.emit(&s, Some(("project.csv", &["step", "dim", "mu_b", "gamma_tilde"], rows)))?;
    Ok(s)
}

fn pohozaev_row(label: &str, rep: &PohozaevReport, tol: f64) -> (Check, Vec<String>, Value) {
    let worst = rep.poho.abs().max(rep.energy.abs()).max(rep.poho_hx.abs());
    let row = vec![
        label.to_string(),
        float(rep.r),
        float(rep.poho),
        float(rep.energy),
        float(rep.poho_hx),
        rep.pde_residual.map_or("null".into(), float),
    ];
    let mut v = serde_json::to_value(rep).unwrap();
    v["label"] = json!(label);
    (Check::at_most(format!("pohozaev_{label}"), worst, tol), row, v)
}

pub fn verify(ctx: &Ctx, suite: Suite) -> Result<Summary> {
    let vb = &ctx.loaded.config.verify;
    let coeff = ctx.coeff();
    let (n, k) = (coeff.dim(), coeff.block());
    let mut checks = Vec::new();
    let mut data = json!({"suite": format!("{suite:?}").to_lowercase()});
    if matches!(suite, Suite::All | Suite::Hardy) {
        let seed = ctx.loaded.seed("verify")?;
        let consts = HardyConstants::compute(coeff, true).context("verify")?;
        let dec = ctx.decomposition()?;
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        for ball in [false, true] {
            let kinds: Vec<HardyKind> =
                HardyKind::ALL.into_iter().filter(|h| h.on_ball() == ball && (!h.needs_pair() || 2 * k <= n)).collect();
            let mut fam = family_harmonics(n, vb.harmonic_degree, ball);
            fam.extend(family_random_modal(&dec, vb.random_count, seed, ball));
            for rep in verify_hardy_many(&kinds, coeff, &fam, 1.0, &consts, 1.0).context("verify")? {
                checks.push(Check { name: format!("hardy_{}", rep.name), pass: rep.pass, value: Some(rep.margin), tolerance: None });
                rows.push(vec![rep.name.clone(), "family".into(), float(rep.constant), float(rep.worst_quotient), float(rep.margin), rep.pass.to_string()]);
                reports.push(rep);
            }
        }
        let (cyl, pair) = weight_terms(coeff).context("verify")?;
        let mut targets = vec![(HardyKind::Cylindrical, cyl)];
        targets.extend(pair.map(|p| (HardyKind::TwoBody, p)));
        let mut sharp = Vec::new();
        for (kind, term) in targets {
            let fam = [family_near_optimizer(&term, vb.near_optimizer_t)];
            let at = verify_hardy(kind, coeff, &fam, 1.0, &consts, 1.0).context("verify")?;
            let inflated = verify_hardy(kind, coeff, &fam, 1.0, &consts, 1.0 + 1e-3).context("verify")?;
            checks.push(Check { pass: at.pass && at.margin <= 0.05, ..Check::at_most(format!("sharpness_{kind}"), at.margin, 0.05) });
            checks.push(Check::flag(format!("inflation_detected_{kind}"), !inflated.pass));
            rows.push(vec![kind.to_string(), "near_optimizer".into(), float(at.constant), float(at.worst_quotient), float(at.margin), at.pass.to_string()]);
            sharp.push(json!({"kind": kind, "report": at, "inflated_pass": inflated.pass}));
        }
        write_csv(&ctx.out, "verify_hardy.csv", &["kind", "family", "constant", "worst_quotient", "margin", "pass"], &rows)?;
        data["constants"] = serde_json::to_value(&consts).unwrap();
        data["hardy"] = serde_json::to_value(&reports).unwrap();
        data["sharpness"] = json!(sharp);
    }
    if matches!(suite, Suite::All | Suite::Pohozaev) {
        let r = vb.pohozaev_radius;
        let deg = vb.pohozaev_degree;
        let dec = ctx.decomposition()?;
        let g = ctx.generated()?;
        let mut rows = Vec::new();
        let mut reps = Vec::new();
        let mut push = |label: &str, rep: PohozaevReport, tol: f64| {
            let (c, row, v) = pohozaev_row(label, &rep, tol);
            checks.push(c);
            rows.push(row);
            reps.push(v);
        };
        let mut pb0 = Problem::unperturbed(coeff.clone(), deg).context("verify")?;
        if !matches!(classify(coeff), Shape::General) {
            pb0.quad = Arc::new(energy_quadrature(coeff, deg).context("verify")?);
        }
        let pbh = Problem { quad: pb0.quad.clone(), ..g.pb.clone() };
        let hom = ModalSolution::homogeneous(dec.clone(), 0, 1.0, 1.0).context("verify")?;
        push("modal_homogeneous", verify_pohozaev(&hom, &pb0, None, r).context("verify")?, 1e-6 * ctx.tol);
        push("modal_perturbed", verify_pohozaev(&g.u, &pbh, None, r.min(g.u.radius)).context("verify")?, 1e-6 * ctx.tol);
        if let Some((k, alpha)) = leading_cylinder(coeff) {
            let u = homogeneous_cylindrical(n, k, alpha).context("verify")?;
            push("closed_form_homogeneous", verify_pohozaev(&u, &pb0, None, r).context("verify")?, 1e-8 * ctx.tol);
            let (pbm, um) = manufactured_cylindrical(n, k, alpha, deg).context("verify")?;
            push("manufactured", verify_pohozaev(&*um, &pbm, None, r).context("verify")?, 1e-6 * ctx.tol);
        }
        write_csv(&ctx.out, "verify_pohozaev.csv", &["label", "r", "poho", "energy", "poho_hx", "pde_residual"], &rows)?;
        data["pohozaev"] = json!(reps);
    }
    let s = Summary { command: "verify", checks, data };
    ctx.emit(&s, None)?;
    Ok(s)
}

pub fn bound_check(ctx: &Ctx) -> Result<Summary> {
    let bb = &ctx.loaded.config.bound_check;
    let sb = &ctx.loaded.config.solve;
    let coeff = ctx.coeff();
    let (n, k) = (coeff.dim(), coeff.block());
    let seed = ctx.loaded.seed("bound-check")?;
    let w = WeightRho::build(coeff, bb.radius, &WeightOptions::default()).context("bound-check")?;
    let s_hat = s_hat_constant(coeff).context("bound-check")?;
    let ws = weighted_sobolev_check(&w, 0.9 * s_hat.value, bb.sobolev_count, seed, bb.sobolev_degree).context("bound-check")?;
    let g = ctx.generated()?;
    let pc = pointwise_bound_check(&g.u, &w, bb.radius.min(g.u.radius), &bb.levels).context("bound-check")?;
    let lambda = lambda_of(coeff).context("bound-check")?;
    let q = midpoint_q(lambda, n);
    let bk = bk_constants(&BkInput {
        q,
        n,
        k,
        s: s_exponent(q, n),
        // f = 0, so V = f(x,u)/u vanishes
        v_norm: 0.0,
        c_h: g.pb.h.c_h,
        eps: sb.h_eps,
        lambda_hat: w.lambda_hat,
        d: w.d,
        s_hat: s_hat.value,
        dist: bb.radius / 2.0,
    })
    .context("bound-check")?;
    let checks = vec![
        Check::flag("pointwise_stability", pc.pass),
        Check { name: "weighted_sobolev".into(), pass: ws.pass, value: Some(ws.worst_quotient), tolerance: Some(ws.constant) },
    ];
    let rows = pc.shells.iter().map(|s| vec![float(s.r), float(s.sup_ratio)]).collect();
    let data = json!({
        "sigma_hat": pc.sigma_hat,
        "d": pc.d,
        "S_hat": s_hat.value,
        "S_hat_levels": s_hat.levels,
        "shells": pc.shells,
        "pass": pc.pass,
        "per_level": pc.per_level,
        "weighted_sobolev": ws,
        "q": q,
        "moser": bk,
    });
    let s = Summary { command: "bound-check", checks, data };
    ctx.emit(&s, Some(("bound_check.csv", &["r", "sup_ratio"], rows)))?;
    Ok(s)
}

/// Every subcommand plus the positivity sweep, gathered into manifest.json.
pub fn report(ctx: &Ctx) -> Result<(bool, Value)> {
    let results: Vec<(&str, Result<Summary>)> = COMMANDS.par_iter().map(|c| (*c, run(ctx, c))).collect();
    let mut pass = true;
    let mut entries = Vec::new();
    for (c, r) in results {
        match r {
            Ok(s) => {
                pass &= s.pass();
                entries.push(s.to_value(&ctx.loaded.potential_hash));
            }
            Err(e) => {
                eprintln!("{c}: {e:#}");
                pass = false;
                entries.push(json!({"command": c, "pass": false, "error": format!("{e:#}")}));
            }
        }
    }
    let opts = ctx.spectrum_options();
    let sweep_paths = &ctx.loaded.config.report.sweep;
    let sweep: Vec<Result<Value>> = sweep_paths
        .par_iter()
        .map(|p| {
            let (coeff, hash) = load_potential(&ctx.loaded.base.join(p))?;
            let lambda = lambda_of(&coeff)?;
            let (mu1, above) = mu1_above_floor(&coeff, &opts)?;
            Ok(json!({
                "potential": p.to_string_lossy(),
                "potential_hash": hash,
                "lambda": lambda,
                "mu1": mu1,
                "pass": (lambda < 1.0) == above,
            }))
        })
        .collect();
    let mut sweep_out = Vec::new();
    for (p, r) in sweep_paths.iter().zip(sweep) {
        match r {
            Ok(v) => {
                pass &= v["pass"].as_bool().unwrap_or(false);
                sweep_out.push(v);
            }
            Err(e) => {
                eprintln!("sweep {}: {e:#}", p.display());
                pass = false;
                sweep_out.push(json!({"potential": p.to_string_lossy(), "pass": false, "error": format!("{e:#}")}));
            }
        }
    }
    let cfg = &ctx.loaded.config;
    let manifest = json!({
        "pass": pass,
        "potential_hash": ctx.loaded.potential_hash,
        "config_hash": ctx.loaded.config_hash,
        "seed": cfg.seed,
        "tolerance_scale": ctx.tol,
        "grids": {
            "sector_nodes": cfg.spectrum.grid,
            "max_sector_degree": cfg.spectrum.max_sector_degree,
            "galerkin_degree": cfg.spectrum.galerkin_degree,
            "trace_per_decade": cfg.almgren.per_decade,
            "trace_range": [cfg.almgren.r_lo, cfg.almgren.r_hi],
            "pohozaev_degree": cfg.verify.pohozaev_degree,
            "bound_levels": cfg.bound_check.levels,
        },
        "summaries": entries,
        "sweep": sweep_out,
    });
    write_json(&ctx.out, "manifest.json", &manifest)?;
    Ok((pass, manifest))
}
