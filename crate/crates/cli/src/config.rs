//! Experiment configuration: one JSON file, unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use css_core::AngularCoefficient;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// potential JSON, relative to the config file
    pub potential: PathBuf,
    /// artifact directory, relative to the config file; --out wins
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance_scale: Option<f64>,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub solve: SolveBlock,
    #[serde(default)]
    pub almgren: AlmgrenBlock,
    #[serde(default)]
    pub asymptotics: AsymptoticsBlock,
    #[serde(default)]
    pub project: ProjectBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub bound_check: BoundBlock,
    #[serde(default)]
    pub report: ReportBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumBlock {
    pub count: usize,
    pub grid: usize,
    pub max_sector_degree: u32,
    pub galerkin_degree: u32,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { count: 4, grid: 2048, max_sector_degree: 12, galerkin_degree: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveBlock {
    pub radius: f64,
    /// h(x) = h_coef |x|^{−2+h_eps}
    pub h_coef: f64,
    pub h_eps: f64,
    pub modes: Vec<usize>,
    pub boundary: Vec<f64>,
    pub per_decade: usize,
    pub r_min: f64,
}

impl Default for SolveBlock {
    fn default() -> Self {
        Self { radius: 1.0, h_coef: 0.1, h_eps: 0.5, modes: vec![0], boundary: vec![1.0], per_decade: 8, r_min: 1e-6 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlmgrenBlock {
    pub r_lo: f64,
    pub r_hi: f64,
    pub per_decade: usize,
    pub gamma_tol: f64,
}

impl Default for AlmgrenBlock {
    fn default() -> Self {
        Self { r_lo: 1e-6, r_hi: 1e-1, per_decade: 20, gamma_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsBlock {
    pub radius: f64,
    pub gamma_tol: f64,
}

impl Default for AsymptoticsBlock {
    fn default() -> Self {
        Self { radius: 0.5, gamma_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectBlock {
    pub points: usize,
    pub depth: usize,
    pub residual_tol: f64,
}

impl Default for ProjectBlock {
    fn default() -> Self {
        Self { points: 1000, depth: 1, residual_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Hardy,
    Pohozaev,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Suite::All),
            "hardy" => Ok(Suite::Hardy),
            "pohozaev" => Ok(Suite::Pohozaev),
            _ => Err(format!("unknown suite {s:?} (all, hardy, pohozaev)")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    pub suite: Suite,
    pub random_count: usize,
    pub harmonic_degree: u32,
    pub near_optimizer_t: f64,
    pub pohozaev_radius: f64,
    pub pohozaev_degree: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            random_count: 20,
            harmonic_degree: 2,
            near_optimizer_t: 1e-5,
            pohozaev_radius: 0.5,
            pohozaev_degree: 6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundBlock {
    pub radius: f64,
    pub levels: Vec<usize>,
    pub sobolev_count: usize,
    pub sobolev_degree: usize,
}

impl Default for BoundBlock {
    fn default() -> Self {
        Self { radius: 1.0, levels: vec![4, 6], sobolev_count: 100, sobolev_degree: 4 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportBlock {
    /// extra potentials for the spectrum and projection sweep
    pub sweep: Vec<PathBuf>,
}

/// Parsed configuration together with everything needed for provenance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub coeff: AngularCoefficient,
    pub potential_hash: String,
    pub base: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_potential(path: &Path) -> Result<(AngularCoefficient, String), ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let coeff = AngularCoefficient::from_json_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok((coeff, sha256_hex(text.as_bytes())))
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let (coeff, potential_hash) = load_potential(&base.join(&config.potential))?;
    if let Some(s) = config.tolerance_scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(ConfigError(format!("tolerance_scale = {s} must be positive")));
        }
    }
    let sb = &config.solve;
    if sb.modes.len() != sb.boundary.len() || sb.modes.is_empty() {
        return Err(ConfigError("solve.modes and solve.boundary must be non-empty and of equal length".into()));
    }
    if config.bound_check.levels.len() < 2 {
        return Err(ConfigError("bound_check.levels needs at least two refinement levels".into()));
    }
    Ok(Loaded { config, config_hash: sha256_hex(text.as_bytes()), coeff, potential_hash, base })
}

impl Loaded {
    /// Randomized suites refuse to run without an explicit seed.
    pub fn seed(&self, what: &str) -> Result<u64, ConfigError> {
        self.config.seed.ok_or_else(|| ConfigError(format!("{what} is randomized and needs \"seed\" in the config")))
    }
}
