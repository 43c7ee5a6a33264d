//! Run configuration: TOML schema, defaults and validation.

use std::fs;
use std::path::{Path, PathBuf};

use adkyle_core::equilibrium::{McConfig, SolverConfig};
use adkyle_core::info_kernel::KernelOptions;
use adkyle_core::market_model::{make_payoff_family, FamilySpec, NoiseProfile, PayoffFamily, SkewNormal, StateGrid};
use adkyle_core::orderflow::PathMc;
use adkyle_core::posterior::MIN_SAMPLES;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "ADKYLE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub family: FamilySection,
    /// Optional check on the number of signals implied by the family.
    pub signals: Option<usize>,
    pub mc: McSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub impact: ImpactSection,
    #[serde(default)]
    pub efficiency: EfficiencySection,
    #[serde(default)]
    pub posterior: PosteriorSection,
    #[serde(default)]
    pub foc: FocSection,
    #[serde(default)]
    pub options: OptionsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { x_min: -5.0, x_max: 5.0, n: 401 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSection {
    Constant { sigma: f64 },
    /// CSV with header `x,sigma`, interpolated onto the grid.
    Tabulated { file: PathBuf },
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self::Constant { sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySection {
    MeanShift { means: Vec<f64>, sd: f64 },
    Variance { mean: f64, sds: Vec<f64> },
    /// Moment-matched skew-normal densities, one shape per signal.
    SkewNormal { mean: f64, sd: f64, shapes: Vec<f64> },
    /// CSV with header `x,eta_s1,...,eta_sI`, interpolated onto the grid.
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
}

fn default_samples() -> usize {
    200_000
}

fn default_paths() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub phi_tol: f64,
    pub bracket_cap: f64,
    pub bisect_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { phi_tol: d.phi_tol, bracket_cap: d.bracket_cap, bisect_tol: d.bisect_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub rank_tol: f64,
    pub exchange_tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        let d = KernelOptions::default();
        Self { rank_tol: d.rank_tol, exchange_tol: d.exchange_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Paths written to `paths.csv`.
    pub paths: usize,
    /// Signal whose equilibrium demand drives the simulated flow.
    pub signal: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { paths: 8, signal: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactSection {
    pub subgrid: usize,
    /// Condition on one signal instead of drawing it uniformly per path.
    pub signal: Option<usize>,
}

impl Default for ImpactSection {
    fn default() -> Self {
        Self { subgrid: adkyle_core::analytics::DEFAULT_SUBGRID, signal: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencySection {
    pub signals: Vec<usize>,
}

impl Default for EfficiencySection {
    fn default() -> Self {
        Self { signals: vec![2, 4, 6, 8] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorSection {
    pub alphas: Vec<f64>,
}

impl Default for PosteriorSection {
    fn default() -> Self {
        Self { alphas: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FocSection {
    pub signal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OptionsSection {
    /// Reference strike; defaults to the prior mean.
    pub k0: Option<f64>,
}

/// A fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub grid: StateGrid,
    pub noise: NoiseProfile,
    pub family: PayoffFamily,
    pub kernel: KernelOptions,
    pub mc: McConfig,
    pub paths: PathMc,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.mc.seed
    }

    /// SHA-256 of the resolved configuration, seed overrides included and
    /// the output directory excluded.
    pub fn hash(&self) -> String {
        let mut raw = self.raw.clone();
        raw.output = OutputSection::default();
        let text = toml::to_string(&raw).unwrap_or_default();
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| anyhow!("config: {}", e.message()))
}

/// Reads, parses and validates a config file. Relative data paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
    let mut raw = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for file in [noise_file(&mut raw.noise), family_file(&mut raw.family)].into_iter().flatten() {
        if file.is_relative() {
            *file = base.join(&*file);
        }
    }
    if let Some(seed) = seed_override {
        raw.mc.seed = Some(seed);
    }
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            raw.output.dir = PathBuf::from(dir);
        }
    }
    validate(raw)
}

fn noise_file(n: &mut NoiseSection) -> Option<&mut PathBuf> {
    match n {
        NoiseSection::Tabulated { file } => Some(file),
        NoiseSection::Constant { .. } => None,
    }
}

fn family_file(f: &mut FamilySection) -> Option<&mut PathBuf> {
    match f {
        FamilySection::Tabulated { file } => Some(file),
        _ => None,
    }
}

pub fn validate(raw: RawConfig) -> Result<RunConfig> {
    let seed = raw.mc.seed.ok_or_else(|| anyhow!("config: mc.seed is required"))?;
    let g = &raw.grid;
    let grid = StateGrid::new(g.x_min, g.x_max, g.n).map_err(|e| anyhow!("config: grid: {e}"))?;
    let noise = match &raw.noise {
        NoiseSection::Constant { sigma } => NoiseProfile::constant(&grid, *sigma),
        NoiseSection::Tabulated { file } => {
            let (_, cols) = read_table(file)?;
            if cols.len() != 2 {
                bail!("config: noise file {} must have columns x,sigma", file.display());
            }
            NoiseProfile::new(interpolate(&cols[0], &cols[1], &grid, file)?)
        }
    }
    .map_err(|e| anyhow!("config: noise: {e}"))?;
    let spec = match &raw.family {
        FamilySection::MeanShift { means, sd } => FamilySpec::GaussianMeanShift { means: means.clone(), sd: *sd },
        FamilySection::Variance { mean, sds } => FamilySpec::GaussianVariance { mean: *mean, sds: sds.clone() },
        FamilySection::SkewNormal { mean, sd, shapes } => FamilySpec::SkewNormal {
            params: shapes.iter().map(|&a| SkewNormal::moment_matched(*mean, *sd, a)).collect(),
        },
        FamilySection::Tabulated { file } => {
            let (header, cols) = read_table(file)?;
            if cols.len() < 3 || header[0] != "x" {
                bail!("config: family file {} needs a header x,eta_s1,...,eta_sI", file.display());
            }
            let labels = header[1..].iter().map(|h| h.strip_prefix("eta_").unwrap_or(h).to_string()).collect();
            let rows = cols[1..].iter().map(|c| interpolate(&cols[0], c, &grid, file)).collect::<Result<_>>()?;
            FamilySpec::Tabulated { labels, rows }
        }
    };
    let family = make_payoff_family(&spec, &grid).map_err(|e| anyhow!("config: family: {e}"))?;
    if let Some(i) = raw.signals {
        if i != family.signals() {
            bail!("config: signals = {i} but the family defines {} signals", family.signals());
        }
    }
    if raw.mc.n_samples == 0 {
        bail!("config: mc.n_samples must be positive");
    }
    if raw.mc.n_samples < MIN_SAMPLES {
        bail!("config: mc.n_samples = {} is below the minimum of {MIN_SAMPLES}", raw.mc.n_samples);
    }
    if raw.mc.n_paths < 2 {
        bail!("config: mc.n_paths must be at least 2");
    }
    let s = &raw.solver;
    if !(s.phi_tol > 0.0 && s.bisect_tol > 0.0 && s.bracket_cap >= 1.0) {
        bail!("config: solver tolerances must be positive and bracket_cap at least 1");
    }
    let k = &raw.kernel;
    if !(k.rank_tol > 0.0 && k.exchange_tol > 0.0) {
        bail!("config: kernel tolerances must be positive");
    }
    let signals = family.signals();
    if raw.simulate.signal >= signals || raw.foc.signal >= signals || raw.impact.signal.is_some_and(|s| s >= signals) {
        bail!("config: signal index out of range for {signals} signals");
    }
    if raw.impact.subgrid < 2 {
        bail!("config: impact.subgrid must be at least 2");
    }
    if raw.efficiency.signals.iter().any(|&i| i < 2) || raw.efficiency.signals.is_empty() {
        bail!("config: efficiency.signals must be a nonempty list of integers >= 2");
    }
    if raw.posterior.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        bail!("config: posterior.alphas must be finite and nonnegative");
    }
    Ok(RunConfig {
        grid,
        noise,
        family,
        kernel: KernelOptions { rank_tol: k.rank_tol, exchange_tol: k.exchange_tol },
        mc: McConfig::new(raw.mc.n_samples, seed),
        paths: PathMc::new(raw.mc.n_paths, seed),
        solver: SolverConfig { phi_tol: s.phi_tol, bracket_cap: s.bracket_cap, bisect_tol: s.bisect_tol, ..SolverConfig::default() },
        output_dir: raw.output.dir.clone(),
        workers: raw.mc.workers,
        raw,
    })
}

/// Header and numeric columns of a CSV file.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("config: cannot read {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            bail!("config: {} row {} has {} fields, expected {}", path.display(), line + 2, rec.len(), header.len());
        }
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(field.trim().parse::<f64>().with_context(|| format!("config: {} row {}", path.display(), line + 2))?);
        }
    }
    Ok((header, cols))
}

/// Linear interpolation of tabulated `(x, y)` onto the grid nodes.
fn interpolate(x: &[f64], y: &[f64], grid: &StateGrid, source: &Path) -> Result<Vec<f64>> {
    if x.len() < 2 || x.windows(2).any(|w| w[0] >= w[1]) {
        bail!("config: {} needs at least two rows with strictly increasing x", source.display());
    }
    let eps = 1e-9 * grid.span();
    if x[0] > grid.x_min() + eps || x[x.len() - 1] < grid.x_max() - eps {
        bail!("config: {} does not cover the grid [{}, {}]", source.display(), grid.x_min(), grid.x_max());
    }
    Ok(grid
        .nodes()
        .iter()
        .map(|&t| {
            let k = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
            let f = ((t - x[k - 1]) / (x[k] - x[k - 1])).clamp(0.0, 1.0);
            y[k - 1] * (1.0 - f) + y[k] * f
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[family]\nkind = \"mean_shift\"\nmeans = [1.0, -1.0]\nsd = 1.0\n\n[mc]\nseed = 7\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = validate(parse_config(MINIMAL).unwrap()).unwrap();
        assert_eq!(cfg.grid.len(), 401);
        assert_eq!(cfg.mc.n_samples, 200_000);
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.family.signals(), 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config(&format!("alpha = 1.0\n{MINIMAL}")).unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
        let err = parse_config(&MINIMAL.replace("seed = 7", "seed = 7\nalpha = 2")).unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
    }

    #[test]
    fn missing_seed_and_zero_samples_fail() {
        let err = validate(parse_config(&MINIMAL.replace("seed = 7", "")).unwrap()).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        let zero = MINIMAL.replace("seed = 7", "seed = 7\nn_samples = 0");
        assert!(validate(parse_config(&zero).unwrap()).is_err());
    }

    #[test]
    fn dotted_keys_are_accepted() {
        let text = format!("grid.n = 101\n{MINIMAL}");
        let cfg = validate(parse_config(&text).unwrap()).unwrap();
        assert_eq!(cfg.grid.len(), 101);
    }

    #[test]
    fn signal_count_must_match() {
        let text = format!("signals = 3\n{MINIMAL}");
        assert!(validate(parse_config(&text).unwrap()).is_err());
    }

    #[test]
    fn interpolation_requires_cover() {
        let grid = StateGrid::new(0.0, 1.0, 5).unwrap();
        let p = Path::new("t.csv");
        let v = interpolate(&[0.0, 1.0], &[0.0, 2.0], &grid, p).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(interpolate(&[0.1, 1.0], &[0.0, 2.0], &grid, p).is_err());
    }
}
