//! Experiment configuration: a sectioned TOML file, environment overrides and
//! command-line overrides, applied in that order.

use std::path::PathBuf;

use fiberzs_core::capacity::{EntropyConstant, LambdaBarMode};
use fiberzs_core::link::{CovarianceMethod, LinkParams, NoiseConvention};
use fiberzs_core::stats::dos::{DEFAULT_BINS, DEFAULT_EDGE_FRACTION};
use fiberzs_core::{Error, Polarization, Result, Scheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Prefix of environment overrides: `FIBERZS_<SECTION>_<KEY>=value`.
pub const ENV_PREFIX: &str = "FIBERZS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub dos: DosSection,
    pub spacing: SpacingSection,
    pub ipr: IprSection,
    pub lyapunov: LyapunovSection,
    pub bz: BzSection,
    pub noise: NoiseSection,
    pub capacity: CapacitySection,
    pub link: LinkSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    /// Parent of the timestamped run directories. Not part of the config hash.
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { name: "experiment".into(), seed: 1, output_dir: "runs".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Mal,
    CentralDifference,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Scheme {
        match s {
            SchemeName::Mal => Scheme::ModifiedAblowitzLadik,
            SchemeName::CentralDifference => Scheme::CentralDifference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub dx: f64,
    pub scheme: SchemeName,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { length: 20.0, dx: 0.1, scheme: SchemeName::Mal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationName {
    Unpolarized,
    Polarized,
}

impl From<PolarizationName> for Polarization {
    fn from(p: PolarizationName) -> Polarization {
        match p {
            PolarizationName::Unpolarized => Polarization::Unpolarized,
            PolarizationName::Polarized => Polarization::Polarized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub runs: usize,
    /// Signal powers; commands that take a single D use the first.
    pub d: Vec<f64>,
    pub polarization: PolarizationName,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { runs: 10, d: vec![1.0], polarization: PolarizationName::Unpolarized }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosSection {
    pub bins: usize,
    pub edge_fraction: f64,
    /// Eta range of the bright profile; the lower end is raised to sqrt(D/L).
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_bins: usize,
    /// Half-width of the xi window of the eta profile; 0 selects the default.
    pub xi_window: f64,
}

impl Default for DosSection {
    fn default() -> Self {
        DosSection {
            bins: DEFAULT_BINS,
            edge_fraction: DEFAULT_EDGE_FRACTION,
            eta_min: 0.15,
            eta_max: 1.5,
            eta_bins: 9,
            xi_window: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpacingSection {
    pub edge_fraction: f64,
}

impl Default for SpacingSection {
    fn default() -> Self {
        SpacingSection { edge_fraction: DEFAULT_EDGE_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IprSection {
    pub window_fraction: f64,
    pub edge_fraction: f64,
    pub points: usize,
}

impl Default for IprSection {
    fn default() -> Self {
        IprSection { window_fraction: 0.05, edge_fraction: DEFAULT_EDGE_FRACTION, points: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSection {
    pub x_max: f64,
    /// Step of the transfer-matrix walk; 0 uses the grid step.
    pub dx: f64,
    pub renorm_every: usize,
    pub batches: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection {
            x_max: 2e4,
            dx: 0.0,
            renorm_every: 10,
            batches: 20,
            xi_min: -0.3,
            xi_max: 0.3,
            xi_points: 5,
            eta_min: 0.15,
            eta_max: 1.65,
            eta_points: 11,
        }
    }
}

impl LyapunovSection {
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        (linspace(self.xi_min, self.xi_max, self.xi_points), linspace(self.eta_min, self.eta_max, self.eta_points))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BzSection {
    pub xi: f64,
    pub eta: f64,
    pub durations: Vec<f64>,
}

impl Default for BzSection {
    fn default() -> Self {
        BzSection { xi: 0.0, eta: 0.5, durations: vec![50.0, 100.0, 200.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    PerQuadrature,
    ComplexVariance,
}

impl From<ConventionName> for NoiseConvention {
    fn from(c: ConventionName) -> NoiseConvention {
        match c {
            ConventionName::PerQuadrature => NoiseConvention::PerQuadrature,
            ConventionName::ComplexVariance => NoiseConvention::ComplexVariance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Exact,
    MonteCarlo,
}

impl From<MethodName> for CovarianceMethod {
    fn from(m: MethodName) -> CovarianceMethod {
        match m {
            MethodName::Exact => CovarianceMethod::Exact,
            MethodName::MonteCarlo => CovarianceMethod::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma2: f64,
    pub convention: ConventionName,
    pub method: MethodName,
    /// Noise realizations for the Monte Carlo method.
    pub noise_runs: usize,
    pub hist_bins: usize,
    /// Write the full covariance matrix of the first realization.
    pub write_matrix: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            sigma2: 1.0,
            convention: ConventionName::PerQuadrature,
            method: MethodName::Exact,
            noise_runs: 0,
            hist_bins: 30,
            write_matrix: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub mode: LambdaBarMode,
    pub entropy_constant: EntropyConstant,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection { mode: LambdaBarMode::Fitted, entropy_constant: EntropyConstant::Printed }
    }
}

/// Link parameters; the amplifier gain is derived from loss and spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub span_km: f64,
    pub spacing_km: f64,
    pub amplifiers: u32,
    pub loss_db_per_km: f64,
    pub carrier_hz: f64,
    pub eta_sp: f64,
    pub planck: f64,
    pub power_w: f64,
    pub time_s: f64,
    pub bandwidth_hz: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let p = LinkParams::reference();
        LinkSection {
            span_km: p.span_km,
            spacing_km: p.spacing_km,
            amplifiers: p.amplifiers,
            loss_db_per_km: p.loss_db_per_km,
            carrier_hz: p.carrier_hz,
            eta_sp: p.eta_sp,
            planck: p.planck,
            power_w: p.power_w,
            time_s: p.time_s,
            bandwidth_hz: p.bandwidth_hz,
        }
    }
}

impl LinkSection {
    pub fn params(&self) -> Result<LinkParams> {
        LinkParams::new(
            self.span_km,
            self.spacing_km,
            self.amplifiers,
            self.loss_db_per_km,
            self.carrier_hz,
            self.eta_sp,
            self.planck,
            self.power_w,
            self.time_s,
            self.bandwidth_hz,
        )
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `section.key = value` in a raw config table.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let Some((section, field)) = key.split_once('.') else {
        return Err(Error::Config(format!("override '{key}' must have the form section.key")));
    };
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), parse_value(raw));
            Ok(())
        }
        _ => Err(Error::Config(format!("'{section}' is not a section"))),
    }
}

/// Maps `FIBERZS_ENSEMBLE_RUNS` to `ensemble.runs`.
pub fn env_key(name: &str) -> Option<String> {
    let rest = name.strip_prefix(ENV_PREFIX)?;
    let (section, field) = rest.split_once('_')?;
    Some(format!("{}.{}", section.to_ascii_lowercase(), field.to_ascii_lowercase()))
}

impl ExperimentConfig {
    /// Builds the effective config from optional file text, environment
    /// variables and `section.key=value` overrides, later sources winning.
    pub fn load(
        text: Option<&str>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut table: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(config_err)?,
            None => toml::Table::new(),
        };
        let mut env: Vec<(String, String)> =
            env.into_iter().filter_map(|(k, v)| env_key(&k).map(|k| (k, v))).collect();
        env.sort();
        for (k, v) in &env {
            apply_override(&mut table, k, v)?;
        }
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.grid.length > 0.0 && self.grid.dx > 0.0 && self.grid.dx < self.grid.length) {
            return bad(format!("grid needs 0 < dx < length, got dx={} length={}", self.grid.dx, self.grid.length));
        }
        if self.ensemble.runs == 0 {
            return bad("ensemble.runs must be positive".into());
        }
        if self.ensemble.d.is_empty() || self.ensemble.d.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad(format!("ensemble.d must be a non-empty list of positive powers, got {:?}", self.ensemble.d));
        }
        for (name, f) in [
            ("dos.edge_fraction", self.dos.edge_fraction),
            ("spacing.edge_fraction", self.spacing.edge_fraction),
            ("ipr.edge_fraction", self.ipr.edge_fraction),
        ] {
            if !(0.0..0.5).contains(&f) {
                return bad(format!("{name} must lie in [0, 0.5), got {f}"));
            }
        }
        if !(self.noise.sigma2 > 0.0) {
            return bad(format!("noise.sigma2 must be positive, got {}", self.noise.sigma2));
        }
        if self.bz.durations.is_empty() || self.bz.durations.iter().any(|t| !(*t > 0.0)) {
            return bad("bz.durations must be a non-empty list of positive lengths".into());
        }
        self.link.params()?;
        Ok(())
    }

    pub fn d(&self) -> f64 {
        self.ensemble.d[0]
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, with the output directory
    /// cleared since it does not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = PathBuf::new();
        hex(&Sha256::digest(c.to_toml().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
