//! Experiment configuration: a strict JSON schema with dotted-path overrides.

use std::path::{Path, PathBuf};

use qimpact_core::classical::ImpactParams;
use qimpact_core::diagnostics::ZeroOneMode;
use qimpact_core::lattice::PotentialSpec;
use qimpact_core::qle::{Crossing, LyapunovSettings, NoiseModel, ScanSettings};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("override {0:?} is not of the form key=value")]
    MalformedOverride(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Eigen,
    Evolve,
    Unforced,
    Forced,
    Otoc,
    Qle,
    Classical,
    Diagnose,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Eigen => "eigen",
            Experiment::Evolve => "evolve",
            Experiment::Unforced => "unforced",
            Experiment::Forced => "forced",
            Experiment::Otoc => "otoc",
            Experiment::Qle => "qle",
            Experiment::Classical => "classical",
            Experiment::Diagnose => "diagnose",
        }
    }
}

/// Spatial lattice for wavefunction runs. The right edge is the hard wall
/// when there is one and `far_edge` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub dx: f64,
    pub far_edge: f64,
    /// Resolution of eigenbases sized from their highest level.
    pub points_per_wavelength: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_min: -20.0, dx: 0.05, far_edge: 20.0, points_per_wavelength: 24.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketConfig {
    pub mean: f64,
    pub momentum: f64,
    /// Density variance; `null` selects the minimum-uncertainty width.
    pub variance: Option<f64>,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { mean: -5.0, momentum: 0.0, variance: None }
    }
}

impl PacketConfig {
    pub fn variance_for(&self, spec: &PotentialSpec) -> f64 {
        self.variance.unwrap_or(spec.hbar / (2.0 * (spec.k * spec.m).sqrt()))
    }
}

/// Settings of the time-series diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Leading fraction of a series dropped before analysis.
    pub transient_fraction: f64,
    pub zero_one_mode: ZeroOneMode,
    pub n_c: usize,
    pub embed_dim: usize,
    /// Embedding delay in samples; `null` uses the first autocorrelation minimum.
    pub delay: Option<usize>,
    /// Finite-time window in samples; `null` uses one forcing period.
    pub ftle_window: Option<usize>,
    /// Divergence horizon of the whole-series exponent, in windows.
    pub horizon_windows: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            transient_fraction: 0.1,
            zero_one_mode: ZeroOneMode::Modified,
            n_c: 100,
            embed_dim: 5,
            delay: None,
            ftle_window: None,
            horizon_windows: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Wall positions of the unforced, forced, evolve and OTOC experiments;
    /// `null` means no wall.
    pub walls: Vec<Option<f64>>,
    /// Wall-position scan of the QLE and classical experiments.
    pub scan: Option<ScanRange>,
    /// Explicit positions appended to the scan.
    pub extra_positions: Vec<f64>,
    /// Duration of unforced runs.
    pub t_end: f64,
    /// Sampling interval of unforced runs.
    pub sample_dt: f64,
    /// Forcing periods of forced, evolve, QLE and classical runs.
    pub periods: usize,
    pub steps_per_period: usize,
    /// Entropy or observable samples per forcing period.
    pub samples_per_period: usize,
    pub packet: PacketConfig,
    /// Eigenstates of eigen, unforced and OTOC bases.
    pub n_states: usize,
    /// Levels checked against the shooting oracle in the eigen experiment.
    pub numerov_levels: usize,
    pub betas: Vec<f64>,
    /// OTOC horizon in forcing periods.
    pub otoc_periods: f64,
    /// Growth fits start here, in forcing periods.
    pub fit_start_periods: f64,
    /// Repeat each OTOC with this many times the states; `null` skips it.
    pub truncation_factor: Option<f64>,
    pub noise: NoiseModel,
    pub crossing: Crossing,
    pub n_realizations: usize,
    pub lyapunov: LyapunovSettings,
    pub restitution: f64,
    /// Classical scans sweep from the upper end of the range downwards.
    pub descending: bool,
    pub transient_fraction: f64,
    pub diagnostics: DiagnosticsConfig,
    /// Series analysed by the diagnose experiment: CSV with a header.
    pub input: Option<PathBuf>,
    pub input_column: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            walls: vec![Some(5.0)],
            scan: None,
            extra_positions: Vec::new(),
            t_end: 1000.0,
            sample_dt: 0.1,
            periods: 500,
            steps_per_period: 2048,
            samples_per_period: 64,
            packet: PacketConfig::default(),
            n_states: 80,
            numerov_levels: 10,
            betas: vec![0.5],
            otoc_periods: 100.0,
            fit_start_periods: 0.1,
            truncation_factor: None,
            noise: NoiseModel::new(0.01, 1.0, 3.0),
            crossing: Crossing::Downward,
            n_realizations: 100,
            lyapunov: LyapunovSettings::default(),
            restitution: 0.95,
            descending: true,
            transient_fraction: 0.5,
            diagnostics: DiagnosticsConfig::default(),
            input: None,
            input_column: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `null` uses every available core. Results do not
    /// depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Directory of reusable eigenbases; `null` disables the cache.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

pub(crate) fn default_output_dir() -> PathBuf {
    std::env::var_os("QIMPACT_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("qimpact-out"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Applies `key=value` overrides, where `key` is a dotted path such as
    /// `run.periods` and `value` is JSON (bare words are taken as strings).
    /// The result is re-validated against the schema.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut tree = serde_json::to_value(self)?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::MalformedOverride(item.into()))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            set_path(&mut tree, key.trim(), value)?;
        }
        Ok(serde_json::from_value(tree)?)
    }

    /// Hash input: the configuration without the fields that may not
    /// influence results (output location, thread count, cache).
    pub fn canonical_json(&self) -> String {
        let mut tree = serde_json::to_value(self).expect("configuration serializes");
        if let Value::Object(map) = &mut tree {
            map.remove("output_dir");
            map.remove("threads");
            map.remove("cache_dir");
        }
        tree.to_string()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        self.potential.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let run = &self.run;
        let g = &self.grid;
        if !(g.dx > 0.0) || !(g.points_per_wavelength > 0.0) || !(g.far_edge > g.x_min) {
            return bad("grid needs dx > 0, points_per_wavelength > 0 and far_edge > x_min");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        let d = &run.diagnostics;
        if !(0.0..1.0).contains(&d.transient_fraction) || d.n_c == 0 || d.embed_dim == 0 || d.horizon_windows == 0 {
            return bad("diagnostics need transient_fraction in [0, 1), n_c, embed_dim and horizon_windows > 0");
        }
        let needs_walls = matches!(self.experiment, Experiment::Evolve | Experiment::Unforced | Experiment::Forced | Experiment::Otoc);
        if needs_walls && run.walls.is_empty() {
            return bad("run.walls must list at least one wall position");
        }
        if needs_walls && run.walls.iter().flatten().any(|w| !(w.is_finite() && *w > g.x_min)) {
            return bad("wall positions must be finite and right of grid.x_min");
        }
        match self.experiment {
            Experiment::Unforced if !(run.t_end > 0.0 && run.sample_dt > 0.0) => bad("unforced runs need t_end, sample_dt > 0"),
            Experiment::Forced | Experiment::Evolve if run.periods == 0 || run.steps_per_period == 0 || run.samples_per_period == 0 => {
                bad("forced runs need periods, steps_per_period, samples_per_period > 0")
            }
            Experiment::Forced | Experiment::Evolve if !run.steps_per_period.is_multiple_of(run.samples_per_period) => {
                bad("steps_per_period must be a multiple of samples_per_period")
            }
            Experiment::Eigen | Experiment::Unforced | Experiment::Otoc if run.n_states == 0 => bad("n_states must be positive"),
            Experiment::Otoc if run.betas.is_empty() || run.betas.iter().any(|b| !(*b > 0.0)) => bad("betas must be positive"),
            Experiment::Otoc if !(run.otoc_periods > run.fit_start_periods && run.fit_start_periods >= 0.0) => {
                bad("otoc_periods must exceed fit_start_periods >= 0")
            }
            Experiment::Otoc if run.truncation_factor.is_some_and(|f| !(f > 1.0)) => bad("truncation_factor must exceed 1"),
            Experiment::Qle | Experiment::Classical if run.scan.is_none() && run.extra_positions.is_empty() => {
                bad("run.scan or run.extra_positions must give wall positions")
            }
            Experiment::Qle if run.n_realizations < 2 => bad("n_realizations must be at least 2"),
            Experiment::Qle => run.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string())),
            Experiment::Classical if !(0.0..1.0).contains(&run.transient_fraction) || run.periods == 0 => {
                bad("classical runs need periods > 0 and transient_fraction in [0, 1)")
            }
            Experiment::Classical => self.impact_params(0.0).validate().map_err(|e| ConfigError::Invalid(e.to_string())),
            Experiment::Diagnose if run.input.is_none() => bad("diagnose needs run.input"),
            _ => Ok(()),
        }
    }

    /// QLE scan settings assembled from the run section.
    pub fn qle_settings(&self) -> ScanSettings {
        ScanSettings {
            lyapunov: self.run.lyapunov,
            n_realizations: self.run.n_realizations,
            periods: self.run.periods,
            samples_per_period: self.run.samples_per_period,
            n_c: self.run.diagnostics.n_c,
            crossing: self.run.crossing,
        }
    }

    pub fn impact_params(&self, x_w: f64) -> ImpactParams {
        let p = &self.potential;
        ImpactParams { k: p.k, m: p.m, x_w, a_f: p.a_f, omega_f: p.omega_f, restitution: self.run.restitution }
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(ConfigError::Invalid(format!("{key}: {part} is not inside an object")));
        };
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map.entry(*part).or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    Err(ConfigError::MalformedOverride(key.into()))
}
