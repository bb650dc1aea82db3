//! Named, fully populated experiment configurations.

use qimpact_core::classical::ImpactParams;
use qimpact_core::diagnostics::ZeroOneMode;
use qimpact_core::lattice::PotentialSpec;
use qimpact_core::qle::dissipative_preset;

use crate::config::{default_output_dir, ConfigError, DiagnosticsConfig, Experiment, ExperimentConfig, GridConfig, RunConfig, ScanRange};

pub const PRESETS: [&str; 5] = ["unforced-grazing", "forced-grazing", "otoc-scan", "qle-scan", "classical-scan"];

/// Golden-ratio forcing frequency of the forced hard-wall study.
pub fn golden_frequency() -> f64 {
    (5f64.sqrt() + 1.0) / 2.0
}

/// Forcing amplitude that brings the forced hard-wall orbit to grazing.
pub const GRAZING_AMPLITUDE: f64 = 3.0905;

pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    match name {
        "unforced-grazing" => Ok(unforced_grazing()),
        "forced-grazing" => Ok(forced_grazing()),
        "otoc-scan" => Ok(otoc_scan()),
        "qle-scan" => Ok(qle_scan()),
        "classical-scan" => Ok(classical_scan()),
        other => Err(ConfigError::UnknownPreset(other.into())),
    }
}

/// Configuration a bare subcommand runs with.
pub fn default_for(experiment: Experiment) -> ExperimentConfig {
    match experiment {
        Experiment::Eigen => ExperimentConfig {
            run: RunConfig { n_states: 20, numerov_levels: 20, ..RunConfig::default() },
            ..base(experiment, PotentialSpec::hard_wall(0.0))
        },
        Experiment::Evolve => ExperimentConfig { experiment, run: RunConfig { periods: 10, ..forced_grazing().run }, ..forced_grazing() },
        Experiment::Unforced => unforced_grazing(),
        Experiment::Forced => forced_grazing(),
        Experiment::Otoc => otoc_scan(),
        Experiment::Qle => qle_scan(),
        Experiment::Classical => classical_scan(),
        Experiment::Diagnose => ExperimentConfig {
            run: RunConfig { samples_per_period: 64, ..RunConfig::default() },
            ..base(experiment, PotentialSpec::forced_hard_wall(5.0, GRAZING_AMPLITUDE, golden_frequency()))
        },
    }
}

fn base(experiment: Experiment, potential: PotentialSpec) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        potential,
        grid: GridConfig::default(),
        run: RunConfig::default(),
        seed: 0,
        output_dir: default_output_dir(),
        threads: None,
        cache_dir: None,
    }
}

fn unforced_grazing() -> ExperimentConfig {
    ExperimentConfig {
        run: RunConfig {
            walls: vec![Some(0.0), Some(5.0), Some(6.0), None],
            t_end: 1000.0,
            sample_dt: 0.1,
            n_states: 80,
            diagnostics: DiagnosticsConfig {
                transient_fraction: 0.0,
                zero_one_mode: ZeroOneMode::Standard,
                ..DiagnosticsConfig::default()
            },
            ..RunConfig::default()
        },
        ..base(Experiment::Unforced, PotentialSpec::hard_wall(5.0))
    }
}

fn forced_grazing() -> ExperimentConfig {
    let mut run =
        RunConfig { walls: vec![Some(5.0)], periods: 500, steps_per_period: 2048, samples_per_period: 64, ..RunConfig::default() };
    run.packet.mean = 0.0;
    ExperimentConfig { run, ..base(Experiment::Forced, PotentialSpec::forced_hard_wall(5.0, GRAZING_AMPLITUDE, golden_frequency())) }
}

fn otoc_scan() -> ExperimentConfig {
    ExperimentConfig {
        run: RunConfig {
            walls: (1..=12).map(|w| Some(w as f64)).collect(),
            n_states: 300,
            betas: vec![0.5],
            otoc_periods: 100.0,
            samples_per_period: 40,
            fit_start_periods: 0.1,
            truncation_factor: Some(1.5),
            ..RunConfig::default()
        },
        grid: GridConfig { points_per_wavelength: 24.0, ..GridConfig::default() },
        ..base(Experiment::Otoc, PotentialSpec::forced_hard_wall(5.0, GRAZING_AMPLITUDE, golden_frequency()))
    }
}

fn qle_scan() -> ExperimentConfig {
    let (potential, noise) = dissipative_preset(0.5);
    ExperimentConfig {
        run: RunConfig {
            walls: Vec::new(),
            scan: Some(ScanRange { start: 0.15, end: 0.80, step: 0.01 }),
            noise,
            n_realizations: 100,
            periods: 160,
            samples_per_period: 16,
            ..RunConfig::default()
        },
        ..base(Experiment::Qle, potential)
    }
}

/// Unit response amplitude at `omega_f = 2.8`, so the non-impacting orbit
/// grazes at `x_w = 1`.
fn classical_scan() -> ExperimentConfig {
    let omega_f: f64 = 2.8;
    let params = ImpactParams { k: 1.0, m: 1.0, x_w: 1.0, a_f: (1.0 - omega_f * omega_f).abs(), omega_f, restitution: 0.95 };
    let potential = PotentialSpec::forced_hard_wall(params.x_w, params.a_f, params.omega_f);
    ExperimentConfig {
        run: RunConfig {
            walls: Vec::new(),
            scan: Some(ScanRange { start: 0.80, end: 1.10, step: 0.01 }),
            periods: 4000,
            transient_fraction: 0.5,
            restitution: params.restitution,
            descending: true,
            diagnostics: DiagnosticsConfig { zero_one_mode: ZeroOneMode::Standard, ..DiagnosticsConfig::default() },
            ..RunConfig::default()
        },
        ..base(Experiment::Classical, potential)
    }
}
