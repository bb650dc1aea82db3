//! Experiment runner for quantum and classical impact oscillators: JSON
//! configuration, named presets, deterministic parallel orchestration and
//! checksummed artifacts. The numerics live in [`qimpact_core`].

pub mod artifacts;
pub mod cache;
pub mod config;
pub mod fft;
pub mod presets;
pub mod run;

pub use artifacts::RunManifest;
pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use presets::preset;
pub use run::{run, RunError};
