use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qimpact::config::{Experiment, ExperimentConfig};
use qimpact::presets::{default_for, preset};
use qimpact::run;

/// Quantum and classical impact oscillator experiments.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration: unforced-grazing, forced-grazing, otoc-scan,
    /// qle-scan or classical-scan.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: $QIMPACT_OUT, else ./qimpact-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Dotted-path override such as run.periods=100; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => default_for(cli.experiment),
    };
    if cfg.experiment != cli.experiment {
        return Err(format!("configuration is for the {} experiment, not {}", cfg.experiment.name(), cli.experiment.name()).into());
    }
    cfg = cfg.with_overrides(&cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(m) => {
            println!("{}: {} artifacts in {} ({:.1} s)", m.experiment, m.artifacts.len(), cfg.output_dir.display(), m.wall_clock_seconds);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
