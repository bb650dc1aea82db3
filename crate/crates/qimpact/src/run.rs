//! Experiment orchestration: composes the core modules, schedules
//! independent tasks on a thread pool and writes the artifacts.

use std::f64::consts::PI;
use std::fmt::Display;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use qimpact_core::classical::{bifurcation_classical, wall_positions, ClassicalScanSettings};
use qimpact_core::diagnostics::{
    autocorrelation_first_minimum, finite_time_lyapunov, largest_lyapunov, power_spectrum, spectral_distribution, zero_one_test,
    FtleDistribution, SpectralDistribution, Spectrum, Taper, ZeroOneMode, ZeroOneResult,
};
use qimpact_core::lattice::{gaussian_packet, Grid, PotentialSpec, WaveState};
use qimpact_core::observables::{entropy, expectations, stroboscopic_density, TimeSeries};
use qimpact_core::otoc::{growth_fit, relative_change, thermal_cutoff, thermal_with, Growth, OtocCurve, OtocOperator};
use qimpact_core::propagator::{evolve_static, Propagator};
use qimpact_core::qle::{bifurcation_point, scan_positions};
use qimpact_core::spectral::{basis_grid, numerov_verify};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{sha256_hex, ArtifactSink, Cell, RunManifest};
use crate::cache::cached_eigensolve;
use crate::config::{ConfigError, DiagnosticsConfig, Experiment, ExperimentConfig};
use crate::fft::RustFft;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {message}")]
    Module { context: String, message: String },
    #[error("artifact output failed: {0}")]
    Io(#[from] std::io::Error),
}

fn module<E: Display>(context: impl Into<String>) -> impl FnOnce(E) -> RunError {
    let context = context.into();
    move |e| RunError::Module { context, message: e.to_string() }
}

/// Seed of task `index` derived from the run seed (splitmix64 finalizer).
pub fn task_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs the configured experiment and writes its artifacts and manifest
/// into `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, RunError> {
    config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.threads.unwrap_or(0)).build().map_err(module("thread pool"))?;
    let mut sink = ArtifactSink::create(&config.output_dir)?;
    let canonical: Value = serde_json::from_str(&config.canonical_json()).expect("canonical form is JSON");
    sink.json("config.json", &canonical)?;
    pool.install(|| match config.experiment {
        Experiment::Eigen => eigen(config, &mut sink),
        Experiment::Evolve => evolve(config, &mut sink),
        Experiment::Unforced => unforced(config, &mut sink),
        Experiment::Forced => forced(config, &mut sink),
        Experiment::Otoc => otoc(config, &mut sink),
        Experiment::Qle => qle(config, &mut sink),
        Experiment::Classical => classical(config, &mut sink),
        Experiment::Diagnose => diagnose(config, &mut sink),
    })?;
    let hash = sha256_hex(config.canonical_json().as_bytes());
    Ok(sink.finish(config.experiment.name(), hash, started.elapsed().as_secs_f64())?)
}

fn wall_spec(config: &ExperimentConfig, wall: Option<f64>) -> PotentialSpec {
    PotentialSpec { x_w: wall.unwrap_or(f64::INFINITY), ..config.potential }
}

/// Lattice ending at the hard wall, or at `far_edge` without one.
fn lattice_for(config: &ExperimentConfig, spec: &PotentialSpec) -> Result<Grid, RunError> {
    let right = if spec.is_hard() && spec.x_w.is_finite() { spec.x_w } else { config.grid.far_edge };
    Grid::ending_at(config.grid.x_min, right, config.grid.dx).map_err(module("grid"))
}

fn initial_packet(config: &ExperimentConfig, spec: &PotentialSpec, grid: &Grid) -> Result<WaveState, RunError> {
    let p = &config.run.packet;
    gaussian_packet(grid, p.mean, p.variance_for(spec), p.momentum, spec.hbar).map_err(module("initial packet"))
}

fn wall_label(wall: Option<f64>) -> String {
    wall.map_or_else(|| "none".into(), |w| w.to_string())
}

fn cache_dir(config: &ExperimentConfig) -> Option<&Path> {
    config.cache_dir.as_deref()
}

/// Summary of the diagnostic suite applied to one series. Diagnostics that
/// do not apply to the series (too few peaks, degenerate embedding) are
/// reported as `null` with the reason in `notes`.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub samples: usize,
    pub mean: f64,
    pub std: f64,
    pub zero_one_mode: ZeroOneMode,
    pub k_median: Option<f64>,
    pub peaks: usize,
    pub dominant_peaks: usize,
    pub peaks_above_one_percent: usize,
    pub distribution_exponent: Option<f64>,
    pub distribution_stderr: Option<f64>,
    pub delay: usize,
    pub ftle_window: usize,
    pub ftle_positive_fraction: Option<f64>,
    pub ftle_mean: Option<f64>,
    pub largest_exponent: Option<f64>,
    pub notes: Vec<String>,
}

pub struct SeriesAnalysis {
    pub report: SeriesReport,
    pub spectrum: Spectrum,
    pub distribution: Option<SpectralDistribution>,
    pub ftle: Option<FtleDistribution>,
    pub zero_one: Option<ZeroOneResult>,
}

/// Spectrum, spectral distribution, 0-1 test and Lyapunov estimates of a
/// series; `period_samples` is the default finite-time window.
pub fn analyse(series: &TimeSeries, period_samples: usize, d: &DiagnosticsConfig, seed: u64) -> Result<SeriesAnalysis, RunError> {
    let mut fft = RustFft::new();
    let mut notes = Vec::new();
    let n = series.len();
    let mean = series.values.iter().sum::<f64>() / n.max(1) as f64;
    let std = (series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let spectrum = power_spectrum(series, Taper::Hann, &mut fft).map_err(module("power spectrum"))?;
    let distribution = spectral_distribution(&spectrum, None).map_err(|e| notes.push(format!("spectral distribution: {e}"))).ok();
    let zero_one = zero_one_test(series, d.zero_one_mode, d.n_c, seed, &mut fft).map_err(|e| notes.push(format!("0-1 test: {e}"))).ok();
    let delay = d.delay.unwrap_or_else(|| autocorrelation_first_minimum(&series.values)).max(1);
    let window = d.ftle_window.unwrap_or(period_samples).max(1);
    let ftle = finite_time_lyapunov(series, d.embed_dim, delay, window).map_err(|e| notes.push(format!("finite-time exponents: {e}"))).ok();
    let largest = largest_lyapunov(series, d.embed_dim, delay, window * d.horizon_windows)
        .map_err(|e| notes.push(format!("largest exponent: {e}")))
        .ok();
    let report = SeriesReport {
        samples: n,
        mean,
        std,
        zero_one_mode: d.zero_one_mode,
        k_median: zero_one.as_ref().map(|z| z.k_median),
        peaks: spectrum.peak_indices().len(),
        dominant_peaks: spectrum.dominant_peaks(),
        peaks_above_one_percent: spectrum.count_peaks_above(0.01),
        distribution_exponent: distribution.as_ref().map(|s| s.exponent),
        distribution_stderr: distribution.as_ref().map(|s| s.stderr),
        delay,
        ftle_window: window,
        ftle_positive_fraction: ftle.as_ref().map(|f| f.positive_fraction),
        ftle_mean: ftle.as_ref().map(|f| f.mean()),
        largest_exponent: largest,
        notes,
    };
    Ok(SeriesAnalysis { report, spectrum, distribution, ftle, zero_one })
}

fn write_analysis(sink: &mut ArtifactSink, prefix: &str, a: &SeriesAnalysis) -> std::io::Result<()> {
    let s = &a.spectrum;
    sink.csv(
        &format!("{prefix}_spectrum.csv"),
        &["frequency [cycles per time unit]", "amplitude [series units]"],
        s.freqs.iter().zip(&s.amps).map(|(&f, &v)| vec![f.into(), v.into()]),
    )?;
    if let Some(d) = &a.distribution {
        sink.csv(
            &format!("{prefix}_peak_counts.csv"),
            &["threshold [series units]", "peaks above threshold"],
            d.sigma.iter().zip(&d.counts).map(|(&s, &c)| vec![s.into(), c.into()]),
        )?;
    }
    if let Some(f) = &a.ftle {
        sink.csv(
            &format!("{prefix}_ftle.csv"),
            &["pair", "exponent [1/time]"],
            f.exponents.iter().enumerate().map(|(i, &e)| vec![i.into(), e.into()]),
        )?;
    }
    if let Some(z) = &a.zero_one {
        sink.csv(
            &format!("{prefix}_zero_one.csv"),
            &["c [rad]", "K"],
            z.c_values.iter().zip(&z.k_values).map(|(&c, &k)| vec![c.into(), k.into()]),
        )?;
    }
    Ok(())
}

fn series_csv(sink: &mut ArtifactSink, name: &str, column: &str, s: &TimeSeries) -> std::io::Result<()> {
    sink.csv(name, &["t [time]", column], s.values.iter().enumerate().map(|(i, &v)| vec![s.time(i).into(), v.into()]))
}

fn eigen(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let spec = config.potential.unforced();
    let grid = lattice_for(config, &spec)?;
    let basis = cached_eigensolve(cache_dir(config), &spec, &grid, config.run.n_states).map_err(module("eigensolve"))?;
    sink.csv(
        "eigen_energies.csv",
        &["level", "energy [hbar omega0]"],
        basis.energies.iter().enumerate().map(|(n, &e)| vec![n.into(), e.into()]),
    )?;
    let shown = basis.n_states().min(10);
    let mut header = vec!["x [length]".to_string()];
    header.extend((0..shown).map(|n| format!("phi_{n} [length^-1/2]")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.csv(
        "eigen_states.csv",
        &header,
        (0..grid.n()).map(|i| {
            let mut row = vec![Cell::F(grid.x(i))];
            row.extend(basis.states[..shown].iter().map(|phi| Cell::F(phi[i])));
            row
        }),
    )?;
    let mut checks = Vec::new();
    if spec.is_hard() {
        for (n, &e) in basis.energies.iter().enumerate().take(config.run.numerov_levels) {
            let shot = numerov_verify(&spec, &grid, e).map_err(module(format!("shooting check of level {n}")))?;
            checks.push((n, e, shot));
        }
        sink.csv(
            "eigen_shooting_check.csv",
            &["level", "energy [hbar omega0]", "shooting energy [hbar omega0]", "difference [hbar omega0]"],
            checks.iter().map(|&(n, e, s)| vec![n.into(), e.into(), s.into(), (e - s).abs().into()]),
        )?;
    }
    let worst = checks.iter().map(|&(_, e, s)| (e - s).abs()).fold(0.0, f64::max);
    sink.json(
        "eigen_summary.json",
        &json!({
            "grid_points": grid.n(),
            "dx": grid.dx(),
            "n_states": basis.n_states(),
            "lowest_energies": &basis.energies[..basis.n_states().min(10)],
            "shooting_levels_checked": checks.len(),
            "max_shooting_difference": worst,
        }),
    )?;
    Ok(())
}

fn forcing_period(spec: &PotentialSpec) -> f64 {
    2.0 * PI / spec.omega_f
}

fn evolve(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let results: Vec<Result<_, RunError>> = run
        .walls
        .par_iter()
        .map(|&wall| {
            let spec = wall_spec(config, wall);
            let ctx = format!("evolve x_w={}", wall_label(wall));
            let grid = lattice_for(config, &spec)?;
            let mut psi = initial_packet(config, &spec, &grid)?;
            let mut prop = Propagator::new(&spec, &grid).map_err(module(ctx.clone()))?;
            let period = forcing_period(&spec);
            let dt = period / run.steps_per_period as f64;
            let mut rows = Vec::new();
            prop.run(&mut psi, run.periods as f64 * period, dt, run.steps_per_period / run.samples_per_period, |s| {
                let e = expectations(s, spec.hbar);
                rows.push([s.t, s.norm_sqr(), e.x, e.p, e.x2 - e.x * e.x, e.p2 - e.p * e.p, entropy(s)]);
                ControlFlow::Continue(())
            })
            .map_err(module(ctx))?;
            Ok((wall, grid.n(), rows))
        })
        .collect();
    let mut summary = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (wall, points, rows) = r?;
        sink.csv(
            &format!("evolve_w{i}.csv"),
            &["t [time]", "norm", "<x> [length]", "<p> [momentum]", "var x [length^2]", "var p [momentum^2]", "entropy [nats]"],
            rows.iter().map(|r| r.iter().map(|&v| Cell::F(v)).collect()),
        )?;
        let drift = rows.iter().map(|r| (r[1] - 1.0).abs()).fold(0.0, f64::max);
        summary.push(json!({ "x_w": wall, "grid_points": points, "samples": rows.len(), "max_norm_deviation": drift }));
    }
    sink.json("evolve_summary.json", &json!({ "walls": summary }))?;
    Ok(())
}

const STATIC_CHUNK: usize = 256;

fn unforced(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let results: Vec<Result<_, RunError>> = run
        .walls
        .par_iter()
        .enumerate()
        .map(|(i, &wall)| {
            let spec = wall_spec(config, wall).unforced();
            let ctx = format!("unforced x_w={}", wall_label(wall));
            let grid = lattice_for(config, &spec)?;
            let psi0 = initial_packet(config, &spec, &grid)?;
            let basis = cached_eigensolve(cache_dir(config), &spec, &grid, run.n_states).map_err(module(ctx.clone()))?;
            let captured: f64 = basis.project(&psi0).iter().map(|c| c.norm_sqr()).sum();
            let n = (run.t_end / run.sample_dt).round() as usize;
            let times: Vec<f64> = (0..n).map(|j| j as f64 * run.sample_dt).collect();
            let mut values = Vec::with_capacity(n);
            for chunk in times.chunks(STATIC_CHUNK) {
                let states = evolve_static(&basis, &psi0, chunk).map_err(module(ctx.clone()))?;
                values.extend(states.iter().map(entropy));
            }
            let series = TimeSeries::new(values, run.sample_dt, 0.0).map_err(module(ctx.clone()))?;
            let body = series.skip_fraction(run.diagnostics.transient_fraction);
            let period_samples = (2.0 * PI / spec.omega0() / run.sample_dt).round() as usize;
            let analysis = analyse(&body, period_samples, &run.diagnostics, task_seed(config.seed, i as u64))
                .map_err(|e| RunError::Module { context: ctx, message: e.to_string() })?;
            Ok((wall, grid.n(), captured, series, analysis))
        })
        .collect();
    let mut summary = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (wall, points, captured, series, analysis) = r?;
        series_csv(sink, &format!("unforced_w{i}_entropy.csv"), "entropy [nats]", &series)?;
        write_analysis(sink, &format!("unforced_w{i}"), &analysis)?;
        summary.push(json!({
            "x_w": wall,
            "grid_points": points,
            "basis_states": run.n_states,
            "captured_norm": captured,
            "diagnostics": analysis.report,
        }));
    }
    sink.json("unforced_summary.json", &json!({ "walls": summary }))?;
    Ok(())
}

fn forced(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let results: Vec<Result<_, RunError>> = run
        .walls
        .par_iter()
        .enumerate()
        .map(|(i, &wall)| {
            let spec = wall_spec(config, wall);
            let ctx = format!("forced x_w={}", wall_label(wall));
            let grid = lattice_for(config, &spec)?;
            let mut psi = initial_packet(config, &spec, &grid)?;
            let mut prop = Propagator::new(&spec, &grid).map_err(module(ctx.clone()))?;
            let period = forcing_period(&spec);
            let spp = run.samples_per_period;
            let mut values = Vec::with_capacity(run.periods * spp + 1);
            let mut strobe = Vec::with_capacity(run.periods + 1);
            let mut sample = 0usize;
            prop.run(&mut psi, run.periods as f64 * period, period / run.steps_per_period as f64, run.steps_per_period / spp, |s| {
                values.push(entropy(s));
                if sample.is_multiple_of(spp) {
                    strobe.push(s.clone());
                }
                sample += 1;
                ControlFlow::Continue(())
            })
            .map_err(module(ctx.clone()))?;
            let norm_deviation = (psi.norm_sqr() - 1.0).abs();
            let skip = (run.diagnostics.transient_fraction * run.periods as f64).round() as usize;
            let density = stroboscopic_density(&strobe, skip).map_err(module(ctx.clone()))?;
            let series = TimeSeries::new(values, period / spp as f64, 0.0).map_err(module(ctx.clone()))?;
            let body = series.skip_fraction(run.diagnostics.transient_fraction);
            let analysis = analyse(&body, spp, &run.diagnostics, task_seed(config.seed, i as u64))
                .map_err(|e| RunError::Module { context: ctx, message: e.to_string() })?;
            Ok((wall, grid, norm_deviation, density, series, analysis))
        })
        .collect();
    let mut summary = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (wall, grid, norm_deviation, density, series, analysis) = r?;
        series_csv(sink, &format!("forced_w{i}_entropy.csv"), "entropy [nats]", &series)?;
        sink.csv(
            &format!("forced_w{i}_strobe_density.csv"),
            &["x [length]", "mean stroboscopic density [1/length]"],
            density.iter().enumerate().map(|(j, &d)| vec![grid.x(j).into(), d.into()]),
        )?;
        write_analysis(sink, &format!("forced_w{i}"), &analysis)?;
        summary.push(json!({
            "x_w": wall,
            "grid_points": grid.n(),
            "final_norm_deviation": norm_deviation,
            "diagnostics": analysis.report,
        }));
    }
    sink.json("forced_summary.json", &json!({ "walls": summary }))?;
    Ok(())
}

/// Growth classification of one thermal correlator.
#[derive(Debug, Clone, Serialize)]
pub struct OtocEntry {
    pub x_w: Option<f64>,
    pub beta: f64,
    pub n_states: usize,
    pub n_thermal: usize,
    /// `fitted`, `periodic` or `fit_failed`.
    pub growth: String,
    pub exponent: Option<f64>,
    pub stderr: Option<f64>,
    pub power_rss: Option<f64>,
    pub exponential_rss: Option<f64>,
    pub power_law_preferred: Option<bool>,
    pub window: Option<(f64, f64)>,
    pub truncation_change: Option<f64>,
    pub note: Option<String>,
}

fn otoc(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let period = forcing_period(&config.potential);
    let spp = run.samples_per_period as f64;
    let count = (run.otoc_periods * spp).round() as usize;
    let times: Vec<f64> = (0..=count).map(|j| j as f64 * period / spp).collect();
    let t_start = run.fit_start_periods * period;
    let results: Vec<Result<Vec<(OtocEntry, OtocCurve)>, RunError>> = run
        .walls
        .par_iter()
        .map(|&wall| {
            let spec = wall_spec(config, wall).unforced();
            let ctx = format!("otoc x_w={}", wall_label(wall));
            let solve = |n: usize| -> Result<OtocOperator, RunError> {
                let grid = basis_grid(&spec, n, config.grid.points_per_wavelength).map_err(module(ctx.clone()))?;
                let basis = cached_eigensolve(cache_dir(config), &spec, &grid, n).map_err(module(ctx.clone()))?;
                Ok(OtocOperator::new(&basis))
            };
            let op = solve(run.n_states)?;
            let larger = run.truncation_factor.map(|f| solve((run.n_states as f64 * f).ceil() as usize)).transpose()?;
            run.betas
                .iter()
                .map(|&beta| {
                    let n_thermal = thermal_cutoff(op.energies(), beta).ok_or_else(|| RunError::Module {
                        context: ctx.clone(),
                        message: format!("basis too small for the thermal weights at beta={beta}"),
                    })?;
                    let curve = thermal_with(&op, beta, &times, n_thermal).map_err(module(ctx.clone()))?;
                    let mut entry = OtocEntry {
                        x_w: wall,
                        beta,
                        n_states: run.n_states,
                        n_thermal,
                        growth: "periodic".into(),
                        exponent: None,
                        stderr: None,
                        power_rss: None,
                        exponential_rss: None,
                        power_law_preferred: None,
                        window: None,
                        truncation_change: None,
                        note: None,
                    };
                    match growth_fit(&curve, t_start) {
                        Ok(Growth::Fitted(fit)) => {
                            entry.growth = "fitted".into();
                            entry.exponent = Some(fit.exponent);
                            entry.stderr = Some(fit.stderr);
                            entry.power_rss = Some(fit.power_rss);
                            entry.exponential_rss = Some(fit.exponential_rss);
                            entry.power_law_preferred = Some(fit.power_law_preferred());
                            entry.window = Some(fit.window);
                        }
                        Ok(Growth::Periodic) => {}
                        Err(e) => {
                            entry.growth = "fit_failed".into();
                            entry.note = Some(e.to_string());
                        }
                    }
                    if let Some(big) = &larger {
                        let other = thermal_with(big, beta, &times, n_thermal).map_err(module(ctx.clone()))?;
                        let window = entry.window.unwrap_or((t_start, *times.last().expect("nonempty times")));
                        entry.truncation_change = Some(relative_change(&curve, &other, window));
                    }
                    Ok((entry, curve))
                })
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        for (j, (entry, curve)) in r?.into_iter().enumerate() {
            sink.csv(
                &format!("otoc_w{i}_b{j}.csv"),
                &["t [time]", "t [forcing periods]", "C_T [hbar^2]"],
                curve.times.iter().zip(&curve.values).map(|(&t, &c)| vec![t.into(), (t / period).into(), c.into()]),
            )?;
            entries.push(entry);
        }
    }
    let opt = |v: Option<f64>| Cell::F(v.unwrap_or(f64::NAN));
    sink.csv(
        "otoc_scan.csv",
        &[
            "x_w [length]",
            "beta [1/energy]",
            "n_states",
            "n_thermal",
            "exponent",
            "stderr",
            "power-law rss",
            "exponential rss",
            "window start [time]",
            "window end [time]",
            "truncation change",
        ],
        entries.iter().map(|e| {
            vec![
                opt(e.x_w),
                e.beta.into(),
                e.n_states.into(),
                e.n_thermal.into(),
                opt(e.exponent),
                opt(e.stderr),
                opt(e.power_rss),
                opt(e.exponential_rss),
                opt(e.window.map(|w| w.0)),
                opt(e.window.map(|w| w.1)),
                opt(e.truncation_change),
            ]
        }),
    )?;
    sink.json("otoc_summary.json", &json!({ "forcing_period": period, "entries": entries }))?;
    Ok(())
}

fn scan_list(config: &ExperimentConfig) -> Result<Vec<f64>, RunError> {
    let mut positions = match config.run.scan {
        Some(s) => wall_positions(s.start, s.end, s.step).map_err(module("wall-position scan"))?,
        None => Vec::new(),
    };
    positions.extend(&config.run.extra_positions);
    Ok(positions)
}

fn qle(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let positions = match run.scan {
        Some(s) => scan_positions(s.start, s.end, s.step).map_err(module("wall-position scan"))?,
        None => Vec::new(),
    };
    let positions: Vec<f64> = positions.into_iter().chain(run.extra_positions.iter().copied()).collect();
    let settings = config.qle_settings();
    let points: Vec<Result<_, RunError>> = positions
        .par_iter()
        .enumerate()
        .map(|(i, &x_w)| {
            bifurcation_point(&config.potential, &run.noise, &settings, x_w, config.seed, i as u64, &mut RustFft::new())
                .map_err(module(format!("qle x_w={x_w}")))
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    sink.csv(
        "qle_section.csv",
        &["x_w [length]", "crossing", "X at P=0 [length]"],
        points.iter().flat_map(|p| p.section.iter().enumerate().map(|(j, &x)| vec![p.x_w.into(), j.into(), x.into()])),
    )?;
    sink.csv(
        "qle_lyapunov.csv",
        &["x_w [length]", "bounded realization", "lambda_max [1/time]"],
        points.iter().flat_map(|p| p.lambdas.iter().enumerate().map(|(j, &l)| vec![p.x_w.into(), j.into(), l.into()])),
    )?;
    sink.csv(
        "qle_scan.csv",
        &[
            "x_w [length]",
            "mean lambda_max [1/time]",
            "std lambda_max [1/time]",
            "bounded",
            "moment blowups",
            "K_median",
            "section blown up",
        ],
        points.iter().map(|p| {
            vec![
                p.x_w.into(),
                p.mean_lambda.into(),
                p.std_lambda.into(),
                p.lambdas.len().into(),
                p.blown_up.into(),
                p.k_median.into(),
                p.section_blown_up.into(),
            ]
        }),
    )?;
    let summary: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "x_w": p.x_w,
                "mean_lambda": p.mean_lambda,
                "std_lambda": p.std_lambda,
                "bounded_realizations": p.lambdas.len(),
                "moment_blowups": p.blown_up,
                "k_median": p.k_median,
                "section_points": p.section.len(),
                "section_blown_up": p.section_blown_up,
            })
        })
        .collect();
    sink.json("qle_summary.json", &json!({ "points": summary }))?;
    Ok(())
}

fn classical(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let mut positions = scan_list(config)?;
    positions.sort_by(f64::total_cmp);
    if run.descending {
        positions.reverse();
    }
    let base = config.impact_params(positions[0]);
    let settings = ClassicalScanSettings { periods: run.periods, transient_fraction: run.transient_fraction };
    let points = bifurcation_classical(&base, &positions, &settings).map_err(module("classical scan"))?;
    // the 0-1 test runs on the gap to the wall, which stays informative when
    // the orbit sits at the origin without impacts
    let gaps: Vec<Result<Option<f64>, RunError>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let gap: Vec<f64> = p.strobe.iter().map(|x| p.x_w - x).collect();
            let series = TimeSeries::new(gap, base.forcing_period(), 0.0).map_err(module("classical strobe"))?;
            let d = &run.diagnostics;
            Ok(zero_one_test(&series, d.zero_one_mode, d.n_c, task_seed(config.seed, i as u64), &mut RustFft::new())
                .ok()
                .map(|z| z.k_median))
        })
        .collect();
    let gaps = gaps.into_iter().collect::<Result<Vec<_>, _>>()?;
    sink.csv(
        "classical.csv",
        &["x_w [length]", "sample", "x_strobe [length]", "lambda_max [1/time]"],
        points.iter().flat_map(|p| p.strobe.iter().enumerate().map(|(j, &x)| vec![p.x_w.into(), j.into(), x.into(), p.lambda.into()])),
    )?;
    sink.csv(
        "classical_scan.csv",
        &["x_w [length]", "lambda_max [1/time]", "strobe spread [length]", "impacts", "cold start", "K_median of wall gap"],
        points.iter().zip(&gaps).map(|(p, k)| {
            vec![p.x_w.into(), p.lambda.into(), p.spread().into(), p.impacts.into(), p.cold_start.into(), k.unwrap_or(f64::NAN).into()]
        }),
    )?;
    let agree = points.iter().zip(&gaps).filter(|(p, k)| k.is_some_and(|k| (p.lambda > 1e-3) == (k > 0.5))).count();
    let summary: Vec<Value> = points
        .iter()
        .zip(&gaps)
        .map(|(p, k)| {
            json!({
                "x_w": p.x_w,
                "lambda_max": p.lambda,
                "strobe_spread": p.spread(),
                "impacts": p.impacts,
                "cold_start": p.cold_start,
                "k_median_gap": k,
            })
        })
        .collect();
    sink.json(
        "classical_summary.json",
        &json!({
            "forcing_period": base.forcing_period(),
            "response_amplitude": base.response_amplitude(),
            "sign_agreement": agree as f64 / points.len() as f64,
            "points": summary,
        }),
    )?;
    Ok(())
}

/// Reads column `column` of a CSV with one header line; the first column
/// is taken as time.
pub fn read_series(path: &Path, column: usize) -> Result<TimeSeries, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.into(), source: e })?;
    let ctx = format!("reading {}", path.display());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |k: usize| -> Result<f64, RunError> {
            fields
                .get(k)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| RunError::Module { context: ctx.clone(), message: format!("line {}: no number in column {k}", line_no + 1) })
        };
        times.push(parse(0)?);
        values.push(parse(column)?);
    }
    if times.len() < 2 {
        return Err(RunError::Module { context: ctx, message: "fewer than two samples".into() });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    TimeSeries::new(values, dt, times[0]).map_err(module(ctx))
}

fn diagnose(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<(), RunError> {
    let run = &config.run;
    let path = run.input.as_deref().expect("validated");
    let series = read_series(path, run.input_column)?;
    let body = series.skip_fraction(run.diagnostics.transient_fraction);
    let analysis = analyse(&body, run.samples_per_period, &run.diagnostics, task_seed(config.seed, 0))?;
    write_analysis(sink, "diagnose", &analysis)?;
    sink.json(
        "diagnose_summary.json",
        &json!({ "input": path.display().to_string(), "sample_interval": series.dt_sample, "diagnostics": analysis.report }),
    )?;
    Ok(())
}
