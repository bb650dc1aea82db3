//! End-to-end acceptance checks. Each test prints one
//! `criterion N: PASS|FAIL` line with the measured values before asserting.
//!
//! The suite takes tens of minutes, so every test is ignored by default:
//!
//! ```text
//! cargo test --release -p qimpact --test acceptance -- --ignored --nocapture --test-threads 1
//! ```

use core::f64::consts::PI;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use qimpact::config::ExperimentConfig;
use qimpact::presets::{golden_frequency, preset, GRAZING_AMPLITUDE};
use qimpact::{run, RunManifest};
use qimpact_core::classical::{simulate_impact, ClassicalState, ImpactParams};
use qimpact_core::lattice::{gaussian_packet, Grid, PotentialSpec, WaveState};
use qimpact_core::otoc::{thermal_cutoff, thermal_with, OtocOperator};
use qimpact_core::propagator::{evolve, CfetCoefficients, Propagator, PropagatorError};
use qimpact_core::qle::{dissipative_preset, qle_step, NoiseModel, QleIntegrator, QleState};
use qimpact_core::rng;
use qimpact_core::spectral::{basis_grid, eigensolve, numerov_verify};
use serde_json::Value;
use tempfile::TempDir;

const EIGEN_TOL: f64 = 1e-6;
const EIGEN_BUDGET: Duration = Duration::from_secs(60);
const DRIVEN_TOL: f64 = 1e-6;
const ORDER_RANGE: (f64, f64) = (3.6, 4.4);
const NORM_DRIFT_TOL: f64 = 1e-9;
const PROPAGATOR_BUDGET: Duration = Duration::from_secs(5 * 60);
const REGULAR_K: f64 = 0.1;
const MAX_DOMINANT_REGULAR: usize = 3;
const MIN_PEAKS_GRAZING: usize = 20;
const UNFORCED_BUDGET: Duration = Duration::from_secs(10 * 60);
const EXPONENT_TARGET: f64 = -2.0;
const EXPONENT_TOL: f64 = 0.3;
const K_TARGET: f64 = 0.46;
const K_TOL: f64 = 0.15;
const MIN_POSITIVE_FRACTION: f64 = 0.05;
const FORCED_BUDGET: Duration = Duration::from_secs(30 * 60);
const HARMONIC_OTOC_TOL: f64 = 1e-4;
const OTOC_ZERO_TOL: f64 = 1e-6;
const TRUNCATION_TOL: f64 = 0.01;
const OTOC_BUDGET: Duration = Duration::from_secs(60 * 60);
const CHAOTIC_SHARE: f64 = 0.8;
const CHAOTIC_K: f64 = 0.8;
const REGULAR_QLE_K: f64 = 0.2;
const QLE_ENERGY_TOL: f64 = 1e-6;
const QLE_DETERMINANT_TOL: f64 = 1e-8;
const QLE_BUDGET: Duration = Duration::from_secs(60 * 60);
const ELASTIC_TOL: f64 = 1e-8;
const CLOSED_SPREAD: f64 = 1e-9;
const OPEN_SPREAD: f64 = 1.0;
const CLASSICAL_BUDGET: Duration = Duration::from_secs(10 * 60);

/// Prints the verdict line and fails the test on any failed check.
fn verdict(n: usize, checks: &[(&str, bool, String)]) {
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks.iter().map(|(name, ok, v)| format!("{name}={v}{}", if *ok { "" } else { " (fail)" })).collect();
    println!("criterion {n}: {} {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
    assert!(pass, "criterion {n} failed");
}

fn within_budget(start: Instant, budget: Duration) -> (&'static str, bool, String) {
    let e = start.elapsed();
    ("runtime", e <= budget, format!("{:.1}s/{}s", e.as_secs_f64(), budget.as_secs()))
}

fn execute(cfg: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> RunManifest {
    run(&ExperimentConfig { output_dir: dir.into(), threads, ..cfg.clone() }).unwrap()
}

fn summary(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn mean_x(s: &WaveState) -> f64 {
    s.psi.iter().enumerate().map(|(i, z)| s.grid.x(i) * z.norm_sqr()).sum::<f64>() * s.grid.dx()
}

fn l2_distance(a: &WaveState, b: &WaveState) -> f64 {
    (a.psi.iter().zip(&b.psi).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>() * a.grid.dx()).sqrt()
}

/// `<x>` of `x'' = -x - a_f sin(w_f t)` from `x(0) = x0`, `x'(0) = p0`.
fn driven_classical(x0: f64, p0: f64, a_f: f64, w_f: f64, t: f64) -> f64 {
    let xp = -a_f / (1.0 - w_f * w_f);
    x0 * t.cos() + (p0 - xp * w_f) * t.sin() + xp * (w_f * t).sin()
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_1_eigensolver() {
    let start = Instant::now();
    let levels = 21;
    let mut worst = [0.0f64; 3];
    // full oscillator: n + 1/2; half oscillator keeps the odd states
    let cases = [
        (PotentialSpec::hard_wall(f64::INFINITY), Grid::new(-12.0, 12.0, 4096).unwrap(), 1.0, 0.5),
        (PotentialSpec::hard_wall(0.0), Grid::new(-12.0, 0.0, 4096).unwrap(), 2.0, 1.5),
    ];
    for (c, (spec, grid, spacing, offset)) in cases.iter().enumerate() {
        let basis = eigensolve(spec, grid, levels).unwrap();
        for (n, &e) in basis.energies.iter().enumerate() {
            worst[c] = worst[c].max((e - (offset + spacing * n as f64)).abs());
            worst[2] = worst[2].max((numerov_verify(spec, grid, e).unwrap() - e).abs());
        }
    }
    verdict(
        1,
        &[
            ("harmonic", worst[0] < EIGEN_TOL, format!("{:.2e}", worst[0])),
            ("half", worst[1] < EIGEN_TOL, format!("{:.2e}", worst[1])),
            ("numerov", worst[2] < EIGEN_TOL, format!("{:.2e}", worst[2])),
            within_budget(start, EIGEN_BUDGET),
        ],
    );
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_2_propagator() {
    let start = Instant::now();
    let c = CfetCoefficients::fourth_order();
    // 2 (37/240 - 1/30 + 37/240 - 11/360) + 23/45 over the common denominator 720
    let exact = 2 * (111 - 24 + 111 - 22) + 368;
    let identity = exact == 720 && (c.weight_sum() - 1.0).abs() <= f64::EPSILON;

    let grid = Grid::new(-16.0, 16.0, 801).unwrap();
    let omega_f = golden_frequency();
    let period = 2.0 * PI / omega_f;
    let spec = PotentialSpec::forced_hard_wall(f64::INFINITY, 1.0, omega_f);
    let psi0 = gaussian_packet(&grid, -2.0, 0.5, 0.5, 1.0).unwrap();
    let mut prop = Propagator::new(&spec, &grid).unwrap();
    let mut state = psi0.clone();
    let dt = period / 2000.0;
    let (mut tracking, mut drift) = (0.0f64, 0.0f64);
    let mut guard_tripped = false;
    for k in 1..=20_000 {
        let before = state.norm_sqr();
        match prop.step(&mut state, dt) {
            Ok(()) => {}
            Err(PropagatorError::NormDrift { .. }) => guard_tripped = true,
            Err(e) => panic!("{e}"),
        }
        drift = drift.max((state.norm_sqr() - before).abs());
        if k % 100 == 0 {
            tracking = tracking.max((mean_x(&state) - driven_classical(-2.0, 0.5, 1.0, omega_f, state.t)).abs());
        }
    }

    let strong = PotentialSpec { a_f: 3.0, ..spec };
    let last = |steps: usize| evolve(&strong, &psi0, period, period / steps as f64, steps).unwrap().pop().unwrap();
    let reference = last(640);
    let order = (l2_distance(&last(40), &reference) / l2_distance(&last(80), &reference)).log2();
    verdict(
        2,
        &[
            ("weight sum", identity, format!("{:.1e}", c.weight_sum() - 1.0)),
            ("driven <x>", tracking < DRIVEN_TOL, format!("{tracking:.2e}")),
            ("order", (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&order), format!("{order:.3}")),
            ("norm drift", drift < NORM_DRIFT_TOL && !guard_tripped, format!("{drift:.2e}")),
            within_budget(start, PROPAGATOR_BUDGET),
        ],
    );
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_3_unforced_wall() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let cfg = preset("unforced-grazing").unwrap();
    execute(&cfg, dir.path(), None);
    let walls = summary(dir.path(), "unforced_summary.json")["walls"].as_array().unwrap().clone();
    let mut checks = Vec::new();
    for w in &walls {
        let label = w["x_w"].as_f64().map_or("far".to_string(), |x| format!("{x}"));
        let d = &w["diagnostics"];
        let k = d["k_median"].as_f64().unwrap_or(f64::NAN);
        let dominant = d["dominant_peaks"].as_u64().unwrap() as usize;
        let above = d["peaks_above_one_percent"].as_u64().unwrap() as usize;
        checks.push(("K", k < REGULAR_K, format!("{k:.3}@{label}")));
        match label.as_str() {
            "0" | "far" => checks.push(("dominant peaks", dominant <= MAX_DOMINANT_REGULAR, format!("{dominant}@{label}"))),
            "5" => checks.push(("peaks above 1%", above >= MIN_PEAKS_GRAZING, format!("{above}@{label}"))),
            _ => {}
        }
    }
    checks.push(within_budget(start, UNFORCED_BUDGET));
    verdict(3, &checks);
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_4_forced_grazing() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let cfg = preset("forced-grazing").unwrap().with_overrides(&["run.walls=[5,null]"]).unwrap();
    assert_eq!((cfg.potential.a_f, cfg.potential.omega_f), (GRAZING_AMPLITUDE, golden_frequency()));
    assert!(cfg.run.periods >= 500);
    execute(&cfg, dir.path(), None);
    let walls = summary(dir.path(), "forced_summary.json")["walls"].as_array().unwrap().clone();
    let grazing = &walls[0]["diagnostics"];
    let far = &walls[1]["diagnostics"];
    let f = |v: &Value, key: &str| v[key].as_f64().unwrap_or(f64::NAN);
    let exponent = f(grazing, "distribution_exponent");
    let (k5, k_far) = (f(grazing, "k_median"), f(far, "k_median"));
    let positive = f(grazing, "ftle_positive_fraction");
    let largest = f(grazing, "largest_exponent");
    verdict(
        4,
        &[
            ("exponent", (exponent - EXPONENT_TARGET).abs() <= EXPONENT_TOL, format!("{exponent:.3}")),
            ("K(5)", (k5 - K_TARGET).abs() <= K_TOL, format!("{k5:.3}")),
            ("K(far)", k_far < REGULAR_K && k5 > k_far, format!("{k_far:.3}")),
            ("FTLE positive fraction", positive > MIN_POSITIVE_FRACTION, format!("{positive:.3}")),
            ("largest exponent", largest <= 0.0, format!("{largest:.2e}")),
            within_budget(start, FORCED_BUDGET),
        ],
    );
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_5_otoc() {
    let start = Instant::now();
    let harmonic = PotentialSpec::hard_wall(f64::INFINITY);
    let n = 60;
    let op = OtocOperator::new(&eigensolve(&harmonic, &basis_grid(&harmonic, n, 24.0).unwrap(), n).unwrap());
    let times: Vec<f64> = (0..200).map(|j| 0.05 * j as f64).collect();
    let beta = 0.5;
    let curve = thermal_with(&op, beta, &times, thermal_cutoff(op.energies(), beta).unwrap()).unwrap();
    let hbar2 = harmonic.hbar * harmonic.hbar;
    let cos2 = curve.times.iter().zip(&curve.values).map(|(t, v)| (v - hbar2 * t.cos().powi(2)).abs() / hbar2).fold(0.0, f64::max);
    let at_zero = (0..40).map(|k| (op.c_n(k, 0.0) - hbar2).abs()).fold(0.0, f64::max);

    let dir = TempDir::new().unwrap();
    execute(&preset("otoc-scan").unwrap(), dir.path(), None);
    let entries = summary(dir.path(), "otoc_summary.json")["entries"].as_array().unwrap().clone();
    let at = |x: f64| entries.iter().find(|e| e["x_w"].as_f64() == Some(x) && e["beta"].as_f64() == Some(beta)).unwrap();
    let five = at(5.0);
    let rss = (five["power_rss"].as_f64().unwrap_or(f64::NAN), five["exponential_rss"].as_f64().unwrap_or(f64::NAN));
    // periodic correlators have no growth
    let curve_vs_wall: Vec<(f64, f64)> = (1..=12).map(|w| w as f64).map(|x| (x, at(x)["exponent"].as_f64().unwrap_or(0.0))).collect();
    let (peak_x, peak) = curve_vs_wall.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let below = curve_vs_wall.iter().filter(|p| p.0 < peak_x).any(|p| p.1 < peak);
    let above = curve_vs_wall.iter().filter(|p| p.0 > peak_x).any(|p| p.1 < peak);
    let interior = peak_x > 3.0 && peak_x < 7.0 && below && above;
    let change = five["truncation_change"].as_f64().unwrap_or(f64::NAN);
    let exps: Vec<String> = curve_vs_wall.iter().map(|p| format!("{:.2}", p.1)).collect();
    verdict(
        5,
        &[
            ("harmonic cos^2", cos2 <= HARMONIC_OTOC_TOL, format!("{cos2:.2e}")),
            ("c_n(0)", at_zero <= OTOC_ZERO_TOL, format!("{at_zero:.2e}")),
            ("power vs exponential rss", rss.0 < rss.1, format!("{:.3e} vs {:.3e}", rss.0, rss.1)),
            ("interior maximum", interior, format!("x_w={peak_x} exponents [{}]", exps.join(" "))),
            ("truncation", change < TRUNCATION_TOL, format!("{change:.2e}")),
            within_budget(start, OTOC_BUDGET),
        ],
    );
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_6_quantum_langevin() {
    let start = Instant::now();
    let (spec, noise) = dissipative_preset(0.5);
    let closed = PotentialSpec { a_f: 0.0, ..spec };
    let silent = NoiseModel::new(0.0, 0.0, noise.tau_c);
    let dt = 1e-3;
    let integ = QleIntegrator::new(&closed, &silent, dt).unwrap();
    let mut r = rng::stream(0, 0);
    // amplitude 0.2 keeps the orbit in the harmonic region below the wall at 0.5
    let mut st = QleState::minimum_uncertainty(&closed, &silent, -0.2, 0.0, &mut r);
    let (e0, d0) = (st.energy(&closed), st.moment_determinant());
    let (mut de, mut dd) = (0.0f64, 0.0f64);
    for _ in 0..(100.0 * 2.0 * PI / closed.omega0() / dt).round() as usize {
        qle_step(&mut st, &integ, &silent, &mut r).unwrap();
        de = de.max((st.energy(&closed) - e0).abs() / e0.abs());
        dd = dd.max((st.moment_determinant() - d0).abs() / d0);
    }

    let dir = TempDir::new().unwrap();
    let cfg = preset("qle-scan")
        .unwrap()
        .with_overrides(&[r#"run.scan={"start":0.22,"end":0.41,"step":0.01}"#, "run.extra_positions=[0.75]"])
        .unwrap();
    assert_eq!(cfg.run.n_realizations, 100);
    execute(&cfg, dir.path(), None);
    let points = summary(dir.path(), "qle_summary.json")["points"].as_array().unwrap().clone();
    let field = |x: f64, key: &str| {
        let p = points.iter().find(|p| (p["x_w"].as_f64().unwrap() - x).abs() < 1e-9).unwrap();
        p[key].as_f64().unwrap_or(f64::NAN)
    };
    let inside: Vec<&Value> = points.iter().filter(|p| p["x_w"].as_f64().unwrap() < 0.41 + 1e-9).collect();
    let chaotic = inside
        .iter()
        .filter(|p| {
            let (m, s) = (p["mean_lambda"].as_f64().unwrap_or(f64::NAN), p["std_lambda"].as_f64().unwrap_or(f64::NAN));
            m > 0.0 && m > s
        })
        .count();
    let share = chaotic as f64 / inside.len() as f64;
    let (k25, k75, l75) = (field(0.25, "k_median"), field(0.75, "k_median"), field(0.75, "mean_lambda"));
    verdict(
        6,
        &[
            ("closed energy", de < QLE_ENERGY_TOL, format!("{de:.2e}")),
            ("closed determinant", dd < QLE_DETERMINANT_TOL, format!("{dd:.2e}")),
            ("chaotic share", share >= CHAOTIC_SHARE, format!("{chaotic}/{}", inside.len())),
            ("lambda(0.75)", l75 < 0.0, format!("{l75:.4}")),
            ("K(0.25)", k25 > CHAOTIC_K, format!("{k25:.3}")),
            ("K(0.75)", k75 < REGULAR_QLE_K, format!("{k75:.3}")),
            within_budget(start, QLE_BUDGET),
        ],
    );
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_7_classical_impact() {
    let start = Instant::now();
    let p = ImpactParams { k: 1.0, m: 1.0, x_w: 1.0, a_f: 0.0, omega_f: 1.0, restitution: 1.0 };
    let ic = ClassicalState { x: 0.0, v: 10.0, t: 0.0 };
    let e0 = p.energy(&ic);
    let tr = simulate_impact(&p, ic, 2000.0, 0.37).unwrap();
    let drift = tr.samples.iter().map(|s| (p.energy(s) - e0).abs() / e0).fold(0.0, f64::max);

    let dir = TempDir::new().unwrap();
    execute(&preset("classical-scan").unwrap(), dir.path(), None);
    let points = summary(dir.path(), "classical_summary.json")["points"].as_array().unwrap().clone();
    let get = |p: &Value, k: &str| p[k].as_f64().unwrap();
    let before: Vec<&Value> = points.iter().filter(|p| get(p, "x_w") > 1.0 + 1e-9).collect();
    let quiet = before.iter().all(|p| get(p, "strobe_spread") < CLOSED_SPREAD && get(p, "impacts") == 0.0 && get(p, "lambda_max") <= 1e-3);
    let widest_before = before.iter().map(|p| get(p, "strobe_spread")).fold(0.0, f64::max);
    let after = points.iter().find(|p| (get(p, "x_w") - 0.99).abs() < 1e-9).unwrap();
    let (spread, lambda) = (get(after, "strobe_spread"), get(after, "lambda_max"));
    verdict(
        7,
        &[
            ("elastic energy", drift < ELASTIC_TOL, format!("{drift:.2e}")),
            ("above grazing", quiet, format!("max spread {widest_before:.1e}")),
            ("spread(0.99)", spread > OPEN_SPREAD, format!("{spread:.3}")),
            ("lambda(0.99)", lambda > 0.0, format!("{lambda:.4}")),
            within_budget(start, CLASSICAL_BUDGET),
        ],
    );
}

fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let m = RunManifest::load(dir).unwrap();
    m.artifacts.iter().map(|a| (a.path.clone(), std::fs::read(dir.join(&a.path)).unwrap())).collect()
}

#[test]
#[ignore = "acceptance suite"]
fn criterion_8_determinism() {
    let small = |name: &str, o: &[&str]| preset(name).unwrap().with_overrides(o).unwrap();
    let configs = [
        small("unforced-grazing", &["run.t_end=200", "run.walls=[0,5,null]"]),
        small("forced-grazing", &["run.periods=40", "run.steps_per_period=512", "run.walls=[5,null]"]),
        small("otoc-scan", &["run.walls=[2,5]", "run.n_states=80", "run.otoc_periods=10"]),
        small("qle-scan", &[r#"run.scan={"start":0.25,"end":0.27,"step":0.01}"#, "run.n_realizations=4"]),
        small("classical-scan", &[r#"run.scan={"start":0.95,"end":1.02,"step":0.01}"#]),
    ];
    let mut checks = Vec::new();
    for cfg in &configs {
        let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
        execute(cfg, a.path(), Some(1));
        execute(cfg, b.path(), Some(3));
        execute(cfg, c.path(), Some(1));
        let (x, y, z) = (artifact_bytes(a.path()), artifact_bytes(b.path()), artifact_bytes(c.path()));
        checks.push((cfg.experiment.name(), x == y && x == z && !x.is_empty(), format!("{} files", x.len())));
    }
    verdict(8, &checks);
}
