use core::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qimpact_core::classical::{
    bifurcation_classical, lyapunov_classical, simulate_impact, wall_positions, ClassicalScanPoint, ClassicalScanSettings, ClassicalState,
    ImpactParams,
};
use qimpact_core::diagnostics::{zero_one_test, ZeroOneMode};
use qimpact_core::fft::FftBackend;
use qimpact_core::observables::TimeSeries;
use rustfft::FftPlanner;

struct Planner(FftPlanner<f64>);

impl FftBackend for Planner {
    fn forward(&mut self, data: &mut [Complex64]) {
        self.0.plan_fft_forward(data.len()).process(data);
    }
    fn inverse(&mut self, data: &mut [Complex64]) {
        self.0.plan_fft_inverse(data.len()).process(data);
    }
}

fn free(x_w: f64) -> ImpactParams {
    ImpactParams { k: 1.0, m: 1.0, x_w, a_f: 0.0, omega_f: 1.0, restitution: 0.95 }
}

/// Forcing with unit response amplitude at frequency `omega_f`.
fn forced(omega_f: f64, x_w: f64) -> ImpactParams {
    ImpactParams { k: 1.0, m: 1.0, x_w, a_f: (1.0 - omega_f * omega_f).abs(), omega_f, restitution: 0.95 }
}

fn k_median(strobe: &[f64]) -> f64 {
    let s = TimeSeries::new(strobe.to_vec(), 1.0, 0.0).unwrap();
    zero_one_test(&s, ZeroOneMode::Standard, 50, 3, &mut Planner(FftPlanner::new())).unwrap().k_median
}

#[test]
fn distant_wall_gives_harmonic_period() {
    let p = free(100.0);
    let tr = simulate_impact(&p, ClassicalState { x: -5.0, v: 0.0, t: 0.0 }, 20.0 * PI, 2.0 * PI).unwrap();
    assert!(tr.impact_times.is_empty());
    for s in &tr.samples {
        assert!((s.x + 5.0).abs() < 1e-9 && s.v.abs() < 1e-9);
    }
}

#[test]
fn released_from_mirror_point_grazes_without_reversal() {
    let p = free(2.0);
    let tr = simulate_impact(&p, ClassicalState { x: -2.0, v: 0.0, t: 0.0 }, 10.0 * PI, PI).unwrap();
    assert!(tr.impact_times.is_empty());
    for (j, s) in tr.samples.iter().enumerate() {
        let expected = if j % 2 == 0 { 2.0 } else { -2.0 };
        assert!((s.x - expected).abs() < 1e-9);
    }
}

#[test]
fn elastic_impacts_conserve_energy() {
    let p = ImpactParams { restitution: 1.0, ..free(1.0) };
    let ic = ClassicalState { x: 0.0, v: 10.0, t: 0.0 };
    let e0 = p.energy(&ic);
    let tr = simulate_impact(&p, ic, 2000.0, 0.37).unwrap();
    assert!(tr.impact_times.len() > 300);
    let worst = tr.samples.iter().map(|s| (p.energy(s) - e0).abs() / e0).fold(0.0, f64::max);
    println!("{} impacts, energy drift {worst:e}", tr.impact_times.len());
    assert!(worst < 1e-8);
}

#[test]
fn harmonic_regime_has_zero_exponent() {
    let p = forced(2.8, 5.0);
    let (lambda, tr) = lyapunov_classical(&p, p.periodic_orbit_start(), 2000.0 * p.forcing_period(), 0.2).unwrap();
    assert!(tr.impact_times.is_empty());
    assert!(lambda.abs() < 1e-3);
}

#[test]
fn post_grazing_orbit_is_chaotic() {
    let p = forced(2.8, 0.95);
    let (lambda, tr) = lyapunov_classical(&p, p.periodic_orbit_start(), 4000.0 * p.forcing_period(), 0.5).unwrap();
    let strobe: Vec<f64> = tr.samples[2000..].iter().map(|s| s.x).collect();
    let k = k_median(&strobe);
    println!("post-grazing lambda {lambda}, K {k}");
    assert!(lambda > 0.0);
    assert!(k > 0.5);
}

#[test]
fn strongly_impacting_period_one_orbit_is_stable() {
    let p = forced(1.3, 0.7);
    let (lambda, tr) = lyapunov_classical(&p, p.periodic_orbit_start(), 4000.0 * p.forcing_period(), 0.5).unwrap();
    let strobe: Vec<f64> = tr.samples[2000..].iter().map(|s| s.x).collect();
    let k = k_median(&strobe);
    println!("period-1 lambda {lambda}, K {k}");
    assert!(lambda < 0.0);
    assert!(k < 0.1);
}

#[test]
fn grazing_sweep_widens_abruptly_and_agrees_with_zero_one() {
    let base = forced(2.8, 0.0);
    // descending, following the non-impacting orbit into grazing
    let mut positions = wall_positions(0.80, 1.10, 0.01).unwrap();
    positions.reverse();
    let scan = bifurcation_classical(&base, &positions, &ClassicalScanSettings { periods: 4000, transient_fraction: 0.5 }).unwrap();
    for p in scan.iter().filter(|p| p.x_w > 1.0 + 1e-9) {
        assert_eq!(p.impacts, 0);
        assert!(p.spread() < 1e-9 && p.lambda <= 1e-3);
    }
    let just_below = scan.iter().find(|p| (p.x_w - 0.99).abs() < 1e-9).unwrap();
    assert!(just_below.spread() > 1.0 && just_below.lambda > 0.0);
    // classified on the gap to the wall
    let gap_k = |p: &ClassicalScanPoint| k_median(&p.strobe.iter().map(|x| p.x_w - x).collect::<Vec<_>>());
    let agree = scan.iter().filter(|p| (p.lambda > 1e-3) == (gap_k(p) > 0.5)).count();
    println!("lambda / 0-1 agreement {agree}/{}", scan.len());
    assert!(agree as f64 >= 0.95 * scan.len() as f64);
    assert!(bifurcation_classical(&base, &[], &ClassicalScanSettings::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn impacts_never_overshoot(
        x_w in 0.2f64..2.0,
        omega_f in prop_oneof![0.3f64..0.9, 1.1f64..4.0],
        a_f in 0.0f64..5.0,
        r in 0.5f64..=1.0,
        v0 in -3.0f64..3.0,
    ) {
        let p = ImpactParams { k: 1.0, m: 1.0, x_w, a_f, omega_f, restitution: r };
        let tr = simulate_impact(&p, ClassicalState { x: 0.0, v: v0, t: 0.0 }, 60.0, 0.05);
        if let Ok(tr) = tr {
            prop_assert!(tr.samples.iter().all(|s| s.x <= x_w + 1e-9));
        }
    }
}
