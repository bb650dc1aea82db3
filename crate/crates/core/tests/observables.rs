use core::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qimpact_core::fft::FftBackend;
use qimpact_core::lattice::{gaussian_packet, Grid, PotentialSpec, WaveState};
use qimpact_core::observables::{default_momentum_points, entropy, expectations, stroboscopic_density, wigner};
use qimpact_core::spectral::eigensolve;
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

fn ground_state() -> WaveState {
    let grid = Grid::new(-10.0, 10.0, 401).unwrap();
    gaussian_packet(&grid, 0.0, 0.5, 0.0, 1.0).unwrap()
}

/// Simpson's rule for `-rho ln rho` of the exact Gaussian density.
fn gaussian_entropy_quadrature(var: f64) -> f64 {
    let (a, b, n) = (-12.0, 12.0, 20000);
    let h = (b - a) / n as f64;
    let f = |x: f64| {
        let rho = (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        if rho > 0.0 {
            -rho * rho.ln()
        } else {
            0.0
        }
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn entropy_examples() {
    let closed = 0.5 * (1.0 + PI.ln());
    assert!((closed - 1.072_364_942_924_7).abs() < 1e-12);
    assert!((gaussian_entropy_quadrature(0.5) - closed).abs() < 1e-10);
    assert!((entropy(&ground_state()) - closed).abs() < 1e-8);

    // uniform density on [2, 6]
    let grid = Grid::new(0.0, 10.0, 10001).unwrap();
    let width: f64 = 4.0;
    let psi: Vec<Complex64> = (0..grid.n())
        .map(|i| {
            let x = grid.x(i);
            let inside = x > 2.0 - 1e-9 && x < 6.0 - 1e-9;
            Complex64::new(if inside { 1.0 / width.sqrt() } else { 0.0 }, 0.0)
        })
        .collect();
    let s = WaveState::new(grid, psi, 0.0);
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    assert!((entropy(&s) - width.ln()).abs() < 1e-6);
}

#[test]
fn entropy_is_shift_and_phase_invariant() {
    let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
    let a = gaussian_packet(&grid, -1.0, 0.5, 0.3, 1.0).unwrap();
    let mut b = a.clone();
    // translate by 150 cells
    b.psi.rotate_right(150);
    let mut c = a.clone();
    c.psi.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, 0.77));
    assert!((entropy(&a) - entropy(&b)).abs() < 1e-10);
    assert!((entropy(&a) - entropy(&c)).abs() < 1e-12);
    assert!(entropy(&a) > 0.0);
}

#[test]
fn ground_state_wigner_matches_closed_form() {
    let psi = ground_state();
    let mut fft = Planner(FftPlanner::new());
    let n_p = default_momentum_points(psi.grid.n());
    let w = wigner(&psi, 1.0, n_p, &mut fft).unwrap();
    let sigma2 = 0.5;
    let mut worst = 0.0_f64;
    let mut min = f64::INFINITY;
    for i in 0..psi.grid.n() {
        let x = psi.grid.x(i);
        for (k, &p) in w.p.iter().enumerate() {
            let exact = (-x * x / (2.0 * sigma2) - 2.0 * sigma2 * p * p).exp() / PI;
            worst = worst.max((w.at(i, k) - exact).abs());
            min = min.min(w.at(i, k));
        }
    }
    assert!(worst < 1e-4, "{worst}");
    assert!(min >= -1e-8);
}

#[test]
fn wigner_marginals() {
    let grid = Grid::new(-10.0, 10.0, 401).unwrap();
    let psi = gaussian_packet(&grid, 1.0, 0.8, -0.7, 1.0).unwrap();
    let mut fft = Planner(FftPlanner::new());
    let w = wigner(&psi, 1.0, default_momentum_points(grid.n()), &mut fft).unwrap();
    let marg = w.position_marginal();
    for (m, z) in marg.iter().zip(&psi.psi) {
        assert!((m - z.norm_sqr()).abs() < 1e-5);
    }
    // momentum marginal against the analytic momentum density
    let var_p = 1.0 / (4.0 * 0.8);
    let l1: f64 =
        w.p.iter()
            .zip(w.momentum_marginal())
            .map(|(&p, m)| (m - (-(p + 0.7).powi(2) / (2.0 * var_p)).exp() / (2.0 * PI * var_p).sqrt()).abs() * w.dp)
            .sum();
    assert!(l1 < 1e-5, "{l1}");
}

#[test]
fn superposition_has_negative_wigner_values() {
    let grid = Grid::new(-10.0, 10.0, 401).unwrap();
    let b = eigensolve(&PotentialSpec::hard_wall(f64::INFINITY), &grid, 3).unwrap();
    let psi =
        WaveState::new(grid, b.states[0].iter().zip(&b.states[2]).map(|(a, c)| Complex64::new((a + c) / 2f64.sqrt(), 0.0)).collect(), 0.0);
    let mut fft = Planner(FftPlanner::new());
    let w = wigner(&psi, 1.0, default_momentum_points(grid.n()), &mut fft).unwrap();
    let min = w.w.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min < -1e-3, "{min}");
}

#[test]
fn expectation_examples() {
    let e = expectations(&ground_state(), 1.0);
    assert!(e.x.abs() < 1e-8);
    assert!((e.x2 - 0.5).abs() < 1e-6);
    assert!((e.p2 - 0.5).abs() < 1e-6);
    let grid = Grid::new(-10.0, 10.0, 801).unwrap();
    for q in [-1.5, 0.3, 2.0] {
        let boosted = gaussian_packet(&grid, 0.7, 0.5, q, 1.0).unwrap();
        let e = expectations(&boosted, 1.0);
        assert!((e.p - q).abs() < 1e-6, "{q}: {}", e.p);
    }
}

#[test]
fn stroboscopic_average_of_stationary_state() {
    let psi = ground_state();
    let mut states = Vec::new();
    for k in 0..20 {
        let mut s = psi.clone();
        s.psi.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, 0.3 * k as f64));
        states.push(s);
    }
    let avg = stroboscopic_density(&states, 3).unwrap();
    for (a, z) in avg.iter().zip(&psi.psi) {
        assert!((a - z.norm_sqr()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn uncertainty_bound(var in 0.1f64..3.0, mean in -2.0f64..2.0) {
        let grid = Grid::new(-20.0, 20.0, 2001).unwrap();
        let psi = gaussian_packet(&grid, mean, var, 0.0, 1.0).unwrap();
        let e = expectations(&psi, 1.0);
        let vx = e.x2 - e.x * e.x;
        let vp = e.p2 - e.p * e.p;
        prop_assert!(vx * vp >= 0.25 - 1e-8);
    }

    #[test]
    fn stroboscopic_density_is_permutation_invariant(seed in 0u64..1000) {
        let grid = Grid::new(-10.0, 10.0, 201).unwrap();
        let states: Vec<WaveState> = (0..18)
            .map(|k| gaussian_packet(&grid, -2.0 + 0.2 * k as f64, 0.5 + 0.01 * k as f64, 0.0, 1.0).unwrap())
            .collect();
        let mut shuffled = states.clone();
        let len = shuffled.len();
        let mut s = seed;
        for i in (1..len).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = stroboscopic_density(&states, 0).unwrap();
        let b = stroboscopic_density(&shuffled, 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn wigner_position_marginal_holds(mean in -3.0f64..3.0, q in -2.0f64..2.0, var in 0.3f64..1.5) {
        let grid = Grid::new(-12.0, 12.0, 241).unwrap();
        let psi = gaussian_packet(&grid, mean, var, q, 1.0).unwrap();
        let mut fft = Planner(FftPlanner::new());
        let w = wigner(&psi, 1.0, default_momentum_points(grid.n()), &mut fft).unwrap();
        let l1: f64 = w.position_marginal().iter().zip(&psi.psi).map(|(m, z)| (m - z.norm_sqr()).abs()).sum::<f64>() * grid.dx();
        prop_assert!(l1 < 1e-5);
    }
}
