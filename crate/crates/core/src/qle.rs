//! Semiclassical quantum Langevin dynamics of the forced, dissipative soft
//! impact oscillator with a second-order moment closure.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{zero_one_test, DiagnosticsError, ZeroOneMode};
use crate::fft::FftBackend;
use crate::lattice::{soft_derivatives, LatticeError, PotentialKind, PotentialSpec};
use crate::observables::TimeSeries;
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QleError {
    #[error("step {dt} too large: needs dt <= {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("position variance {sigma_xx:e} exceeded {limit:e} at t = {t}")]
    MomentBlowup { sigma_xx: f64, limit: f64, t: f64 },
    #[error("quantum Langevin dynamics needs the soft sigmoid wall")]
    WrongVariant,
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
    #[error("{found} section crossings after the transient, at least {required} needed")]
    TooFewCrossings { found: usize, required: usize },
    #[error("{0}")]
    InvalidScan(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Thermal bath: `n_components` Ornstein-Uhlenbeck processes with
/// correlation time `tau_c` whose sum has variance `gamma kT / tau_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kt: f64,
    pub gamma: f64,
    pub tau_c: f64,
    pub n_components: usize,
}

impl NoiseModel {
    pub fn new(kt: f64, gamma: f64, tau_c: f64) -> Self {
        Self { kt, gamma, tau_c, n_components: 1 }
    }

    pub fn validate(&self) -> Result<(), QleError> {
        if !(self.kt >= 0.0) {
            return Err(QleError::InvalidNoise("kT must be nonnegative"));
        }
        if !(self.gamma >= 0.0) {
            return Err(QleError::InvalidNoise("Gamma must be nonnegative"));
        }
        if !(self.tau_c > 0.0) {
            return Err(QleError::InvalidNoise("tau_c must be positive"));
        }
        if self.n_components == 0 {
            return Err(QleError::InvalidNoise("at least one noise component"));
        }
        Ok(())
    }

    /// Stationary variance of one component.
    pub fn component_variance(&self) -> f64 {
        self.gamma * self.kt / (self.tau_c * self.n_components as f64)
    }
}

/// Exact OU transition `eta' = eta e^{-dt/tau} + N(0, v (1 - e^{-2 dt/tau}))`.
pub fn ou_update<R: Rng + ?Sized>(etas: &mut [f64], noise: &NoiseModel, dt: f64, rng: &mut R) -> Result<(), QleError> {
    let limit = noise.tau_c / 10.0;
    if !(dt > 0.0) || dt >= limit {
        return Err(QleError::StepTooLarge { dt, limit });
    }
    let decay = (-dt / noise.tau_c).exp();
    let spread = (noise.component_variance() * (1.0 - decay * decay)).sqrt();
    for eta in etas.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *eta = *eta * decay + spread * xi;
    }
    Ok(())
}

/// `Q = -V'''(X) sigma_xx / 2`.
pub fn quantum_correction(x: f64, sigma_xx: f64, spec: &PotentialSpec) -> Result<f64, QleError> {
    let (_, v3) = soft_derivatives(spec, x).map_err(|_| QleError::WrongVariant)?;
    Ok(-0.5 * v3 * sigma_xx)
}

/// Mean position and momentum, memory force, second moments and bath
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct QleState {
    pub x: f64,
    pub p: f64,
    pub z: f64,
    pub sigma_xx: f64,
    pub sigma_xp: f64,
    pub sigma_pp: f64,
    pub etas: Vec<f64>,
    pub t: f64,
}

impl QleState {
    /// Minimum-uncertainty moments `hbar/(2 m w0)`, `hbar m w0/2` with the
    /// bath drawn from its stationary distribution.
    pub fn minimum_uncertainty<R: Rng + ?Sized>(spec: &PotentialSpec, noise: &NoiseModel, x: f64, p: f64, rng: &mut R) -> Self {
        let w0 = spec.omega0();
        let sd = noise.component_variance().sqrt();
        let etas = (0..noise.n_components)
            .map(|_| {
                let xi: f64 = rng.sample(StandardNormal);
                sd * xi
            })
            .collect();
        Self {
            x,
            p,
            z: 0.0,
            sigma_xx: spec.hbar / (2.0 * spec.m * w0),
            sigma_xp: 0.0,
            sigma_pp: spec.hbar * spec.m * w0 / 2.0,
            etas,
            t: 0.0,
        }
    }

    pub fn noise_force(&self) -> f64 {
        self.etas.iter().sum()
    }

    /// `P^2/2m + V(X)` without the forcing term.
    pub fn energy(&self, spec: &PotentialSpec) -> f64 {
        self.p * self.p / (2.0 * spec.m) + spec.static_value(self.x)
    }

    pub fn moment_determinant(&self) -> f64 {
        self.sigma_xx * self.sigma_pp - self.sigma_xp * self.sigma_xp
    }
}

/// Deterministic part of one step given the bath force at both ends.
#[derive(Debug, Clone, Copy)]
pub struct QleIntegrator {
    spec: PotentialSpec,
    gamma: f64,
    tau_c: f64,
    dt: f64,
    moment_limit: f64,
}

impl QleIntegrator {
    pub fn new(spec: &PotentialSpec, noise: &NoiseModel, dt: f64) -> Result<Self, QleError> {
        if spec.variant != PotentialKind::SoftSigmoidWall {
            return Err(QleError::WrongVariant);
        }
        spec.validate()?;
        noise.validate()?;
        let mut limit = noise.tau_c / 100.0;
        if spec.omega_f > 0.0 {
            limit = limit.min(2.0 * PI / spec.omega_f / 100.0);
        }
        if !(dt > 0.0) || dt > limit {
            return Err(QleError::StepTooLarge { dt, limit });
        }
        let scale = domain_scale(spec);
        Ok(Self { spec: *spec, gamma: noise.gamma, tau_c: noise.tau_c, dt, moment_limit: scale * scale })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn moment_limit(&self) -> f64 {
        self.moment_limit
    }

    fn drift(&self, x: f64, p: f64, z: f64, sxx: f64, t: f64, f: f64) -> [f64; 3] {
        let s = &self.spec;
        let grad = s.soft_force_gradient(x, t).expect("soft variant checked at construction");
        let (_, v3) = soft_derivatives(s, x).expect("soft variant checked at construction");
        let v = p / s.m;
        [v, -grad + f + z - 0.5 * v3 * sxx, -self.gamma * v / self.tau_c]
    }

    /// Heun step of `(X, P, z)` with the bath force `f0` at the start and
    /// `f1` at the end; the moments follow the exact flow of the quadratic
    /// Hamiltonian frozen at the midpoint curvature.
    pub fn advance(&self, st: &mut QleState, f0: f64, f1: f64) -> Result<(), QleError> {
        let dt = self.dt;
        let (t0, t1) = (st.t, st.t + dt);
        let k1 = self.drift(st.x, st.p, st.z, st.sigma_xx, t0, f0);
        let (xp, pp, zp) = (st.x + dt * k1[0], st.p + dt * k1[1], st.z + dt * k1[2]);
        let (v2, _) = soft_derivatives(&self.spec, 0.5 * (st.x + xp))?;
        let (sxx, sxp, spp) = moment_flow(st.sigma_xx, st.sigma_xp, st.sigma_pp, v2, self.spec.m, dt);
        let k2 = self.drift(xp, pp, zp, sxx, t1, f1);
        st.x += 0.5 * dt * (k1[0] + k2[0]);
        st.p += 0.5 * dt * (k1[1] + k2[1]);
        st.z += 0.5 * dt * (k1[2] + k2[2]);
        st.sigma_xx = sxx;
        st.sigma_xp = sxp;
        st.sigma_pp = spp;
        st.t = t1;
        if !(sxx <= self.moment_limit) {
            return Err(QleError::MomentBlowup { sigma_xx: sxx, limit: self.moment_limit, t: t1 });
        }
        Ok(())
    }
}

/// `|x_w|` plus the response amplitude of the wall-less driven oscillator,
/// with the detuning floored at 1% of `k` and the amplitude at one length unit.
pub fn domain_scale(spec: &PotentialSpec) -> f64 {
    let detuning = (spec.k - spec.m * spec.omega_f * spec.omega_f).abs().max(0.01 * spec.k);
    spec.x_w.abs() + (spec.a_f.abs() / detuning).max(1.0)
}

/// `Sigma -> M Sigma M^T` for the flow `M` of `H = p^2/2m + v2 x^2/2` over `dt`.
fn moment_flow(sxx: f64, sxp: f64, spp: f64, v2: f64, m: f64, dt: f64) -> (f64, f64, f64) {
    let (a, b, c, d) = if v2 > 0.0 {
        let w = (v2 / m).sqrt();
        let (s, co) = (w * dt).sin_cos();
        (co, s / (m * w), -m * w * s, co)
    } else if v2 < 0.0 {
        let w = (-v2 / m).sqrt();
        let (s, co) = ((w * dt).sinh(), (w * dt).cosh());
        (co, s / (m * w), m * w * s, co)
    } else {
        (1.0, dt / m, 0.0, 1.0)
    };
    let nxx = a * a * sxx + 2.0 * a * b * sxp + b * b * spp;
    let nxp = a * c * sxx + (a * d + b * c) * sxp + b * d * spp;
    let npp = c * c * sxx + 2.0 * c * d * sxp + d * d * spp;
    (nxx, nxp, npp)
}

/// One stochastic step: bath by [`ou_update`], then [`QleIntegrator::advance`].
pub fn qle_step<R: Rng + ?Sized>(
    state: &mut QleState,
    integrator: &QleIntegrator,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<(), QleError> {
    let f0 = state.noise_force();
    ou_update(&mut state.etas, noise, integrator.dt(), rng)?;
    let f1 = state.noise_force();
    integrator.advance(state, f0, f1)
}

/// Which sign change of `P` defines a section crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// `P` from positive to nonpositive: maxima of `X`.
    #[default]
    Downward,
    Upward,
}

/// Streaming section at zero crossings of `P`, with `X` interpolated
/// linearly between the bracketing samples.
#[derive(Debug, Clone, Default)]
pub struct PoincareRecorder {
    direction: Crossing,
    last: Option<(f64, f64, f64)>,
    hits: Vec<(f64, f64)>,
}

impl PoincareRecorder {
    pub fn new(direction: Crossing) -> Self {
        Self { direction, last: None, hits: Vec::new() }
    }

    pub fn push(&mut self, t: f64, x: f64, p: f64) {
        if let Some((t0, x0, p0)) = self.last {
            let hit = match self.direction {
                Crossing::Downward => p0 > 0.0 && p <= 0.0,
                Crossing::Upward => p0 < 0.0 && p >= 0.0,
            };
            if hit {
                let w = p0 / (p0 - p);
                self.hits.push((t0 + w * (t - t0), x0 + w * (x - x0)));
            }
        }
        self.last = Some((t, x, p));
    }

    /// Section values after discarding crossings in the first 20% of
    /// `[t_start, t_end]`.
    pub fn finish(&self, t_start: f64, t_end: f64) -> Result<Vec<f64>, QleError> {
        const REQUIRED: usize = 50;
        let cut = t_start + 0.2 * (t_end - t_start);
        let kept: Vec<f64> = self.hits.iter().filter(|(t, _)| *t >= cut).map(|&(_, x)| x).collect();
        if kept.len() < REQUIRED {
            return Err(QleError::TooFewCrossings { found: kept.len(), required: REQUIRED });
        }
        Ok(kept)
    }
}

/// Section of a sampled trajectory given as `(t, X, P)` triples.
pub fn poincare_section(samples: &[(f64, f64, f64)], direction: Crossing) -> Result<Vec<f64>, QleError> {
    let mut rec = PoincareRecorder::new(direction);
    for &(t, x, p) in samples {
        rec.push(t, x, p);
    }
    let (t0, t1) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => (0.0, 0.0),
    };
    rec.finish(t0, t1)
}

/// Settings of the shadow-trajectory Lyapunov estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSettings {
    pub dt: f64,
    /// Length of each realization.
    pub duration: f64,
    pub delta0: f64,
    pub renorm_interval: f64,
    pub transient_fraction: f64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        Self { dt: 1e-3, duration: 500.0, delta0: 1e-8, renorm_interval: 1.0, transient_fraction: 0.2 }
    }
}

fn deviation(a: &QleState, b: &QleState) -> [f64; 6] {
    [b.x - a.x, b.p - a.p, b.z - a.z, b.sigma_xx - a.sigma_xx, b.sigma_xp - a.sigma_xp, b.sigma_pp - a.sigma_pp]
}

/// Largest exponent of one noise realization: a shadow trajectory offset
/// by `delta0` in `X` shares the bath path and is pulled back to distance
/// `delta0` every renormalization interval.
pub fn lyapunov_realization<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    noise: &NoiseModel,
    settings: &LyapunovSettings,
    rng: &mut R,
) -> Result<f64, QleError> {
    let integ = QleIntegrator::new(spec, noise, settings.dt)?;
    let mut main = QleState::minimum_uncertainty(spec, noise, 0.0, 0.0, rng);
    let mut shadow = main.clone();
    shadow.x += settings.delta0;
    let steps = (settings.duration / settings.dt).round() as usize;
    let per_renorm = ((settings.renorm_interval / settings.dt).round() as usize).max(1);
    let transient = (settings.transient_fraction * steps as f64).round() as usize;
    let (mut sum, mut span) = (0.0, 0.0);
    for step in 1..=steps {
        let f0 = main.noise_force();
        ou_update(&mut main.etas, noise, settings.dt, rng)?;
        let f1 = main.noise_force();
        integ.advance(&mut main, f0, f1)?;
        integ.advance(&mut shadow, f0, f1)?;
        if step % per_renorm == 0 {
            let dev = deviation(&main, &shadow);
            let d = dev.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step > transient {
                sum += (d / settings.delta0).ln();
                span += per_renorm as f64 * settings.dt;
            }
            let s = settings.delta0 / d;
            shadow.x = main.x + dev[0] * s;
            shadow.p = main.p + dev[1] * s;
            shadow.z = main.z + dev[2] * s;
            shadow.sigma_xx = main.sigma_xx + dev[3] * s;
            shadow.sigma_xp = main.sigma_xp + dev[4] * s;
            shadow.sigma_pp = main.sigma_pp + dev[5] * s;
        }
    }
    Ok(if span > 0.0 { sum / span } else { 0.0 })
}

/// Ensemble mean and standard deviation of [`lyapunov_realization`] over
/// the streams `(seed, 0..n_realizations)`.
pub fn lyapunov_shadow(
    spec: &PotentialSpec,
    noise: &NoiseModel,
    settings: &LyapunovSettings,
    n_realizations: usize,
    seed: u64,
) -> Result<(f64, f64), QleError> {
    if n_realizations < 2 {
        return Err(QleError::InvalidScan("at least two realizations"));
    }
    let lambdas = (0..n_realizations)
        .map(|i| lyapunov_realization(spec, noise, settings, &mut rng::stream(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_std(&lambdas))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Single trajectory: section values and `X` sampled `samples_per_period`
/// times per forcing period, both after the first 20% of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRun {
    pub section: Vec<f64>,
    pub samples: Vec<f64>,
    pub sample_interval: f64,
    pub t_start: f64,
}

pub fn long_run<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    noise: &NoiseModel,
    dt: f64,
    periods: usize,
    samples_per_period: usize,
    direction: Crossing,
    rng: &mut R,
) -> Result<LongRun, QleError> {
    if samples_per_period == 0 {
        return Err(QleError::InvalidScan("at least one sample per period"));
    }
    let period = 2.0 * PI / spec.omega_f;
    let stride = ((period / samples_per_period as f64 / dt).ceil() as usize).max(1);
    // a whole number of steps per sample keeps the samples phase-locked
    let dt = period / (samples_per_period * stride) as f64;
    let integ = QleIntegrator::new(spec, noise, dt)?;
    let mut st = QleState::minimum_uncertainty(spec, noise, 0.0, 0.0, rng);
    let mut rec = PoincareRecorder::new(direction);
    let total = periods * samples_per_period;
    let skip = total / 5;
    let mut samples = Vec::with_capacity(total - skip);
    rec.push(st.t, st.x, st.p);
    for k in 0..total {
        for _ in 0..stride {
            qle_step(&mut st, &integ, noise, rng)?;
            rec.push(st.t, st.x, st.p);
        }
        if k >= skip {
            samples.push(st.x);
        }
    }
    let sample_interval = period / samples_per_period as f64;
    let section = rec.finish(0.0, st.t)?;
    Ok(LongRun { section, samples, sample_interval, t_start: (skip + 1) as f64 * sample_interval })
}

/// Settings of one point of a wall-position scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub lyapunov: LyapunovSettings,
    pub n_realizations: usize,
    /// Forcing periods of the trajectory behind the section and the 0-1 test.
    pub periods: usize,
    pub samples_per_period: usize,
    pub n_c: usize,
    #[serde(default)]
    pub crossing: Crossing,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            lyapunov: LyapunovSettings::default(),
            n_realizations: 100,
            periods: 160,
            samples_per_period: 16,
            n_c: 100,
            crossing: Crossing::Downward,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoint {
    pub x_w: f64,
    pub section: Vec<f64>,
    /// Exponents of the realizations whose moments stayed bounded.
    pub lambdas: Vec<f64>,
    pub mean_lambda: f64,
    pub std_lambda: f64,
    /// Realizations stopped by [`QleError::MomentBlowup`].
    pub blown_up: usize,
    /// NaN when the section trajectory hit [`QleError::MomentBlowup`].
    pub k_median: f64,
    pub section_blown_up: bool,
}

/// Section, 0-1 statistic of the sampled `X` series and Lyapunov ensemble
/// at one wall position. `index` selects the random streams.
pub fn bifurcation_point<F: FftBackend>(
    base: &PotentialSpec,
    noise: &NoiseModel,
    settings: &ScanSettings,
    x_w: f64,
    seed: u64,
    index: u64,
    fft: &mut F,
) -> Result<BifurcationPoint, QleError> {
    let spec = PotentialSpec { x_w, ..*base };
    let mut rng_long = rng::stream(seed, index << 32);
    let (section, k_median, section_blown_up) =
        match long_run(&spec, noise, settings.lyapunov.dt, settings.periods, settings.samples_per_period, settings.crossing, &mut rng_long)
        {
            Ok(run) => {
                let series = TimeSeries::new(run.samples, run.sample_interval, run.t_start)
                    .map_err(|_| QleError::InvalidScan("sampled series too short"))?;
                let k = zero_one_test(&series, ZeroOneMode::Standard, settings.n_c, seed ^ index, fft)?;
                (run.section, k.k_median, false)
            }
            Err(QleError::MomentBlowup { .. }) => (Vec::new(), f64::NAN, true),
            Err(e) => return Err(e),
        };
    let mut lambdas = Vec::with_capacity(settings.n_realizations);
    let mut blown_up = 0;
    for i in 0..settings.n_realizations {
        let mut r = rng::stream(seed, (index << 32) | (i as u64 + 1));
        match lyapunov_realization(&spec, noise, &settings.lyapunov, &mut r) {
            Ok(l) => lambdas.push(l),
            Err(QleError::MomentBlowup { .. }) => blown_up += 1,
            Err(e) => return Err(e),
        }
    }
    let (mean_lambda, std_lambda) = if lambdas.len() >= 2 { mean_std(&lambdas) } else { (f64::NAN, f64::NAN) };
    Ok(BifurcationPoint { x_w, section, lambdas, mean_lambda, std_lambda, blown_up, k_median, section_blown_up })
}

/// Wall positions `start, start + step, ...` up to `end` inclusive, built
/// from integer multiples of `step`.
pub fn scan_positions(start: f64, end: f64, step: f64) -> Result<Vec<f64>, QleError> {
    if !(step > 0.0) || !(end >= start) {
        return Err(QleError::InvalidScan("empty wall-position range"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn bifurcation_scan<F: FftBackend>(
    base: &PotentialSpec,
    noise: &NoiseModel,
    settings: &ScanSettings,
    positions: &[f64],
    seed: u64,
    fft: &mut F,
) -> Result<Vec<BifurcationPoint>, QleError> {
    if positions.is_empty() {
        return Err(QleError::InvalidScan("empty wall-position range"));
    }
    positions.iter().enumerate().map(|(i, &x_w)| bifurcation_point(base, noise, settings, x_w, seed, i as u64, fft)).collect()
}

/// Dissipative soft-wall parameters of the wall-position scan at `x_w`.
pub fn dissipative_preset(x_w: f64) -> (PotentialSpec, NoiseModel) {
    let mut spec = PotentialSpec::soft_wall(x_w, 10.0, DEFAULT_SMOOTHNESS, 10.0, 0.8046);
    spec.hbar = 0.01;
    (spec, NoiseModel::new(0.01, 1.0, 3.0))
}

/// Smoothness `c` of the sigmoid wall used when none is configured.
pub const DEFAULT_SMOOTHNESS: f64 = 50.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_flow_is_symplectic() {
        for v2 in [2.5, -0.7, 0.0] {
            let (a, b, c) = moment_flow(0.3, 0.05, 0.9, v2, 1.3, 0.01);
            assert!((a * c - b * b - (0.3 * 0.9 - 0.05 * 0.05)).abs() < 1e-14);
        }
    }

    #[test]
    fn step_guards() {
        let (spec, noise) = dissipative_preset(0.5);
        assert!(matches!(QleIntegrator::new(&spec, &noise, 0.05), Err(QleError::StepTooLarge { .. })));
        assert!(matches!(QleIntegrator::new(&PotentialSpec::hard_wall(1.0), &noise, 1e-3), Err(QleError::WrongVariant)));
        let mut etas = alloc::vec![0.0];
        let mut r = rng::stream(0, 0);
        assert!(matches!(ou_update(&mut etas, &noise, 0.5, &mut r), Err(QleError::StepTooLarge { .. })));
        assert!(scan_positions(0.5, 0.4, 0.01).is_err());
        assert_eq!(scan_positions(0.15, 0.80, 0.01).unwrap().len(), 66);
    }
}
