//! Out-of-time-order correlator `-<[x(t), p]^2>` in a truncated eigenbasis.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::diagnostics::{linear_fit, power_law_fit, DiagnosticsError};
use crate::spectral::{position_matrix, EigenBasis, PositionMatrix};

/// States this close to the truncation edge give unreliable `c_n`.
pub const EDGE_MARGIN: usize = 3;
/// Largest admitted Boltzmann weight of the first excluded state.
pub const THERMAL_TAIL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OtocError {
    #[error("state {n} is outside a basis of {n_states} states")]
    IndexOutOfBasis { n: usize, n_states: usize },
    #[error("thermal weight {weight:e} beyond the retained states exceeds {THERMAL_TAIL:e}")]
    ThermalTailUncaptured { weight: f64 },
    #[error("growth window [{start}, {end}] holds {points} samples, at least 4 needed")]
    FitWindow { start: f64, end: f64, points: usize },
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Energies and position elements needed for `b_nm(t) = -i <n|[x(t), p]|m>`.
#[derive(Debug, Clone)]
pub struct OtocOperator {
    energies: Vec<f64>,
    x: PositionMatrix,
    hbar: f64,
    mass: f64,
}

impl OtocOperator {
    pub fn new(basis: &EigenBasis) -> Self {
        Self { energies: basis.energies.clone(), x: position_matrix(basis), hbar: basis.hbar, mass: basis.m }
    }

    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn position(&self) -> &PositionMatrix {
        &self.x
    }

    /// `p_km = i m (E_k - E_m) x_km / hbar`.
    pub fn momentum_element(&self, k: usize, m: usize) -> Complex64 {
        Complex64::new(0.0, self.mass * (self.energies[k] - self.energies[m]) * self.x.get(k, m) / self.hbar)
    }

    /// `c_n(t) = sum_m |b_nm(t)|^2` with intermediate states limited to the
    /// basis:
    /// `b_nm = (m/hbar) sum_k x_nk x_km (E_km e^{i E_nk t/hbar} - E_nk e^{i E_km t/hbar})`.
    pub fn c_n(&self, n: usize, t: f64) -> f64 {
        let dim = self.n_states();
        let e = &self.energies;
        let row = self.x.row(n);
        let inv_hbar = 1.0 / self.hbar;
        // u_k = x_nk e^{i E_nk t}, v_k = x_nk E_nk e^{i E_k t}
        let mut u = vec![Complex64::new(0.0, 0.0); dim];
        let mut eu = vec![Complex64::new(0.0, 0.0); dim];
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let enk = e[n] - e[k];
            u[k] = Complex64::from_polar(row[k], enk * t * inv_hbar);
            eu[k] = u[k] * e[k];
            v[k] = Complex64::from_polar(row[k] * enk, e[k] * t * inv_hbar);
        }
        let scale = self.mass * inv_hbar;
        let mut total = 0.0;
        for m in 0..dim {
            let xm = self.x.row(m);
            let (mut su, mut seu, mut sv) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for k in 0..dim {
                su += u[k] * xm[k];
                seu += eu[k] * xm[k];
                sv += v[k] * xm[k];
            }
            let b = (seu - su * e[m] - sv * Complex64::from_polar(1.0, -e[m] * t * inv_hbar)) * scale;
            total += b.norm_sqr();
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrocanonicalOtoc {
    pub n: usize,
    pub values: Vec<f64>,
    /// False when `n` lies within [`EDGE_MARGIN`] of the truncation edge.
    pub reliable: bool,
}

pub fn microcanonical_otoc(basis: &EigenBasis, n: usize, times: &[f64]) -> Result<MicrocanonicalOtoc, OtocError> {
    let op = OtocOperator::new(basis);
    microcanonical_with(&op, n, times)
}

pub fn microcanonical_with(op: &OtocOperator, n: usize, times: &[f64]) -> Result<MicrocanonicalOtoc, OtocError> {
    let n_states = op.n_states();
    if n >= n_states {
        return Err(OtocError::IndexOutOfBasis { n, n_states });
    }
    Ok(MicrocanonicalOtoc { n, values: times.iter().map(|&t| op.c_n(n, t)).collect(), reliable: n + EDGE_MARGIN < n_states })
}

/// Thermal average over the lowest `n_thermal` states.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub beta: f64,
    pub n_states: usize,
    pub n_thermal: usize,
}

/// Boltzmann weights `exp(-beta (E_n - E_0)) / Z` over all energies.
pub fn boltzmann_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies[0];
    let mut w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// Smallest `n_thermal` whose first excluded weight is below [`THERMAL_TAIL`].
pub fn thermal_cutoff(energies: &[f64], beta: f64) -> Option<usize> {
    let w = boltzmann_weights(energies, beta);
    (1..w.len()).find(|&n| w[n] < THERMAL_TAIL)
}

pub fn thermal_otoc(basis: &EigenBasis, beta: f64, times: &[f64], n_thermal: usize) -> Result<OtocCurve, OtocError> {
    thermal_with(&OtocOperator::new(basis), beta, times, n_thermal)
}

pub fn thermal_with(op: &OtocOperator, beta: f64, times: &[f64], n_thermal: usize) -> Result<OtocCurve, OtocError> {
    let n_states = op.n_states();
    if n_thermal >= n_states {
        return Err(OtocError::IndexOutOfBasis { n: n_thermal, n_states });
    }
    let w = boltzmann_weights(op.energies(), beta);
    if w[n_thermal] >= THERMAL_TAIL {
        return Err(OtocError::ThermalTailUncaptured { weight: w[n_thermal] });
    }
    let kept: f64 = w[..n_thermal].iter().sum();
    let mut values = vec![0.0; times.len()];
    for n in 0..n_thermal {
        let wn = w[n] / kept;
        for (v, &t) in values.iter_mut().zip(times) {
            *v += wn * op.c_n(n, t);
        }
    }
    Ok(OtocCurve { times: times.to_vec(), values, beta, n_states, n_thermal })
}

/// Early-time growth of a thermal OTOC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub window: (f64, f64),
    pub points: usize,
    pub exponent: f64,
    pub stderr: f64,
    /// Residual sum of squares of `ln C` against `ln t`.
    pub power_rss: f64,
    /// Residual sum of squares of `ln C` against `t`.
    pub exponential_rss: f64,
}

impl GrowthFit {
    pub fn power_law_preferred(&self) -> bool {
        self.power_rss < self.exponential_rss
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    Fitted(GrowthFit),
    /// The envelope never rises above its initial value: no sustained growth.
    Periodic,
}

/// Envelope peaks that must stay at or below a peak for it to end the
/// growth window.
pub const SATURATION_PEAKS: usize = 3;

/// Local maxima `(t, C)` of the curve from `start` on: the upper envelope
/// of the oscillating correlator.
pub fn envelope(curve: &OtocCurve, t_start: f64) -> Vec<(f64, f64)> {
    let v = &curve.values;
    (1..v.len().saturating_sub(1))
        .filter(|&i| curve.times[i] >= t_start && v[i] > v[i - 1] && v[i] >= v[i + 1])
        .map(|i| (curve.times[i], v[i]))
        .collect()
}

/// Power-law and exponential fits of the envelope from `t_start` up to
/// its first peak not exceeded by the next [`SATURATION_PEAKS`] peaks.
/// An envelope that never rises above `1.05 C(0)` is reported as periodic.
pub fn growth_fit(curve: &OtocCurve, t_start: f64) -> Result<Growth, OtocError> {
    let env = envelope(curve, t_start);
    let top = env.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if env.is_empty() || top <= 1.05 * curve.values[0] {
        return Ok(Growth::Periodic);
    }
    let end = (0..env.len())
        .find(|&i| {
            let next = &env[i + 1..(i + 1 + SATURATION_PEAKS).min(env.len())];
            next.len() == SATURATION_PEAKS && next.iter().all(|p| p.1 <= env[i].1)
        })
        .unwrap_or(env.len() - 1);
    let points = end + 1;
    let window = (env[0].0, env[end].0);
    if points < 4 {
        return Err(OtocError::FitWindow { start: window.0, end: window.1, points });
    }
    let ts: Vec<f64> = env[..=end].iter().map(|p| p.0).collect();
    let cs: Vec<f64> = env[..=end].iter().map(|p| p.1).collect();
    let power = power_law_fit(&ts, &cs)?;
    let ln_c: Vec<f64> = cs.iter().map(|c| c.ln()).collect();
    let exponential = linear_fit(&ts, &ln_c)?;
    Ok(Growth::Fitted(GrowthFit {
        window,
        points,
        exponent: power.slope,
        stderr: power.stderr,
        power_rss: power.rss,
        exponential_rss: exponential.rss,
    }))
}

/// Largest relative difference of two curves on the same time grid within
/// `window`.
pub fn relative_change(a: &OtocCurve, b: &OtocCurve, window: (f64, f64)) -> f64 {
    a.times
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(_, (x, y))| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}
