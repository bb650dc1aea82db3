//! Classical forced hard-impact oscillator: closed-form flight between
//! impacts, Newtonian restitution at the wall and saltation-corrected
//! tangent dynamics.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Largest excursion beyond the wall that is not treated as an impact.
pub const TOUCH_TOLERANCE: f64 = 1e-10;
/// Impacts allowed within one forcing period before chatter is declared.
pub const CHATTER_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassicalError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("initial position {x} lies beyond the wall at {x_w}")]
    BeyondWall { x: f64, x_w: f64 },
    #[error("forcing frequency equals the natural frequency")]
    ResonantForcing,
    #[error("more than {CHATTER_LIMIT} impacts within one forcing period near t = {t}")]
    StuckAtWall { t: f64 },
    #[error("{0}")]
    InvalidScan(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactParams {
    pub k: f64,
    pub m: f64,
    pub x_w: f64,
    pub a_f: f64,
    pub omega_f: f64,
    /// Coefficient of restitution `r` in `v+ = -r v-`.
    pub restitution: f64,
}

impl ImpactParams {
    pub fn validate(&self) -> Result<(), ClassicalError> {
        if !(self.k > 0.0) || !(self.m > 0.0) {
            return Err(ClassicalError::InvalidParams("k and m must be positive"));
        }
        if !(self.restitution > 0.0 && self.restitution <= 1.0) {
            return Err(ClassicalError::InvalidParams("restitution must lie in (0, 1]"));
        }
        if !self.x_w.is_finite() || !self.a_f.is_finite() || !(self.omega_f >= 0.0) {
            return Err(ClassicalError::InvalidParams("wall and forcing must be finite"));
        }
        if self.a_f != 0.0 && (self.omega0() - self.omega_f).abs() < 1e-12 * self.omega0() {
            return Err(ClassicalError::ResonantForcing);
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }

    /// Amplitude of the forced response `P sin(omega_f t)` of the wall-less
    /// oscillator; a wall below `|P|` is grazed by that orbit.
    pub fn response_amplitude(&self) -> f64 {
        let w0 = self.omega0();
        if self.a_f == 0.0 {
            0.0
        } else {
            self.a_f / (self.m * (w0 * w0 - self.omega_f * self.omega_f))
        }
    }

    pub fn forcing_period(&self) -> f64 {
        2.0 * PI / self.omega_f
    }

    /// State on the wall-less periodic orbit at `t = 0`.
    pub fn periodic_orbit_start(&self) -> ClassicalState {
        ClassicalState { x: 0.0, v: self.response_amplitude() * self.omega_f, t: 0.0 }
    }

    fn acceleration(&self, x: f64, t: f64) -> f64 {
        -self.k / self.m * x + self.a_f / self.m * (self.omega_f * t).sin()
    }

    pub fn energy(&self, s: &ClassicalState) -> f64 {
        0.5 * self.m * s.v * s.v + 0.5 * self.k * s.x * s.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

/// Free flight from a state: `x(t) = a cos w0 s + b sin w0 s + P sin(omega_f t)`.
#[derive(Debug, Clone, Copy)]
struct Flight {
    t0: f64,
    a: f64,
    b: f64,
    w0: f64,
    p: f64,
    wf: f64,
}

impl Flight {
    fn new(params: &ImpactParams, s: &ClassicalState) -> Self {
        let w0 = params.omega0();
        let p = params.response_amplitude();
        let wf = params.omega_f;
        Self { t0: s.t, a: s.x - p * (wf * s.t).sin(), b: (s.v - p * wf * (wf * s.t).cos()) / w0, w0, p, wf }
    }

    fn x(&self, t: f64) -> f64 {
        let (sn, cs) = (self.w0 * (t - self.t0)).sin_cos();
        self.a * cs + self.b * sn + self.p * (self.wf * t).sin()
    }

    fn v(&self, t: f64) -> f64 {
        let (sn, cs) = (self.w0 * (t - self.t0)).sin_cos();
        self.w0 * (self.b * cs - self.a * sn) + self.p * self.wf * (self.wf * t).cos()
    }

    /// Bound on `|x''|` over the whole flight.
    fn curvature_bound(&self) -> f64 {
        self.w0 * self.w0 * self.a.hypot(self.b) + self.wf * self.wf * self.p.abs()
    }

    /// First `t` in `(t0, t1]` where the flight rises more than
    /// [`TOUCH_TOLERANCE`] beyond `x_w`, located at the crossing `x = x_w`.
    fn first_impact(&self, x_w: f64, t1: f64) -> Option<f64> {
        let bound = self.curvature_bound();
        let g = |t: f64| self.x(t) - x_w;
        let base = (0.05 * (2.0 * PI / self.w0).min(if self.wf > 0.0 { 2.0 * PI / self.wf } else { f64::INFINITY })).min(t1 - self.t0);
        let mut lo = self.t0;
        let mut stack: Vec<f64> = Vec::new();
        let mut hi = (lo + base).min(t1);
        loop {
            if hi <= lo {
                return None;
            }
            let (g_lo, dg_lo) = (g(lo), self.v(lo));
            let h = hi - lo;
            // convex upper bound of g on [lo, hi]
            let upper = g_lo.max(g_lo + dg_lo * h + 0.5 * bound * h * h);
            let g_hi = g(hi);
            if g_hi > TOUCH_TOLERANCE {
                return Some(self.crossing(x_w, lo, hi));
            }
            if upper <= TOUCH_TOLERANCE || h < 1e-13 * (1.0 + hi.abs()) {
                lo = hi;
                hi = match stack.pop() {
                    Some(t) => t,
                    None => {
                        if lo >= t1 {
                            return None;
                        }
                        (lo + base).min(t1)
                    }
                };
            } else {
                stack.push(hi);
                hi = lo + 0.5 * h;
            }
        }
    }

    /// Root of `x = x_w` in `[lo, hi]` with `x(hi) > x_w`: bisection, then Newton.
    fn crossing(&self, x_w: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = |t: f64| self.x(t) - x_w;
        if g(lo) > 0.0 {
            return lo;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..4 {
            let v = self.v(t);
            if v <= 0.0 {
                break;
            }
            let next = t - g(t) / v;
            if !(next >= lo && next <= hi) {
                break;
            }
            t = next;
        }
        t
    }
}

/// Stroboscopic samples and impact record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTrajectory {
    /// States at `t0 + j * sample_period`, `j = 1, 2, ...`.
    pub samples: Vec<ClassicalState>,
    pub impact_times: Vec<f64>,
    pub final_state: ClassicalState,
}

/// Tangent-flow hooks for [`integrate`].
trait Tangent {
    fn flight(&mut self, _dt: f64, _w0: f64) {}
    fn impact(&mut self, _v_minus: f64, _accel: f64, _r: f64) {}
    fn sample(&mut self, _t: f64) {}
}

struct NoTangent;
impl Tangent for NoTangent {}

fn integrate<T: Tangent>(
    params: &ImpactParams,
    ic: ClassicalState,
    duration: f64,
    sample_period: f64,
    tangent: &mut T,
) -> Result<ImpactTrajectory, ClassicalError> {
    params.validate()?;
    if ic.x > params.x_w + 1e-9 {
        return Err(ClassicalError::BeyondWall { x: ic.x, x_w: params.x_w });
    }
    if !(duration >= 0.0) || !(sample_period > 0.0) {
        return Err(ClassicalError::InvalidParams("duration and sample period must be positive"));
    }
    let w0 = params.omega0();
    let period = if params.omega_f > 0.0 { params.forcing_period() } else { 2.0 * PI / w0 };
    let t_end = ic.t + duration;
    let mut state = ic;
    let mut samples = Vec::new();
    let mut impacts = Vec::new();
    let mut next_sample = ic.t + sample_period;
    let mut window_start = ic.t;
    let mut in_window = 0usize;
    loop {
        let flight = Flight::new(params, &state);
        let horizon = next_sample.min(t_end);
        match flight.first_impact(params.x_w, horizon) {
            Some(t_hit) => {
                let v_minus = flight.v(t_hit);
                tangent.flight(t_hit - state.t, w0);
                tangent.impact(v_minus, params.acceleration(params.x_w, t_hit), params.restitution);
                state = ClassicalState { x: params.x_w, v: -params.restitution * v_minus, t: t_hit };
                impacts.push(t_hit);
                if t_hit - window_start > period {
                    window_start = t_hit;
                    in_window = 0;
                }
                in_window += 1;
                if in_window > CHATTER_LIMIT {
                    return Err(ClassicalError::StuckAtWall { t: t_hit });
                }
            }
            None => {
                tangent.flight(horizon - state.t, w0);
                state = ClassicalState { x: flight.x(horizon).min(params.x_w), v: flight.v(horizon), t: horizon };
                if horizon >= next_sample {
                    tangent.sample(state.t);
                    samples.push(state);
                    next_sample = ic.t + (samples.len() + 1) as f64 * sample_period;
                }
                if horizon >= t_end {
                    break;
                }
            }
        }
    }
    Ok(ImpactTrajectory { samples, impact_times: impacts, final_state: state })
}

/// Trajectory with states sampled every `sample_period`.
pub fn simulate_impact(
    params: &ImpactParams,
    ic: ClassicalState,
    duration: f64,
    sample_period: f64,
) -> Result<ImpactTrajectory, ClassicalError> {
    integrate(params, ic, duration, sample_period, &mut NoTangent)
}

/// Saltation matrix of the impact `v+ = -r v-` at the wall, where the
/// acceleration is `accel` on both sides.
pub fn saltation_matrix(v_minus: f64, accel: f64, r: f64) -> [[f64; 2]; 2] {
    [[-r, 0.0], [(1.0 + r) * accel / v_minus, -r]]
}

struct Benettin {
    delta: [f64; 2],
    transient_end: f64,
    log_sum: f64,
    span: f64,
    last: f64,
}

impl Tangent for Benettin {
    fn flight(&mut self, dt: f64, w0: f64) {
        let (s, c) = (w0 * dt).sin_cos();
        let [dx, dv] = self.delta;
        self.delta = [c * dx + s / w0 * dv, -w0 * s * dx + c * dv];
    }

    fn impact(&mut self, v_minus: f64, accel: f64, r: f64) {
        let s = saltation_matrix(v_minus, accel, r);
        let [dx, dv] = self.delta;
        self.delta = [s[0][0] * dx + s[0][1] * dv, s[1][0] * dx + s[1][1] * dv];
    }

    fn sample(&mut self, t: f64) {
        let norm = self.delta[0].hypot(self.delta[1]);
        if t > self.transient_end {
            self.log_sum += norm.ln();
            self.span += t - self.last;
        }
        self.last = t;
        self.delta = [self.delta[0] / norm, self.delta[1] / norm];
    }
}

/// Largest exponent from the tangent flow with saltation at impacts,
/// renormalized every forcing period; the first `transient_fraction` of
/// the run is discarded.
pub fn lyapunov_classical(
    params: &ImpactParams,
    ic: ClassicalState,
    duration: f64,
    transient_fraction: f64,
) -> Result<(f64, ImpactTrajectory), ClassicalError> {
    let period = if params.omega_f > 0.0 { params.forcing_period() } else { 2.0 * PI / params.omega0() };
    let mut b = Benettin {
        delta: [core::f64::consts::FRAC_1_SQRT_2, core::f64::consts::FRAC_1_SQRT_2],
        transient_end: ic.t + transient_fraction * duration,
        log_sum: 0.0,
        span: 0.0,
        last: ic.t,
    };
    let traj = integrate(params, ic, duration, period, &mut b)?;
    let lambda = if b.span > 0.0 { b.log_sum / b.span } else { 0.0 };
    Ok((lambda, traj))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalScanSettings {
    /// Forcing periods per wall position.
    pub periods: usize,
    pub transient_fraction: f64,
}

impl Default for ClassicalScanSettings {
    fn default() -> Self {
        Self { periods: 2000, transient_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalScanPoint {
    pub x_w: f64,
    /// Stroboscopic positions after the transient.
    pub strobe: Vec<f64>,
    pub lambda: f64,
    pub impacts: usize,
    /// True when the continued state failed and the cold start was used.
    pub cold_start: bool,
}

impl ClassicalScanPoint {
    pub fn spread(&self) -> f64 {
        let lo = self.strobe.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.strobe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Scan over wall positions: each point continues from the final state of
/// the previous one (clamped behind the new wall) and falls back to the
/// periodic-orbit start if that run fails.
pub fn bifurcation_classical(
    base: &ImpactParams,
    positions: &[f64],
    settings: &ClassicalScanSettings,
) -> Result<Vec<ClassicalScanPoint>, ClassicalError> {
    if positions.is_empty() {
        return Err(ClassicalError::InvalidScan("empty wall-position range"));
    }
    let duration = settings.periods as f64 * base.forcing_period();
    let mut seed: Option<ClassicalState> = None;
    let mut out = Vec::with_capacity(positions.len());
    for &x_w in positions {
        let params = ImpactParams { x_w, ..*base };
        let cold = params.periodic_orbit_start();
        let warm = seed.map(|s| ClassicalState { x: s.x.min(x_w), v: s.v, t: 0.0 });
        let (result, cold_start) = match warm {
            Some(w) => match lyapunov_classical(&params, w, duration, settings.transient_fraction) {
                Ok(r) => (r, false),
                Err(_) => (lyapunov_classical(&params, cold, duration, settings.transient_fraction)?, true),
            },
            None => (lyapunov_classical(&params, cold, duration, settings.transient_fraction)?, true),
        };
        let (lambda, traj) = result;
        let keep = (settings.transient_fraction * traj.samples.len() as f64).ceil() as usize;
        let strobe = traj.samples[keep.min(traj.samples.len())..].iter().map(|s| s.x).collect();
        seed = Some(traj.final_state);
        out.push(ClassicalScanPoint { x_w, strobe, lambda, impacts: traj.impact_times.len(), cold_start });
    }
    Ok(out)
}

/// Positions `start + i step` up to `end` inclusive.
pub fn wall_positions(start: f64, end: f64, step: f64) -> Result<Vec<f64>, ClassicalError> {
    if !(step > 0.0) || !(end >= start) {
        return Err(ClassicalError::InvalidScan("step must be positive and end >= start"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saltation_matches_finite_difference() {
        let p = ImpactParams { k: 1.0, m: 1.0, x_w: 0.8, a_f: 0.7, omega_f: 1.7, restitution: 0.8 };
        let ic = ClassicalState { x: 0.0, v: 1.2, t: 0.0 };
        let t = 2.0;
        let end = |s: ClassicalState| {
            let tr = simulate_impact(&p, s, t, t).unwrap();
            assert_eq!(tr.impact_times.len(), 1);
            tr.samples[0]
        };
        let (_, tr) = lyapunov_classical(&p, ic, t, 0.0).unwrap();
        assert_eq!(tr.impact_times.len(), 1);
        let h = 1e-7;
        let base = end(ic);
        let dx = end(ClassicalState { x: ic.x + h, ..ic });
        let dv = end(ClassicalState { v: ic.v + h, ..ic });
        let fd = [[(dx.x - base.x) / h, (dv.x - base.x) / h], [(dx.v - base.v) / h, (dv.v - base.v) / h]];
        // analytic: flow * saltation * flow
        let t_hit = tr.impact_times[0];
        let flow = |dt: f64| {
            let (s, c) = dt.sin_cos();
            [[c, s], [-s, c]]
        };
        let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            m
        };
        let f = Flight::new(&p, &ic);
        let s = saltation_matrix(f.v(t_hit), p.acceleration(p.x_w, t_hit), p.restitution);
        let j = mul(flow(t - t_hit), mul(s, flow(t_hit)));
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - fd[i][k]).abs() < 1e-5, "{j:?} vs {fd:?}");
            }
        }
    }

    #[test]
    fn guards() {
        let p = ImpactParams { k: 1.0, m: 1.0, x_w: 1.0, a_f: 0.0, omega_f: 1.0, restitution: 0.0 };
        assert!(matches!(p.validate(), Err(ClassicalError::InvalidParams(_))));
        let p = ImpactParams { restitution: 1.0, a_f: 1.0, ..p };
        assert_eq!(p.validate(), Err(ClassicalError::ResonantForcing));
        assert!(wall_positions(0.0, 1.0, 0.0).is_err());
        assert!(wall_positions(0.0, 1.0, -0.1).is_err());
    }
}
