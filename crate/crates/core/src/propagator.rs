//! Time evolution: exact eigenbasis propagation for static Hamiltonians and
//! a fourth-order commutator-free exponential integrator for forced ones.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::hamiltonian::{Hamiltonian, DEFAULT_STENCIL_ORDER};
use crate::krylov::{KrylovError, KrylovWorkspace};
use crate::lattice::{LatticeError, PotentialSpec, WaveState};
use crate::spectral::EigenBasis;

/// Per-step relative norm change above which a step is rejected.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;
/// Relative accuracy requested from each exponential-times-vector product.
pub const KRYLOV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagatorError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("end time must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("norm changed by {drift:e} in one step at t = {t}")]
    NormDrift { drift: f64, t: f64 },
    #[error("Krylov exponential did not converge within {0} vectors")]
    KrylovStall(usize),
    #[error("basis captures only {captured} of the state's norm")]
    BasisTruncation { captured: f64 },
    #[error("state lives on a different grid than the propagator")]
    GridMismatch,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl From<KrylovError> for PropagatorError {
    fn from(e: KrylovError) -> Self {
        match e {
            KrylovError::Stall(n) => PropagatorError::KrylovStall(n),
        }
    }
}

/// Nodes (fractions of `dt`) and weights of the three-exponential scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfetCoefficients {
    pub nodes: [f64; 3],
    pub g: [f64; 5],
}

impl CfetCoefficients {
    pub fn fourth_order() -> Self {
        let s = (3.0_f64 / 20.0).sqrt();
        let r = 10.0 / 87.0 * (5.0_f64 / 3.0).sqrt();
        Self { nodes: [0.5 - s, 0.5, 0.5 + s], g: [37.0 / 240.0 - r, -1.0 / 30.0, 37.0 / 240.0 + r, -11.0 / 360.0, 23.0 / 45.0] }
    }

    /// `2(g1 + g2 + g3 + g4) + g5`, which must equal one.
    pub fn weight_sum(&self) -> f64 {
        let g = &self.g;
        2.0 * (g[0] + g[1] + g[2] + g[3]) + g[4]
    }

    /// Weights on the three Hamiltonian samples for each exponential, in
    /// the order they act on the state.
    pub fn stages(&self) -> [[f64; 3]; 3] {
        let g = &self.g;
        [[g[2], g[1], g[0]], [g[3], g[4], g[3]], [g[0], g[1], g[2]]]
    }
}

impl Default for CfetCoefficients {
    fn default() -> Self {
        Self::fourth_order()
    }
}

/// Reusable stepper bound to one potential and grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PotentialSpec,
    ham: Hamiltonian,
    coeffs: CfetCoefficients,
    krylov: KrylovWorkspace,
    interior: Vec<Complex64>,
}

impl Propagator {
    pub fn new(spec: &PotentialSpec, grid: &crate::lattice::Grid) -> Result<Self, PropagatorError> {
        Self::with_order(spec, grid, DEFAULT_STENCIL_ORDER)
    }

    pub fn with_order(spec: &PotentialSpec, grid: &crate::lattice::Grid, order: usize) -> Result<Self, PropagatorError> {
        let ham = Hamiltonian::new(spec, grid, order)?;
        let dim = ham.dim();
        Ok(Self {
            spec: *spec,
            ham,
            coeffs: CfetCoefficients::fourth_order(),
            krylov: KrylovWorkspace::new(dim, KRYLOV_TOL),
            interior: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    fn load(&mut self, state: &WaveState) -> Result<f64, PropagatorError> {
        if state.grid != *self.ham.grid() {
            return Err(PropagatorError::GridMismatch);
        }
        let n = state.psi.len();
        self.interior.copy_from_slice(&state.psi[1..n - 1]);
        Ok(self.interior.iter().map(|z| z.norm_sqr()).sum())
    }

    fn store(&self, state: &mut WaveState, before: f64) -> Result<(), PropagatorError> {
        let after: f64 = self.interior.iter().map(|z| z.norm_sqr()).sum();
        let drift = (after - before).abs() / before;
        if !(drift < NORM_DRIFT_LIMIT) {
            return Err(PropagatorError::NormDrift { drift, t: state.t });
        }
        let n = state.psi.len();
        let s = (before / after).sqrt();
        for (dst, src) in state.psi[1..n - 1].iter_mut().zip(&self.interior) {
            *dst = src * s;
        }
        Ok(())
    }

    fn exponential(&mut self, tau: f64, weight: f64, field: f64) -> Result<(), PropagatorError> {
        let ham = &self.ham;
        self.krylov.expmv(tau, &mut self.interior, |x, y| ham.apply(weight, field, x, y))?;
        Ok(())
    }

    /// One CFET-4 step from `state.t` to `state.t + dt`.
    pub fn step(&mut self, state: &mut WaveState, dt: f64) -> Result<(), PropagatorError> {
        if !(dt > 0.0) {
            return Err(PropagatorError::NonPositiveStep(dt));
        }
        let before = self.load(state)?;
        let t = state.t;
        let samples = self.coeffs.nodes.map(|x| self.spec.forcing(t + x * dt));
        let tau = dt / self.spec.hbar;
        for stage in self.coeffs.stages() {
            let weight = stage[0] + stage[1] + stage[2];
            let field = stage[0] * samples[0] + stage[1] * samples[1] + stage[2] * samples[2];
            // exp(-i dt/hbar (w H_static + x F)) with F the weighted forcing
            self.exponential(tau, weight, field)?;
        }
        self.store(state, before)?;
        state.t = t + dt;
        Ok(())
    }

    /// `exp(-i dt H(t_frozen) / hbar)` applied to `state`; `dt` may be
    /// negative. The state's clock advances by `dt`.
    pub fn propagate_frozen(&mut self, state: &mut WaveState, t_frozen: f64, dt: f64) -> Result<(), PropagatorError> {
        let before = self.load(state)?;
        let field = self.spec.forcing(t_frozen);
        self.exponential(dt / self.spec.hbar, 1.0, field)?;
        self.store(state, before)?;
        state.t += dt;
        Ok(())
    }

    /// Advances `state` to `state.t + t_end` with steps of `dt` (the final
    /// step is shortened if `t_end` is not a multiple of `dt`) and calls
    /// `visit` with the initial state and every `sample_stride`-th state.
    pub fn run<F>(&mut self, state: &mut WaveState, t_end: f64, dt: f64, sample_stride: usize, mut visit: F) -> Result<(), PropagatorError>
    where
        F: FnMut(&WaveState) -> ControlFlow<()>,
    {
        if !(dt > 0.0) {
            return Err(PropagatorError::NonPositiveStep(dt));
        }
        if !(t_end > 0.0) {
            return Err(PropagatorError::NonPositiveDuration(t_end));
        }
        let stride = sample_stride.max(1);
        let steps = step_count(t_end, dt);
        let t0 = state.t;
        if visit(state).is_break() {
            return Ok(());
        }
        for k in 1..=steps {
            let target = if k == steps { t0 + t_end } else { t0 + k as f64 * dt };
            let h = target - state.t;
            self.step(state, h)?;
            state.t = target;
            if k % stride == 0 && visit(state).is_break() {
                break;
            }
        }
        Ok(())
    }
}

fn step_count(t_end: f64, dt: f64) -> usize {
    let raw = t_end / dt;
    let r = raw.round();
    if (raw - r).abs() < 1e-9 * raw.max(1.0) {
        r as usize
    } else {
        raw.ceil() as usize
    }
}

/// Single CFET-4 step with a freshly assembled Hamiltonian. Use
/// [`Propagator`] for repeated steps.
pub fn cfet4_step(spec: &PotentialSpec, psi: &WaveState, dt: f64) -> Result<WaveState, PropagatorError> {
    let mut p = Propagator::new(spec, &psi.grid)?;
    let mut out = psi.clone();
    p.step(&mut out, dt)?;
    Ok(out)
}

/// Repeated CFET-4 steps from `psi0` over `[psi0.t, psi0.t + t_end]`,
/// returning the initial state and every `sample_stride`-th state.
pub fn evolve(
    spec: &PotentialSpec,
    psi0: &WaveState,
    t_end: f64,
    dt: f64,
    sample_stride: usize,
) -> Result<Vec<WaveState>, PropagatorError> {
    let mut p = Propagator::new(spec, &psi0.grid)?;
    let mut state = psi0.clone();
    let mut out = Vec::new();
    p.run(&mut state, t_end, dt, sample_stride, |s| {
        out.push(s.clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Exact evolution within the span of `basis`:
/// `psi(t) = sum_n c_n exp(-i E_n t / hbar) phi_n`, with `t` measured from
/// `psi0.t`.
pub fn evolve_static(basis: &EigenBasis, psi0: &WaveState, times: &[f64]) -> Result<Vec<WaveState>, PropagatorError> {
    if psi0.grid != basis.grid {
        return Err(PropagatorError::GridMismatch);
    }
    let coeffs = basis.project(psi0);
    let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / psi0.norm_sqr();
    if !(captured > 1.0 - 1e-6) {
        return Err(PropagatorError::BasisTruncation { captured });
    }
    let mut rotated = coeffs.clone();
    Ok(times
        .iter()
        .map(|&t| {
            for ((r, c), e) in rotated.iter_mut().zip(&coeffs).zip(&basis.energies) {
                *r = c * Complex64::from_polar(1.0, -e * t / basis.hbar);
            }
            basis.synthesize(&rotated, psi0.t + t)
        })
        .collect())
}
