//! Stationary states of the unforced Hamiltonian.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::hamiltonian::{Hamiltonian, DEFAULT_STENCIL_ORDER};
use crate::lattice::{Grid, LatticeError, PotentialKind, PotentialSpec, WaveState};
use crate::linalg::{inverse_iteration, lowest_eigenvalues, LinalgError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("{requested} states requested but a grid of {n} points resolves at most {max}")]
    TooManyStates { requested: usize, n: usize, max: usize },
    #[error("Numerov-Cooley iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Lowest eigenpairs of a static Hamiltonian. Each state is stored on the
/// full grid (Dirichlet end points included) with `sum phi^2 dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub grid: Grid,
    pub energies: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub hbar: f64,
    pub m: f64,
}

impl EigenBasis {
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// Expansion coefficients `<phi_n|psi>`.
    pub fn project(&self, psi: &WaveState) -> Vec<Complex64> {
        let dx = self.grid.dx();
        self.states.iter().map(|phi| phi.iter().zip(&psi.psi).map(|(a, b)| b * *a).sum::<Complex64>() * dx).collect()
    }

    /// `sum_n c_n phi_n` on the grid.
    pub fn synthesize(&self, coeffs: &[Complex64], t: f64) -> WaveState {
        let mut psi = vec![Complex64::new(0.0, 0.0); self.grid.n()];
        for (c, phi) in coeffs.iter().zip(&self.states) {
            for (p, &f) in psi.iter_mut().zip(phi) {
                *p += c * f;
            }
        }
        WaveState::new(self.grid, psi, t)
    }
}

/// Symmetric matrix of position elements `x_nm`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PositionMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Lowest `n_states` eigenpairs of the unforced part of `spec` on `grid`
/// with the default kinetic stencil.
pub fn eigensolve(spec: &PotentialSpec, grid: &Grid, n_states: usize) -> Result<EigenBasis, SpectralError> {
    eigensolve_with_order(spec, grid, n_states, DEFAULT_STENCIL_ORDER)
}

pub fn eigensolve_with_order(spec: &PotentialSpec, grid: &Grid, n_states: usize, order: usize) -> Result<EigenBasis, SpectralError> {
    let max = grid.n() / 4;
    if n_states == 0 || n_states > max {
        return Err(SpectralError::TooManyStates { requested: n_states, n: grid.n(), max });
    }
    let spec = spec.unforced();
    let h = Hamiltonian::new(&spec, grid, order)?;
    let energies = lowest_eigenvalues(h.matrix(), n_states, 1e-13)?;
    let vectors = inverse_iteration(h.matrix(), &energies);
    let scale = 1.0 / grid.dx().sqrt();
    let n = grid.n();
    let states = vectors
        .into_iter()
        .map(|v| {
            let mut phi = vec![0.0; n];
            for (dst, src) in phi[1..n - 1].iter_mut().zip(&v) {
                *dst = src * scale;
            }
            fix_sign(&mut phi);
            phi
        })
        .collect();
    Ok(EigenBasis { grid: *grid, energies, states, hbar: spec.hbar, m: spec.m })
}

/// Makes the rightmost non-negligible component positive.
fn fix_sign(phi: &mut [f64]) {
    let max = phi.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if let Some(&last) = phi.iter().rev().find(|v| v.abs() > 1e-3 * max) {
        if last < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `x_nm = sum_i phi_n(x_i) x_i phi_m(x_i) dx`, mirrored so that
/// `x_nm == x_mn` bit for bit.
pub fn position_matrix(basis: &EigenBasis) -> PositionMatrix {
    let n = basis.n_states();
    let grid = &basis.grid;
    let dx = grid.dx();
    let xs = grid.positions();
    let mut data = vec![0.0; n * n];
    let mut weighted = vec![0.0; grid.n()];
    for a in 0..n {
        for ((w, &p), &x) in weighted.iter_mut().zip(&basis.states[a]).zip(&xs) {
            *w = p * x;
        }
        for b in a..n {
            let s: f64 = weighted.iter().zip(&basis.states[b]).map(|(p, q)| p * q).sum::<f64>() * dx;
            data[a * n + b] = s;
            data[b * n + a] = s;
        }
    }
    PositionMatrix { n, data }
}

/// Refines an eigenvalue by Numerov shooting with Cooley's energy
/// correction on the nodes of `grid` (Dirichlet at both ends).
pub fn numerov_verify(spec: &PotentialSpec, grid: &Grid, e_approx: f64) -> Result<f64, SpectralError> {
    const MAX_ITER: usize = 200;
    let spec = spec.unforced();
    spec.validate()?;
    if spec.is_hard() && grid.x_max() > spec.x_w * (1.0 + 1e-12) + 1e-12 {
        return Err(LatticeError::WallInsideDomain { x_w: spec.x_w, x_max: grid.x_max() }.into());
    }
    let n = grid.n();
    let v: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { spec.static_value(grid.x(i)) }).collect();
    let mut shooter = Numerov::new(&v, grid.dx(), 2.0 * spec.m / (spec.hbar * spec.hbar));
    let below = shooter.nodes(e_approx);
    let mut e = e_approx;
    for _ in 0..MAX_ITER {
        let de = shooter.cooley_correction(e);
        if !de.is_finite() {
            break;
        }
        // only the two levels adjacent to the starting energy are accepted
        let k = shooter.nodes(e + de);
        if k + 1 < below || k > below + 1 {
            break;
        }
        e += de;
        if de.abs() < 1e-10 {
            return Ok(e);
        }
    }
    Err(SpectralError::NoConvergence { iterations: MAX_ITER })
}

struct Numerov<'a> {
    v: &'a [f64],
    h: f64,
    k2: f64,
    psi: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> Numerov<'a> {
    fn new(v: &'a [f64], h: f64, k2: f64) -> Self {
        let n = v.len();
        Self { v, h, k2, psi: vec![0.0; n], y: vec![0.0; n] }
    }

    /// Sign changes of the outward solution over the whole grid, which
    /// equals the number of discrete levels below `e`.
    fn nodes(&self, e: f64) -> usize {
        let n = self.v.len();
        let h2 = self.h * self.h;
        let f = |i: usize| self.k2 * (self.v[i] - e);
        let (mut y_prev, mut psi) = (0.0, 1e-10);
        let mut y = (1.0 - h2 * f(1) / 12.0) * psi;
        let mut count = 0;
        for i in 1..n - 1 {
            let yn = 2.0 * y - y_prev + h2 * f(i) * psi;
            let psin = if i + 1 == n - 1 { yn } else { yn / (1.0 - h2 * f(i + 1) / 12.0) };
            if psin == 0.0 || (psin < 0.0) != (psi < 0.0) {
                count += 1;
            }
            let scale = if psin.abs() > 1e150 { 1e-150 } else { 1.0 };
            y_prev = y * scale;
            y = yn * scale;
            psi = psin * scale;
        }
        count
    }

    fn cooley_correction(&mut self, e: f64) -> f64 {
        let n = self.v.len();
        let (h, k2) = (self.h, self.k2);
        let h2 = h * h;
        let f = |i: usize| k2 * (self.v[i] - e);
        // match at a classical turning point; use the inner one when the
        // allowed region runs into the right boundary
        let allowed = |i: usize| self.v[i] < e;
        let outer = (1..n - 1).rev().find(|&i| allowed(i));
        let mut m = match outer {
            Some(i) if i + 8 < n - 1 => i,
            Some(_) => (1..n - 1).find(|&i| allowed(i)).unwrap_or(1),
            None => (1..n - 1).min_by(|&a, &b| self.v[a].total_cmp(&self.v[b])).unwrap_or(1),
        };
        m = m.clamp(2, n - 3);
        const BIG: f64 = 1e150;

        self.psi[0] = 0.0;
        self.y[0] = 0.0;
        self.psi[1] = 1e-10;
        self.y[1] = (1.0 - h2 * f(1) / 12.0) * self.psi[1];
        for i in 1..m {
            let yn = 2.0 * self.y[i] - self.y[i - 1] + h2 * f(i) * self.psi[i];
            self.y[i + 1] = yn;
            self.psi[i + 1] = yn / (1.0 - h2 * f(i + 1) / 12.0);
            if self.psi[i + 1].abs() > BIG {
                for j in 0..=i + 1 {
                    self.psi[j] /= BIG;
                    self.y[j] /= BIG;
                }
            }
        }
        let left_m = self.psi[m];

        let mut right = vec![0.0; n - m];
        let mut yr = vec![0.0; n - m];
        // right[k] holds index n-1-k
        right[1] = 1e-10;
        yr[1] = (1.0 - h2 * f(n - 2) / 12.0) * right[1];
        for k in 1..(n - 1 - m) {
            let i = n - 1 - k;
            let yn = 2.0 * yr[k] - yr[k - 1] + h2 * f(i) * right[k];
            yr[k + 1] = yn;
            right[k + 1] = yn / (1.0 - h2 * f(i - 1) / 12.0);
            if right[k + 1].abs() > BIG {
                for j in 0..=k + 1 {
                    right[j] /= BIG;
                    yr[j] /= BIG;
                }
            }
        }
        let right_m = right[n - 1 - m];
        if right_m == 0.0 || left_m == 0.0 {
            return f64::NAN;
        }
        let scale = left_m / right_m;
        for k in 0..(n - m) {
            let i = n - 1 - k;
            self.psi[i] = right[k] * scale;
            self.y[i] = yr[k] * scale;
        }
        let peak = self.psi.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let norm: f64 = self.psi.iter().map(|p| (p / peak) * (p / peak)).sum();
        let (ym1, y0, yp1) = (self.y[m - 1] / peak, self.y[m] / peak, self.y[m + 1] / peak);
        let psi_m = self.psi[m] / peak;
        let residual = -(yp1 - 2.0 * y0 + ym1) / (h2 * k2) + (self.v[m] - e) * psi_m;
        psi_m * residual / norm
    }
}

/// WKB estimate of the `index`-th level (0-based) of the unforced
/// oscillator with an optional hard wall.
pub fn wkb_level(spec: &PotentialSpec, index: usize) -> f64 {
    let hard = spec.is_hard() && spec.x_w.is_finite();
    let action = |e: f64| -> (f64, bool) {
        let a = (2.0 * e / spec.k).sqrt();
        let g = |u: f64| 0.5 * (u * (1.0 - u * u).max(0.0).sqrt() + u.asin());
        let upper = if hard { (spec.x_w / a).min(1.0) } else { 1.0 };
        if upper <= -1.0 {
            return (0.0, false);
        }
        ((2.0 * spec.m * e).sqrt() * a * (g(upper) - g(-1.0)), hard && upper < 1.0)
    };
    let target = |e: f64| {
        let (s, walled) = action(e);
        let maslov = if walled { 0.75 } else { 0.5 };
        s - PI * spec.hbar * (index as f64 + maslov)
    };
    let mut lo = 0.0;
    let mut hi = spec.hbar * spec.omega0() * (index as f64 + 1.0);
    if hard && spec.x_w < 0.0 {
        hi += 0.5 * spec.k * spec.x_w * spec.x_w;
    }
    while target(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grid for an `n_states` basis: edges at `1.5` times the classical
/// turning point of the highest requested level (or at the hard wall) and
/// at least `points_per_wavelength` nodes per de Broglie wavelength there.
pub fn basis_grid(spec: &PotentialSpec, n_states: usize, points_per_wavelength: f64) -> Result<Grid, SpectralError> {
    let e_max = wkb_level(spec, n_states.max(1) - 1);
    let reach = 1.5 * (2.0 * e_max / spec.k).sqrt();
    let left = -reach;
    let right = match spec.variant {
        PotentialKind::HardWall | PotentialKind::ForcedHardWall if spec.x_w < reach => spec.x_w,
        _ => reach,
    };
    let p_max = (2.0 * spec.m * e_max).sqrt();
    let dx = 2.0 * PI * spec.hbar / p_max / points_per_wavelength;
    let cells = ((right - left) / dx).ceil() as usize;
    let n = (cells + 1).max(4 * n_states + 4);
    Ok(Grid::new(left, right, n)?)
}
