//! Scalar and phase-space observables of wavefunction snapshots.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fft::FftBackend;
use crate::lattice::{Grid, WaveState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObservableError {
    #[error("time series needs at least 2 samples and a positive spacing")]
    InvalidSeries,
    #[error("{retained} snapshots retained, at least {required} needed")]
    TooFewSamples { retained: usize, required: usize },
    #[error("snapshots do not share one grid")]
    GridMismatch,
    #[error("momentum lattice of {n_p} points cannot hold {needed} separations")]
    MomentumLatticeTooSmall { n_p: usize, needed: usize },
    #[error("Wigner transform left an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),
}

/// Uniformly sampled real series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub dt_sample: f64,
    pub t0: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt_sample: f64, t0: f64) -> Result<Self, ObservableError> {
        if values.len() < 2 || !(dt_sample > 0.0) {
            return Err(ObservableError::InvalidSeries);
        }
        Ok(Self { values, dt_sample, t0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt_sample
    }

    /// Drops the first `fraction` of the samples.
    pub fn skip_fraction(&self, fraction: f64) -> Self {
        let skip = (self.values.len() as f64 * fraction).floor() as usize;
        Self { values: self.values[skip..].to_vec(), dt_sample: self.dt_sample, t0: self.time(skip) }
    }

    /// Every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self { values: self.values.iter().step_by(stride).copied().collect(), dt_sample: self.dt_sample * stride as f64, t0: self.t0 }
    }
}

/// Wigner quasiprobability on the position grid times a momentum lattice,
/// stored row-major by position (`w[i * p.len() + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub x_grid: Grid,
    pub p: Vec<f64>,
    pub dp: f64,
    pub w: Vec<f64>,
}

impl WignerField {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.w[i * self.p.len() + k]
    }

    /// `sum_p W dp` for every grid point.
    pub fn position_marginal(&self) -> Vec<f64> {
        self.w.chunks(self.p.len()).map(|row| row.iter().sum::<f64>() * self.dp).collect()
    }

    /// `sum_x W dx` for every momentum.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let np = self.p.len();
        let mut out = vec![0.0; np];
        for row in self.w.chunks(np) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= self.x_grid.dx());
        out
    }
}

/// Shannon entropy (nats) of the position density.
pub fn entropy(psi: &WaveState) -> f64 {
    let s: f64 = psi.psi.iter().map(|z| z.norm_sqr()).filter(|&rho| rho >= 1e-300).map(|rho| -rho * rho.ln()).sum();
    s * psi.grid.dx()
}

/// Default momentum lattice size: twice the grid length rounded up to a
/// power of two.
pub fn default_momentum_points(n: usize) -> usize {
    2 * n.next_power_of_two()
}

/// `W(x, p) = (1/pi hbar) sum_y psi*(x+y) psi(x-y) exp(2ipy/hbar) dy` with
/// `y` on the grid spacing. The momentum lattice has `n_p` points
/// `p_k = (k - n_p/2) pi hbar / (n_p dx)`.
pub fn wigner<F: FftBackend>(psi: &WaveState, hbar: f64, n_p: usize, fft: &mut F) -> Result<WignerField, ObservableError> {
    let grid = psi.grid;
    let n = grid.n();
    let needed = 2 * ((n - 1) / 2) + 1;
    if n_p < needed {
        return Err(ObservableError::MomentumLatticeTooSmall { n_p, needed });
    }
    let dx = grid.dx();
    let dp = PI * hbar / (n_p as f64 * dx);
    let half = n_p / 2;
    let p: Vec<f64> = (0..n_p).map(|k| (k as f64 - half as f64) * dp).collect();
    let scale = dx / (PI * hbar);
    let mut w = vec![0.0; n * n_p];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_p];
    let mut residue = 0.0_f64;
    for i in 0..n {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let reach = i.min(n - 1 - i);
        for j in 0..=reach {
            let fj = psi.psi[i + j].conj() * psi.psi[i - j];
            buf[j] = fj;
            if j > 0 {
                buf[n_p - j] = psi.psi[i - j].conj() * psi.psi[i + j];
            }
        }
        fft.inverse(&mut buf);
        let row = &mut w[i * n_p..(i + 1) * n_p];
        for (m, out) in row.iter_mut().enumerate() {
            let k = (m + n_p - half) % n_p;
            let z = buf[k] * scale;
            residue = residue.max(z.im.abs());
            *out = z.re;
        }
    }
    if residue >= 1e-10 {
        return Err(ObservableError::ImaginaryResidue(residue));
    }
    Ok(WignerField { x_grid: grid, p, dp, w })
}

/// `(<x>, <p>, <x^2>, <p^2>)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub x: f64,
    pub p: f64,
    pub x2: f64,
    pub p2: f64,
}

const FIRST_DERIVATIVE: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const SECOND_DERIVATIVE: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Quadrature moments; momentum moments use eighth-order centered
/// differences with the odd continuation beyond the Dirichlet end points.
pub fn expectations(psi: &WaveState, hbar: f64) -> Expectations {
    let grid = &psi.grid;
    let n = grid.n() as isize;
    let dx = grid.dx();
    let at = |i: isize| -> Complex64 {
        if i < 0 {
            -psi.psi[(-i) as usize]
        } else if i >= n {
            -psi.psi[(2 * (n - 1) - i) as usize]
        } else {
            psi.psi[i as usize]
        }
    };
    let (mut sx, mut sx2) = (0.0, 0.0);
    let mut sp = Complex64::new(0.0, 0.0);
    let mut sp2 = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let z = psi.psi[i as usize];
        let x = grid.x(i as usize);
        let rho = z.norm_sqr();
        sx += x * rho;
        sx2 += x * x * rho;
        let mut d1 = Complex64::new(0.0, 0.0);
        let mut d2 = z * SECOND_DERIVATIVE[0];
        for r in 1..=4 {
            let (fwd, back) = (at(i + r as isize), at(i - r as isize));
            d1 += (fwd - back) * FIRST_DERIVATIVE[r - 1];
            d2 += (fwd + back) * SECOND_DERIVATIVE[r];
        }
        sp += z.conj() * d1;
        sp2 += z.conj() * d2;
    }
    Expectations {
        x: sx * dx,
        x2: sx2 * dx,
        // -i hbar psi' and -hbar^2 psi''
        p: (Complex64::new(0.0, -hbar) * sp).re,
        p2: -hbar * hbar * sp2.re / dx,
    }
}

/// Average of `|psi|^2` over the snapshots after the first `n_skip`,
/// normalized to unit integral.
pub fn stroboscopic_density(states: &[WaveState], n_skip: usize) -> Result<Vec<f64>, ObservableError> {
    const REQUIRED: usize = 16;
    let retained = states.get(n_skip..).unwrap_or(&[]);
    if retained.len() < REQUIRED {
        return Err(ObservableError::TooFewSamples { retained: retained.len(), required: REQUIRED });
    }
    let grid = retained[0].grid;
    let mut acc = vec![0.0; grid.n()];
    for s in retained {
        if s.grid != grid {
            return Err(ObservableError::GridMismatch);
        }
        for (a, z) in acc.iter_mut().zip(&s.psi) {
            *a += z.norm_sqr();
        }
    }
    let total: f64 = acc.iter().sum::<f64>() * grid.dx();
    acc.iter_mut().for_each(|v| *v /= total);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::testing::Planner;
    use crate::lattice::gaussian_packet;

    #[test]
    fn entropy_of_ground_state() {
        let grid = Grid::new(-12.0, 12.0, 2401).unwrap();
        let psi = gaussian_packet(&grid, 0.0, 0.5, 0.0, 1.0).unwrap();
        let expect = 0.5 * (1.0 + PI.ln());
        assert!((entropy(&psi) - expect).abs() < 1e-9);
    }

    #[test]
    fn wigner_normalization_and_sign() {
        let grid = Grid::new(-8.0, 8.0, 161).unwrap();
        let psi = gaussian_packet(&grid, 0.5, 0.5, 1.0, 1.0).unwrap();
        let mut fft = Planner::new();
        let w = wigner(&psi, 1.0, default_momentum_points(161), &mut fft).unwrap();
        let total: f64 = w.w.iter().sum::<f64>() * grid.dx() * w.dp;
        assert!((total - 1.0).abs() < 1e-10);
        // peak sits at the packet momentum
        let marg = w.momentum_marginal();
        let kmax = (0..marg.len()).max_by(|&a, &b| marg[a].total_cmp(&marg[b])).unwrap();
        assert!((w.p[kmax] - 1.0).abs() < 2.0 * w.dp);
    }

    #[test]
    fn stroboscopic_guard() {
        let grid = Grid::new(-8.0, 8.0, 81).unwrap();
        let psi = gaussian_packet(&grid, 0.0, 0.5, 0.0, 1.0).unwrap();
        let states = vec![psi.clone(), psi];
        assert_eq!(stroboscopic_density(&states, 0), Err(ObservableError::TooFewSamples { retained: 2, required: 16 }));
    }
}
