//! Finite-difference Hamiltonian on the interior unknowns of a [`Grid`].

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::lattice::{Grid, LatticeError, PotentialSpec};
use crate::linalg::BandedSym;

/// Default accuracy order of the kinetic stencil.
pub const DEFAULT_STENCIL_ORDER: usize = 8;

/// Centered second-derivative weights `[c_r, ..., c_1, c_0]` (outermost
/// first) for the supported accuracy orders.
pub fn second_derivative_weights(order: usize) -> Option<&'static [f64]> {
    match order {
        2 => Some(&[1.0, -2.0]),
        4 => Some(&[-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0]),
        6 => Some(&[1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0]),
        8 => Some(&[-1.0 / 560.0, 8.0 / 315.0, -1.0 / 5.0, 8.0 / 5.0, -205.0 / 72.0]),
        _ => None,
    }
}

/// `H = -(hbar^2 / 2m) d^2/dx^2 + V(x)` restricted to the grid interior,
/// plus the positions needed for the linear forcing term.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Grid,
    matrix: BandedSym,
    positions: Vec<f64>,
}

impl Hamiltonian {
    /// Static part of `spec` on `grid`. Hard walls require the grid to end
    /// at or before the wall.
    pub fn new(spec: &PotentialSpec, grid: &Grid, order: usize) -> Result<Self, LatticeError> {
        spec.validate()?;
        let weights = second_derivative_weights(order).ok_or(LatticeError::InvalidPotential("stencil order must be 2, 4, 6 or 8"))?;
        if spec.is_hard() && grid.x_max() > spec.x_w * (1.0 + 1e-12) + 1e-12 {
            return Err(LatticeError::WallInsideDomain { x_w: spec.x_w, x_max: grid.x_max() });
        }
        let n = grid.n();
        let unknowns = n - 2;
        let radius = weights.len() - 1;
        let band = radius.min(unknowns.saturating_sub(1));
        let mut matrix = BandedSym::zeros(unknowns, band);
        let dx = grid.dx();
        let kin = -spec.hbar * spec.hbar / (2.0 * spec.m * dx * dx);
        let coef = |r: usize| kin * weights[radius - r];
        let last = (n - 1) as isize;
        for j in 0..unknowns {
            let i = (j + 1) as isize;
            matrix.add(j, j, coef(0));
            for r in 1..=radius {
                let ri = r as isize;
                for target in [i + ri, i - ri] {
                    // odd reflection about the Dirichlet end points
                    let (idx, s) = if target <= 0 {
                        (-target, -1.0)
                    } else if target >= last {
                        (2 * last - target, -1.0)
                    } else {
                        (target, 1.0)
                    };
                    if idx <= 0 || idx >= last {
                        continue;
                    }
                    let jj = (idx - 1) as usize;
                    // entries left of the diagonal were added from row jj
                    if jj >= j {
                        matrix.add(j, jj, s * coef(r));
                    }
                }
            }
        }
        let positions: Vec<f64> = grid.interior().map(|i| grid.x(i)).collect();
        for (d, &x) in matrix.diag_mut().iter_mut().zip(&positions) {
            *d += spec.static_value(x);
        }
        Ok(Self { grid: *grid, matrix, positions })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &BandedSym {
        &self.matrix
    }

    /// Interior positions, one per unknown.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn dim(&self) -> usize {
        self.positions.len()
    }

    /// `y = (w H_static + f diag(x)) v` on the interior unknowns.
    pub fn apply(&self, weight: f64, field: f64, v: &[Complex64], y: &mut [Complex64]) {
        self.matrix.matvec_complex(None, v, y);
        for ((yi, vi), x) in y.iter_mut().zip(v).zip(&self.positions) {
            *yi = *yi * weight + *vi * (field * x);
        }
    }
}
