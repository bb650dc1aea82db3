//! Lanczos approximation of `exp(-i tau M) v` for real symmetric `M`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::tridiagonal_eigen;

pub const MAX_KRYLOV_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KrylovError {
    #[error("Krylov iteration did not reach tolerance within {0} vectors")]
    Stall(usize),
}

/// Reusable buffers for repeated exponentials on vectors of one length.
#[derive(Debug, Clone)]
pub struct KrylovWorkspace {
    n: usize,
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    d: Vec<f64>,
    z: Vec<f64>,
    coeff: Vec<Complex64>,
    last_dim: usize,
    tol: f64,
}

impl KrylovWorkspace {
    pub fn new(n: usize, tol: f64) -> Self {
        Self {
            n,
            basis: Vec::new(),
            w: vec![Complex64::new(0.0, 0.0); n],
            alpha: Vec::new(),
            beta: Vec::new(),
            d: Vec::new(),
            z: Vec::new(),
            coeff: Vec::new(),
            last_dim: 0,
            tol,
        }
    }

    /// Krylov dimension used by the most recent call.
    pub fn last_dim(&self) -> usize {
        self.last_dim
    }

    /// Overwrites `v` with `exp(-i tau M) v`, where `apply(x, y)` computes
    /// `y = M x`. Stops once the a posteriori error estimate
    /// `beta_m |e_m^T exp(-i tau T_m) e_1|` drops below `tol`, relative to
    /// the norm of `v`.
    pub fn expmv<F>(&mut self, tau: f64, v: &mut [Complex64], mut apply: F) -> Result<usize, KrylovError>
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        assert_eq!(v.len(), self.n);
        let beta0 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beta0 == 0.0 || tau == 0.0 {
            self.last_dim = 0;
            return Ok(0);
        }
        self.alpha.clear();
        self.beta.clear();
        if self.basis.is_empty() {
            self.basis.push(vec![Complex64::new(0.0, 0.0); self.n]);
        }
        for (b, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *b = x / beta0;
        }
        let first_check = self.last_dim.saturating_sub(2).max(3);
        let mut scale = 0.0_f64;
        for j in 0..MAX_KRYLOV_DIM {
            apply(&self.basis[j], &mut self.w);
            let a: f64 = self.basis[j].iter().zip(&self.w).map(|(p, q)| (p.conj() * q).re).sum();
            for (wi, vi) in self.w.iter_mut().zip(&self.basis[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b = self.beta[j - 1];
                let (prev, _) = self.basis.split_at(j);
                for (wi, vi) in self.w.iter_mut().zip(&prev[j - 1]) {
                    *wi -= vi * b;
                }
            }
            self.alpha.push(a);
            let bnext = self.w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            scale = scale.max(a.abs()).max(bnext);
            let m = j + 1;
            let breakdown = bnext <= 1e-14 * scale;
            if breakdown || m >= first_check || m == MAX_KRYLOV_DIM {
                self.small_exponential(tau, m);
                let err = if breakdown { 0.0 } else { bnext * self.coeff[m - 1].norm() };
                if err <= self.tol {
                    self.combine(beta0, m, v);
                    self.last_dim = m;
                    return Ok(m);
                }
            }
            self.beta.push(bnext);
            if self.basis.len() <= m {
                self.basis.push(vec![Complex64::new(0.0, 0.0); self.n]);
            }
            let inv = 1.0 / bnext;
            let (_, rest) = self.basis.split_at_mut(m);
            for (dst, wi) in rest[0].iter_mut().zip(&self.w) {
                *dst = wi * inv;
            }
        }
        Err(KrylovError::Stall(MAX_KRYLOV_DIM))
    }

    /// `coeff = exp(-i tau T_m) e_1` for the current tridiagonal `T_m`.
    fn small_exponential(&mut self, tau: f64, m: usize) {
        self.d.clear();
        self.d.extend_from_slice(&self.alpha[..m]);
        self.z.resize(m * m, 0.0);
        tridiagonal_eigen(&mut self.d, &self.beta[..m.saturating_sub(1)], &mut self.z).expect("QL on a small real tridiagonal matrix");
        self.coeff.clear();
        for k in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..m {
                let phase = Complex64::from_polar(1.0, -tau * self.d[l]);
                s += phase * (self.z[k * m + l] * self.z[l]);
            }
            self.coeff.push(s);
        }
    }

    fn combine(&self, beta0: f64, m: usize, v: &mut [Complex64]) {
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for k in 0..m {
            let c = self.coeff[k] * beta0;
            for (vi, bi) in v.iter_mut().zip(&self.basis[k]) {
                *vi += bi * c;
            }
        }
    }
}
