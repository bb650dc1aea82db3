//! Banded symmetric matrices and the eigen machinery built on them.
//!
//! Eigenvalues come from bisection on the inertia of `A - sigma I` (an
//! `LDL^T` sweep, the banded generalisation of the Sturm count) and
//! eigenvectors from inverse iteration with a partially pivoted band LU.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("requested {requested} eigenpairs of a {n}x{n} matrix")]
    TooMany { requested: usize, n: usize },
    #[error("implicit QL failed to converge")]
    NoConvergence,
}

/// Real symmetric band matrix; `bands[d][i] = A[i][i + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        Self { n, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn diag(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.bands[0]
    }

    pub fn band(&self, d: usize) -> &[f64] {
        &self.bands[d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d < self.bands.len() {
            self.bands[d][lo]
        } else {
            0.0
        }
    }

    /// Adds `v` to both `A[i][j]` and `A[j][i]` (once when `i == j`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.bands[hi - lo][lo] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        for (yi, (a, xi)) in y.iter_mut().zip(self.bands[0].iter().zip(x)) {
            *yi = a * xi;
        }
        for (d, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += a * x[i + d];
                y[i + d] += a * x[i];
            }
        }
    }

    /// `y = (A + diag(shift)) x` for complex vectors.
    pub fn matvec_complex(&self, shift: Option<&[f64]>, x: &[Complex64], y: &mut [Complex64]) {
        match shift {
            Some(s) => {
                for i in 0..self.n {
                    y[i] = x[i] * (self.bands[0][i] + s[i]);
                }
            }
            None => {
                for i in 0..self.n {
                    y[i] = x[i] * self.bands[0][i];
                }
            }
        }
        for (d, band) in self.bands.iter().enumerate().skip(1) {
            let (lo, hi) = (&x[..self.n - d], &x[d..]);
            for (i, &a) in band.iter().enumerate() {
                y[i] += hi[i] * a;
            }
            for (i, &a) in band.iter().enumerate() {
                y[i + d] += lo[i] * a;
            }
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut r = 0.0;
            for d in 1..self.bands.len() {
                if i + d < self.n {
                    r += self.bands[d][i].abs();
                }
                if i >= d {
                    r += self.bands[d][i - d].abs();
                }
            }
            lo = lo.min(self.bands[0][i] - r);
            hi = hi.max(self.bands[0][i] + r);
        }
        (lo, hi)
    }

    fn norm_estimate(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia of
    /// `A - sigma I`). `work` must hold `n * bandwidth + n` values.
    pub fn count_below(&self, sigma: f64, pivmin: f64, work: &mut [f64]) -> usize {
        let b = self.bandwidth();
        let n = self.n;
        let (l, dvec) = work.split_at_mut(n * b);
        let mut count = 0;
        for i in 0..n {
            let dmax = b.min(i);
            // L[i][i-d] stored at l[i*b + d - 1]
            for d in (1..=dmax).rev() {
                let j = i - d;
                let mut s = self.bands[d][j];
                for e in (d + 1)..=dmax {
                    // k = i - e, L[j][k] with j - k = e - d
                    let lik = l[i * b + e - 1];
                    let ljk = l[j * b + (e - d) - 1];
                    s -= lik * ljk * dvec[i - e];
                }
                l[i * b + d - 1] = s / dvec[j];
            }
            let mut di = self.bands[0][i] - sigma;
            for d in 1..=dmax {
                let lij = l[i * b + d - 1];
                di -= lij * lij * dvec[i - d];
            }
            if di.abs() < pivmin {
                di = -pivmin;
            }
            if di < 0.0 {
                count += 1;
            }
            dvec[i] = di;
        }
        count
    }
}

/// Lowest `k` eigenvalues of `a` in ascending order, bisected to an
/// absolute width of `abstol + 4 eps |lambda|`.
pub fn lowest_eigenvalues(a: &BandedSym, k: usize, abstol: f64) -> Result<Vec<f64>, LinalgError> {
    let n = a.n();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(LinalgError::TooMany { requested: k, n });
    }
    let b = a.bandwidth();
    let mut work = vec![0.0; n * b + n];
    let anorm = a.norm_estimate();
    let pivmin = f64::MIN_POSITIVE * 1e10 * anorm.max(1.0) * anorm.max(1.0);
    let (gl, gu) = a.gershgorin();
    let pad = 2.0 * f64::EPSILON * anorm + pivmin;
    let (gl, gu) = (gl - pad, gu + pad);

    let mut lo = vec![gl; k];
    let mut hi = vec![gu; k];
    let update = |sigma: f64, c: usize, lo: &mut [f64], hi: &mut [f64]| {
        for idx in 0..k {
            if idx < c {
                if sigma < hi[idx] {
                    hi[idx] = sigma;
                }
            } else if sigma > lo[idx] {
                lo[idx] = sigma;
            }
        }
    };
    let mut out = Vec::with_capacity(k);
    for idx in 0..k {
        loop {
            let width = hi[idx] - lo[idx];
            let scale = lo[idx].abs().max(hi[idx].abs());
            if width <= abstol + 4.0 * f64::EPSILON * scale || width <= pivmin {
                break;
            }
            let mid = 0.5 * (lo[idx] + hi[idx]);
            if mid <= lo[idx] || mid >= hi[idx] {
                break;
            }
            let c = a.count_below(mid, pivmin, &mut work);
            update(mid, c, &mut lo, &mut hi);
        }
        out.push(0.5 * (lo[idx] + hi[idx]));
    }
    Ok(out)
}

/// Partially pivoted LU of a band matrix with `b` sub- and super-diagonals;
/// row `i` stores columns `i - b ..= i + 2b`.
struct BandLu {
    n: usize,
    b: usize,
    w: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(m: &BandedSym, shift: f64) -> Self {
        let n = m.n();
        let b = m.bandwidth();
        let w = 3 * b + 1;
        let mut a = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + b - i);
        for i in 0..n {
            let jlo = i.saturating_sub(b);
            let jhi = (i + b).min(n - 1);
            for j in jlo..=jhi {
                let mut v = m.get(i, j);
                if i == j {
                    v -= shift;
                }
                a[at(i, j)] = v;
            }
        }
        let tiny = f64::EPSILON * m.norm_estimate();
        let mut piv = vec![0; n];
        for k in 0..n {
            let rmax = (k + b).min(n - 1);
            let mut p = k;
            let mut best = a[at(k, k)].abs();
            for i in (k + 1)..=rmax {
                let v = a[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            let cmax = (k + 2 * b).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    a.swap(at(k, j), at(p, j));
                }
            }
            if a[at(k, k)].abs() < tiny {
                a[at(k, k)] = tiny;
            }
            let pivot = a[at(k, k)];
            for i in (k + 1)..=rmax {
                let l = a[at(i, k)] / pivot;
                a[at(i, k)] = l;
                if l != 0.0 {
                    for j in (k + 1)..=cmax {
                        a[at(i, j)] -= l * a[at(k, j)];
                    }
                }
            }
        }
        Self { n, b, w, a, piv }
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.w);
        let at = |i: usize, j: usize| i * w + (j + b - i);
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in (k + 1)..=(k + b).min(n - 1) {
                x[i] -= self.a[at(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..=(k + 2 * b).min(n - 1) {
                s -= self.a[at(k, j)] * x[j];
            }
            x[k] = s / self.a[at(k, k)];
        }
    }
}

/// Eigenvectors (unit Euclidean norm) for the given eigenvalues of `a` by
/// inverse iteration. Vectors of nearby eigenvalues are reorthogonalised.
pub fn inverse_iteration(a: &BandedSym, eigenvalues: &[f64]) -> Vec<Vec<f64>> {
    let n = a.n();
    let anorm = a.norm_estimate();
    let cluster = 1e-6 * anorm;
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        let lu = BandLu::factor(a, lambda);
        // deterministic, non-degenerate start vector
        let mut x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 1.0) * 0.618_033_988_749_894_9 + idx as f64 * 0.414_213_562;
                0.5 + (t - t.floor())
            })
            .collect();
        for _ in 0..4 {
            lu.solve(&mut x);
            for (j, v) in vecs.iter().enumerate() {
                if (eigenvalues[j] - lambda).abs() < cluster {
                    let dot: f64 = v.iter().zip(&x).map(|(p, q)| p * q).sum();
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi -= dot * vi;
                    }
                }
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for xi in &mut x {
                *xi /= nrm;
            }
        }
        vecs.push(x);
    }
    vecs
}

/// Eigen-decomposition of a small symmetric tridiagonal matrix by implicit
/// QL. `diag` (length m) and `off` (length m-1) describe `T`; on return
/// `diag` holds the eigenvalues and `z` (row-major m x m) the eigenvectors
/// as columns.
pub fn tridiagonal_eigen(diag: &mut [f64], off: &[f64], z: &mut [f64]) -> Result<(), LinalgError> {
    let m = diag.len();
    let mut e = vec![0.0; m];
    e[..m.saturating_sub(1)].copy_from_slice(&off[..m.saturating_sub(1)]);
    z.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        z[i * m + i] = 1.0;
    }
    let d = diag;
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = mm;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                for k in 0..m {
                    let f = z[k * m + i + 1];
                    z[k * m + i + 1] = s * z[k * m + i] + c * f;
                    z[k * m + i] = c * z[k * m + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok(())
}
