//! Spatial lattice, wavefunction container and the three impact-oscillator
//! potentials (hard wall, forced hard wall, soft sigmoid wall).

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Errors raised while building lattices, states and potentials.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("invalid grid: need n >= 3 and x_max > x_min (got n={n}, [{x_min}, {x_max}])")]
    InvalidGrid { x_min: f64, x_max: f64, n: usize },
    #[error("wave packet clipped: tail mass {tail_mass:e} outside the domain")]
    PacketClipped { tail_mass: f64 },
    #[error("invalid potential: {0}")]
    InvalidPotential(&'static str),
    #[error("operation requires the soft sigmoid wall")]
    WrongVariant,
    #[error("resonant forcing: omega_f equals omega0, grazing amplitude undefined")]
    ResonantForcing,
    #[error("hard wall at x_w={x_w} lies inside the domain ending at {x_max}")]
    WallInsideDomain { x_w: f64, x_max: f64 },
}

/// Uniform lattice `x_i = x_min + i*dx`, `i = 0..n`.
///
/// The two end points carry the Dirichlet condition: wavefunctions vanish
/// there, so a hard wall is modelled by letting the grid end at `x_w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, LatticeError> {
        if n < 3 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(LatticeError::InvalidGrid { x_min, x_max, n });
        }
        let dx = (x_max - x_min) / (n - 1) as f64;
        Ok(Self { x_min, x_max, n, dx })
    }

    /// Grid ending on a Dirichlet wall at `x_w` with spacing as close as
    /// possible to (but not above) `dx_target`.
    pub fn ending_at(x_min: f64, x_w: f64, dx_target: f64) -> Result<Self, LatticeError> {
        let cells = ((x_w - x_min) / dx_target).ceil().max(2.0) as usize;
        Self::new(x_min, x_w, cells + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Position index range of the unknowns (the Dirichlet ends excluded).
    pub fn interior(&self) -> core::ops::Range<usize> {
        1..self.n - 1
    }
}

/// Complex wavefunction samples on a [`Grid`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl WaveState {
    pub fn new(grid: Grid, psi: Vec<Complex64>, t: f64) -> Self {
        assert_eq!(psi.len(), grid.n(), "psi length must match the grid");
        Self { grid, psi, t }
    }

    /// `sum |psi_i|^2 dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sqr().sqrt();
        for z in &mut self.psi {
            *z *= s;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `<self|other>` with the lattice measure.
    pub fn inner(&self, other: &WaveState) -> Complex64 {
        let s: Complex64 = self.psi.iter().zip(&other.psi).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.dx()
    }
}

/// Which of the three potentials a [`PotentialSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    HardWall,
    ForcedHardWall,
    SoftSigmoidWall,
}

/// Impact-oscillator potential.
///
/// * `HardWall`: `k x^2 / 2` for `x < x_w`, infinite beyond.
/// * `ForcedHardWall`: adds `x A_f sin(omega_f t + phase)` below the wall.
/// * `SoftSigmoidWall`: `V'' = k + kA / (1 + exp(-c (x - x_w)))`, integrated
///   twice with `V'(x) -> kx` as `x -> -inf` and `V(0) = 0`, plus the forcing
///   `x A_f cos(omega_f t + phase)`.
///
/// `x_w = inf` (serialized as `null`) means there is no wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub variant: PotentialKind,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(with = "wall_position")]
    pub x_w: f64,
    #[serde(default)]
    pub a_f: f64,
    #[serde(default = "one")]
    pub omega_f: f64,
    /// Stiffness factor `A` of the soft wall.
    #[serde(default)]
    pub stiffness: f64,
    /// Smoothness `c` of the soft wall.
    #[serde(default)]
    pub smoothness: f64,
    /// Extra forcing phase; zero reproduces the printed sin / cos conventions.
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

mod wall_position {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl PotentialSpec {
    /// Unforced hard wall with `k = m = hbar = 1`.
    pub fn hard_wall(x_w: f64) -> Self {
        Self {
            variant: PotentialKind::HardWall,
            k: 1.0,
            m: 1.0,
            hbar: 1.0,
            x_w,
            a_f: 0.0,
            omega_f: 1.0,
            stiffness: 0.0,
            smoothness: 0.0,
            phase: 0.0,
        }
    }

    pub fn forced_hard_wall(x_w: f64, a_f: f64, omega_f: f64) -> Self {
        Self { variant: PotentialKind::ForcedHardWall, a_f, omega_f, ..Self::hard_wall(x_w) }
    }

    pub fn soft_wall(x_w: f64, stiffness: f64, smoothness: f64, a_f: f64, omega_f: f64) -> Self {
        Self { variant: PotentialKind::SoftSigmoidWall, a_f, omega_f, stiffness, smoothness, ..Self::hard_wall(x_w) }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.k) {
            return Err(LatticeError::InvalidPotential("k must be positive"));
        }
        if !pos(self.m) {
            return Err(LatticeError::InvalidPotential("m must be positive"));
        }
        if !pos(self.hbar) {
            return Err(LatticeError::InvalidPotential("hbar must be positive"));
        }
        if self.x_w.is_nan() {
            return Err(LatticeError::InvalidPotential("x_w is NaN"));
        }
        if !self.a_f.is_finite() || !self.omega_f.is_finite() {
            return Err(LatticeError::InvalidPotential("forcing must be finite"));
        }
        if self.variant == PotentialKind::SoftSigmoidWall {
            if !pos(self.stiffness) {
                return Err(LatticeError::InvalidPotential("soft wall needs A > 0"));
            }
            if !pos(self.smoothness) {
                return Err(LatticeError::InvalidPotential("soft wall needs c > 0"));
            }
            if !self.x_w.is_finite() {
                return Err(LatticeError::InvalidPotential("soft wall needs a finite x_w"));
            }
        }
        Ok(())
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.variant, PotentialKind::HardWall | PotentialKind::ForcedHardWall)
    }

    /// Natural angular frequency `sqrt(k/m)` of the spring.
    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }

    /// Same potential with the forcing switched off.
    pub fn unforced(&self) -> Self {
        let mut s = *self;
        s.a_f = 0.0;
        if s.variant == PotentialKind::ForcedHardWall {
            s.variant = PotentialKind::HardWall;
        }
        s
    }

    /// Coefficient `f(t)` of the linear forcing term `x f(t)`.
    pub fn forcing(&self, t: f64) -> f64 {
        match self.variant {
            PotentialKind::HardWall => 0.0,
            PotentialKind::ForcedHardWall => self.a_f * (self.omega_f * t + self.phase).sin(),
            PotentialKind::SoftSigmoidWall => self.a_f * (self.omega_f * t + self.phase).cos(),
        }
    }

    /// Time-independent part of the potential (wall and springs). Returns
    /// `f64::INFINITY` on or beyond a hard wall.
    pub fn static_value(&self, x: f64) -> f64 {
        let harmonic = 0.5 * self.k * x * x;
        match self.variant {
            PotentialKind::HardWall | PotentialKind::ForcedHardWall => {
                if x >= self.x_w {
                    f64::INFINITY
                } else {
                    harmonic
                }
            }
            PotentialKind::SoftSigmoidWall => {
                let c = self.smoothness;
                let scale = self.k * self.stiffness / (c * c);
                harmonic + scale * (softplus_integral(c * (x - self.x_w)) - softplus_integral(-c * self.x_w))
            }
        }
    }

    /// Gradient `V'(x, t)` for the soft wall (including forcing).
    pub fn soft_force_gradient(&self, x: f64, t: f64) -> Result<f64, LatticeError> {
        if self.variant != PotentialKind::SoftSigmoidWall {
            return Err(LatticeError::WrongVariant);
        }
        let c = self.smoothness;
        Ok(self.k * x + self.k * self.stiffness / c * softplus(c * (x - self.x_w)) + self.forcing(t))
    }
}

/// Potential energy at `(x, t)`; hard walls give `f64::INFINITY` for `x >= x_w`.
pub fn potential_value(spec: &PotentialSpec, x: f64, t: f64) -> f64 {
    let v = spec.static_value(x);
    if v.is_infinite() {
        v
    } else {
        v + x * spec.forcing(t)
    }
}

/// `(V'', V''')` of the soft sigmoid wall.
pub fn soft_derivatives(spec: &PotentialSpec, x: f64) -> Result<(f64, f64), LatticeError> {
    if spec.variant != PotentialKind::SoftSigmoidWall {
        return Err(LatticeError::WrongVariant);
    }
    let c = spec.smoothness;
    let ka = spec.k * spec.stiffness;
    let (s, s_comp) = sigmoid_pair(c * (x - spec.x_w));
    Ok((spec.k + ka * s, ka * c * s * s_comp))
}

/// Forcing amplitude at which the steady driven orbit of the wall-less
/// oscillator just reaches `x_w`: `x_w m omega0 |omega_f - omega0|`.
pub fn grazing_amplitude(x_w: f64, m: f64, omega0: f64, omega_f: f64) -> Result<f64, LatticeError> {
    if omega_f == omega0 {
        return Err(LatticeError::ResonantForcing);
    }
    Ok(x_w * m * omega0 * (omega_f - omega0).abs())
}

/// Minimum-uncertainty Gaussian with density variance `variance`, mean
/// `mean` and momentum `momentum`, renormalized on the lattice.
pub fn gaussian_packet(grid: &Grid, mean: f64, variance: f64, momentum: f64, hbar: f64) -> Result<WaveState, LatticeError> {
    if !(variance > 0.0) || !(hbar > 0.0) {
        return Err(LatticeError::InvalidPotential("variance and hbar must be positive"));
    }
    let sd = variance.sqrt();
    let tail = 0.5 * libm::erfc((mean - grid.x_min()) / (sd * core::f64::consts::SQRT_2))
        + 0.5 * libm::erfc((grid.x_max() - mean) / (sd * core::f64::consts::SQRT_2));
    if !(tail <= 1e-8) {
        return Err(LatticeError::PacketClipped { tail_mass: tail });
    }
    let amp = (2.0 * PI * variance).powf(-0.25);
    let mut psi: Vec<Complex64> = (0..grid.n())
        .map(|i| {
            let x = grid.x(i);
            let d = x - mean;
            Complex64::from_polar(amp * (-d * d / (4.0 * variance)).exp(), momentum * x / hbar)
        })
        .collect();
    let last = grid.n() - 1;
    psi[0] = Complex64::new(0.0, 0.0);
    psi[last] = Complex64::new(0.0, 0.0);
    let mut state = WaveState::new(*grid, psi, 0.0);
    state.normalize();
    Ok(state)
}

/// Numerically stable `(sigma(u), 1 - sigma(u))`.
fn sigmoid_pair(u: f64) -> (f64, f64) {
    if u >= 0.0 {
        let e = (-u).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = u.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// `ln(1 + e^u)`.
pub(crate) fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `F(u) = int_{-inf}^{u} ln(1 + e^s) ds = -Li2(-e^u)`.
pub(crate) fn softplus_integral(u: f64) -> f64 {
    if u > 0.0 {
        // Li2 inversion: F(u) + F(-u) = pi^2/6 + u^2/2.
        PI * PI / 6.0 + 0.5 * u * u - softplus_integral(-u)
    } else {
        let y = u.exp();
        // Landen: -Li2(-y) = Li2(y/(1+y)) + ln(1+y)^2 / 2, with y/(1+y) <= 1/2.
        let l = y.ln_1p();
        dilog_small(y / (1.0 + y)) + 0.5 * l * l
    }
}

/// `Li2(w)` for `0 <= w <= 1/2` by its power series.
fn dilog_small(w: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = w;
    let mut k = 1.0f64;
    while pow > 1e-18 * sum.max(1e-300) && k < 200.0 {
        sum += pow / (k * k);
        pow *= w;
        k += 1.0;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_spacing() {
        assert_eq!(Grid::new(-10.0, 5.0, 16).unwrap().dx(), 1.0);
        let g = Grid::new(-40.0, 5.0, 4096).unwrap();
        assert_eq!(g.dx(), 45.0 / 4095.0);
        assert_relative_eq!(g.dx(), 0.010989, epsilon = 1e-6);
        assert!(matches!(Grid::new(0.0, 0.0, 2), Err(LatticeError::InvalidGrid { .. })));
        assert!(Grid::new(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn grid_rebuild_is_idempotent() {
        let g = Grid::new(-3.3, 7.1, 123).unwrap();
        let h = Grid::new(g.x_min(), g.x_max(), g.n()).unwrap();
        assert_eq!(g, h);
        assert_eq!(g.x(0), -3.3);
        assert_eq!(g.x(5), -3.3 + 5.0 * g.dx());
    }

    #[test]
    fn packet_ground_state_variance() {
        let g = Grid::new(-20.0, 10.0, 3001).unwrap();
        let var = 1.0 / (2.0 * (1.0f64 * 1.0).sqrt());
        assert_eq!(var, 0.5);
        let s = gaussian_packet(&g, -5.0, var, 0.0, 1.0).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let rho = s.density();
        let imax = (0..g.n()).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
        assert!((g.x(imax) + 5.0).abs() < 1e-9);
        let mean: f64 = (0..g.n()).map(|i| g.x(i) * rho[i]).sum::<f64>() * g.dx();
        let var_num: f64 = (0..g.n()).map(|i| (g.x(i) - mean).powi(2) * rho[i]).sum::<f64>() * g.dx();
        assert_relative_eq!(var_num, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn packet_at_edge_is_clipped() {
        let g = Grid::new(-10.0, 5.0, 301).unwrap();
        assert!(matches!(gaussian_packet(&g, 5.0, 0.5, 0.0, 1.0), Err(LatticeError::PacketClipped { .. })));
    }

    #[test]
    fn hard_wall_values() {
        let s = PotentialSpec::hard_wall(5.0);
        assert_eq!(potential_value(&s, 2.0, 0.0), 2.0);
        assert!(potential_value(&s, 5.0, 0.0).is_infinite());
        assert!(potential_value(&s, 6.0, 0.0).is_infinite());
        let f = PotentialSpec::forced_hard_wall(5.0, 2.0, 1.5);
        let t = 0.3;
        assert_relative_eq!(potential_value(&f, 1.0, t), 0.5 + 2.0 * (1.5 * t).sin());
    }

    #[test]
    fn soft_wall_sharp_limit() {
        let x_w = 0.5;
        let d = 0.3;
        let x = x_w + d;
        let exact = 0.5 * x * x + 0.5 * 10.0 * d * d;
        let mut last_err = f64::INFINITY;
        for c in [10.0, 100.0, 1000.0, 10000.0] {
            let s = PotentialSpec::soft_wall(x_w, 10.0, c, 0.0, 1.0);
            let err = (potential_value(&s, x, 0.0) - exact).abs();
            assert!(err < last_err);
            last_err = err;
        }
        assert!(last_err < 1e-6);
        // V(0) = 0 and cosine forcing
        let s = PotentialSpec::soft_wall(0.75, 10.0, 50.0, 10.0, 0.8046);
        assert!(potential_value(&s, 0.0, 1.0).abs() < 1e-14);
        assert_relative_eq!(potential_value(&s, -2.0, 1.0) - s.static_value(-2.0), -2.0 * 10.0 * (0.8046f64).cos());
    }

    #[test]
    fn soft_derivative_limits() {
        let s = PotentialSpec::soft_wall(1.0, 10.0, 20.0, 0.0, 1.0);
        let (v2, v3) = soft_derivatives(&s, 1.0).unwrap();
        assert_relative_eq!(v2, 10.0 / 2.0 + 1.0);
        assert_relative_eq!(v3, 10.0 * 20.0 / 4.0);
        let (v2, v3) = soft_derivatives(&s, -100.0).unwrap();
        assert_relative_eq!(v2, 1.0);
        assert!(v3.abs() < 1e-300);
        let (v2, v3) = soft_derivatives(&s, 100.0).unwrap();
        assert_relative_eq!(v2, 11.0);
        assert!(v3.abs() < 1e-300);
        assert_eq!(soft_derivatives(&PotentialSpec::hard_wall(1.0), 0.0), Err(LatticeError::WrongVariant));
    }

    #[test]
    fn grazing_amplitude_values() {
        let phi = (5f64.sqrt() + 1.0) / 2.0;
        assert_relative_eq!(grazing_amplitude(5.0, 1.0, 1.0, phi).unwrap(), 3.09017, epsilon = 1e-5);
        assert_eq!(grazing_amplitude(0.0, 1.0, 1.0, phi).unwrap(), 0.0);
        assert_eq!(grazing_amplitude(5.0, 1.0, 1.0, 1.0), Err(LatticeError::ResonantForcing));
    }

    #[test]
    fn softplus_integral_matches_quadrature() {
        // Simpson quadrature of ln(1+e^s) from -40 to u.
        for &u in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let a = -40.0;
            let n = 20000;
            let h = (u - a) / n as f64;
            let mut s = softplus(a) + softplus(u);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * softplus(a + i as f64 * h);
            }
            let quad = s * h / 3.0;
            assert_relative_eq!(softplus_integral(u), quad, epsilon = 1e-10, max_relative = 1e-10);
        }
    }
}
