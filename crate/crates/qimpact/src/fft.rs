//! `rustfft` backend for the core's transform trait.

use num_complex::Complex64;
use qimpact_core::fft::FftBackend;
use rustfft::FftPlanner;

/// Planner-backed FFT; plans are cached per length.
pub struct RustFft(FftPlanner<f64>);

impl RustFft {
    pub fn new() -> Self {
        Self(FftPlanner::new())
    }
}

impl Default for RustFft {
    fn default() -> Self {
        Self::new()
    }
}

impl FftBackend for RustFft {
    fn forward(&mut self, data: &mut [Complex64]) {
        self.0.plan_fft_forward(data.len()).process(data);
    }

    fn inverse(&mut self, data: &mut [Complex64]) {
        self.0.plan_fft_inverse(data.len()).process(data);
    }
}
