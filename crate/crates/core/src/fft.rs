//! Discrete Fourier transforms are supplied by the caller so the core stays
//! `no_std`; the `qimpact` crate provides a backend built on `rustfft`.

use num_complex::Complex64;

/// Unnormalized in-place DFT of any length.
pub trait FftBackend {
    /// `X_k = sum_j x_j exp(-2 pi i j k / n)`.
    fn forward(&mut self, data: &mut [Complex64]);
    /// `x_j = sum_k X_k exp(+2 pi i j k / n)` (no `1/n` factor).
    fn inverse(&mut self, data: &mut [Complex64]);
}

#[cfg(test)]
pub(crate) mod testing {
    use super::FftBackend;
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    pub struct Planner(FftPlanner<f64>);

    impl Planner {
        pub fn new() -> Self {
            Self(FftPlanner::new())
        }
    }

    impl FftBackend for Planner {
        fn forward(&mut self, data: &mut [Complex64]) {
            self.0.plan_fft_forward(data.len()).process(data);
        }
        fn inverse(&mut self, data: &mut [Complex64]) {
            self.0.plan_fft_inverse(data.len()).process(data);
        }
    }
}
