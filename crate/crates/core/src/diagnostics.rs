//! Classification of real time series: amplitude spectra, the spectral
//! distribution function, the 0-1 test for chaos and finite-time Lyapunov
//! exponents from delay embeddings.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fft::FftBackend;
use crate::observables::TimeSeries;
use crate::rng;

const GOLDEN: f64 = 1.618_033_988_749_895;

/// Peaks at or above this fraction of the largest peak count as dominant.
pub const DOMINANT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("series of length {len} is shorter than the required {required}")]
    TooShort { len: usize, required: usize },
    #[error("{found} spectral peaks found, at least {required} needed")]
    TooFewPeaks { found: usize, required: usize },
    #[error("{zero_fraction:.3} of nearest-neighbour distances vanish")]
    DegenerateEmbedding { zero_fraction: f64 },
    #[error("power-law fit needs strictly positive data")]
    NonPositiveData,
    #[error("fit needs at least {required} points, got {found}")]
    TooFewPoints { found: usize, required: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Rectangular,
    Hann,
}

/// One-sided amplitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
}

impl Spectrum {
    /// Indices of strict local maxima of `amps` (end points excluded).
    pub fn peak_indices(&self) -> Vec<usize> {
        (1..self.amps.len().saturating_sub(1)).filter(|&k| self.amps[k] > self.amps[k - 1] && self.amps[k] > self.amps[k + 1]).collect()
    }

    /// Number of peaks with amplitude at least `fraction` of the largest peak.
    pub fn count_peaks_above(&self, fraction: f64) -> usize {
        let peaks = self.peak_indices();
        let top = peaks.iter().map(|&k| self.amps[k]).fold(0.0, f64::max);
        if top == 0.0 {
            return 0;
        }
        peaks.iter().filter(|&&k| self.amps[k] >= fraction * top).count()
    }

    pub fn dominant_peaks(&self) -> usize {
        self.count_peaks_above(DOMINANT_FRACTION)
    }
}

/// `|DFT|` of the mean-removed, tapered series for frequencies `0..=Nyquist`,
/// scaled so that a sinusoid of amplitude `a` on a frequency bin reads `a`.
pub fn power_spectrum<F: FftBackend>(series: &TimeSeries, taper: Taper, fft: &mut F) -> Result<Spectrum, DiagnosticsError> {
    const MIN_LEN: usize = 64;
    let n = series.len();
    if n < MIN_LEN {
        return Err(DiagnosticsError::TooShort { len: n, required: MIN_LEN });
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let weights: Vec<f64> = match taper {
        Taper::Rectangular => vec![1.0; n],
        Taper::Hann => (0..n).map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / n as f64).cos())).collect(),
    };
    let wsum: f64 = weights.iter().sum();
    let mut buf: Vec<Complex64> = series.values.iter().zip(&weights).map(|(v, w)| Complex64::new((v - mean) * w, 0.0)).collect();
    fft.forward(&mut buf);
    let half = n / 2;
    let df = 1.0 / (n as f64 * series.dt_sample);
    let freqs = (0..=half).map(|k| k as f64 * df).collect();
    let amps = (0..=half)
        .map(|k| {
            let edge = k == 0 || (n.is_multiple_of(2) && k == half);
            buf[k].norm() * if edge { 1.0 } else { 2.0 } / wsum
        })
        .collect();
    Ok(Spectrum { freqs, amps })
}

/// Counting function `N(sigma)` of spectral peaks and its power-law fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDistribution {
    pub sigma: Vec<f64>,
    pub counts: Vec<usize>,
    pub exponent: f64,
    pub stderr: f64,
    /// Threshold range used for the fit.
    pub fit_range: (f64, f64),
}

/// `p`-quantile of sorted data with linear interpolation.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Counts peaks above each threshold and fits `ln N` against `ln sigma`
/// over thresholds between the 20th and 90th percentile of the peak
/// amplitudes. Without an explicit grid, 40 log-spaced thresholds span that
/// range.
pub fn spectral_distribution(spec: &Spectrum, sigma_grid: Option<&[f64]>) -> Result<SpectralDistribution, DiagnosticsError> {
    const MIN_PEAKS: usize = 20;
    let mut peaks: Vec<f64> = spec.peak_indices().iter().map(|&k| spec.amps[k]).collect();
    if peaks.len() < MIN_PEAKS {
        return Err(DiagnosticsError::TooFewPeaks { found: peaks.len(), required: MIN_PEAKS });
    }
    peaks.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile(&peaks, 0.2), quantile(&peaks, 0.9));
    let sigma: Vec<f64> = match sigma_grid {
        Some(g) => g.to_vec(),
        None => {
            let m = 40;
            let ratio = hi / lo;
            let mut g: Vec<f64> = (0..m).map(|i| lo * ratio.powf(i as f64 / (m - 1) as f64)).collect();
            g[m - 1] = hi;
            g
        }
    };
    let counts: Vec<usize> = sigma.iter().map(|&s| peaks.len() - peaks.partition_point(|&a| a <= s)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        sigma.iter().zip(&counts).filter(|(&s, &c)| s >= lo && s <= hi && c > 0).map(|(&s, &c)| (s, c as f64)).unzip();
    let fit = power_law_fit(&xs, &ys)?;
    Ok(SpectralDistribution { sigma, counts, exponent: fit.slope, stderr: fit.stderr, fit_range: (lo, hi) })
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit, DiagnosticsError> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(DiagnosticsError::TooFewPoints { found: n, required: 3 });
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(LineFit { slope, intercept, stderr, rss })
}

/// Least squares on `(ln x, ln y)`; the slope is the exponent.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit, DiagnosticsError> {
    if xs.len() < 4 || ys.len() < 4 {
        return Err(DiagnosticsError::TooFewPoints { found: xs.len().min(ys.len()), required: 4 });
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(DiagnosticsError::NonPositiveData);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroOneMode {
    Standard,
    Modified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroOneResult {
    pub c_values: Vec<f64>,
    pub k_values: Vec<f64>,
    pub k_median: f64,
    pub mode: ZeroOneMode,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// `M_c(n) = (1/(N-n)) sum_{j<=N-n} |z(j+n) - z(j)|^2` for `n = 1..=n_cut`,
/// with `z(j) = sum_{i<=j} phi(i) exp(i i c)`, via one autocorrelation FFT.
pub fn mean_square_displacement<F: FftBackend>(phi: &[f64], c: f64, n_cut: usize, fft: &mut F) -> Vec<f64> {
    let n = phi.len();
    let len = (2 * n).next_power_of_two();
    let mut z = vec![Complex64::new(0.0, 0.0); len];
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &v) in phi.iter().enumerate() {
        acc += Complex64::from_polar(v, (j + 1) as f64 * c);
        z[j] = acc;
    }
    // prefix sums of |z|^2
    let mut energy = vec![0.0; n + 1];
    for j in 0..n {
        energy[j + 1] = energy[j] + z[j].norm_sqr();
    }
    fft.forward(&mut z);
    z.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
    fft.inverse(&mut z);
    (1..=n_cut)
        .map(|lag| {
            let cross = z[lag].re / len as f64;
            let head = energy[n] - energy[lag];
            let tail = energy[n - lag];
            (head + tail - 2.0 * cross) / (n - lag) as f64
        })
        .collect()
}

/// Series whose spread is below this fraction of their magnitude are
/// treated as constant: what remains is integration roundoff.
pub const CONSTANT_TOLERANCE: f64 = 1e-9;

/// Correlation form of the 0-1 test. The series is centered first, which
/// makes the standard mode invariant under `phi -> a phi + b`. `K_c` is
/// clamped to `[-0.05, 1.05]`; a constant series (see [`CONSTANT_TOLERANCE`])
/// yields `K = 0`.
pub fn zero_one_test<F: FftBackend>(
    series: &TimeSeries,
    mode: ZeroOneMode,
    n_c: usize,
    seed: u64,
    fft: &mut F,
) -> Result<ZeroOneResult, DiagnosticsError> {
    const MIN_LEN: usize = 2000;
    let n = series.len();
    if n < MIN_LEN {
        return Err(DiagnosticsError::TooShort { len: n, required: MIN_LEN });
    }
    let raw_mean = series.values.iter().sum::<f64>() / n as f64;
    let phi: Vec<f64> = series.values.iter().map(|v| v - raw_mean).collect();
    let std = (phi.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let scale = series.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let constant = std <= CONSTANT_TOLERANCE * scale || std == 0.0;

    let (lo, hi) = (PI / 5.0, 4.0 * PI / 5.0);
    let mut rng = rng::stream(seed, 0);
    let c_values: Vec<f64> = match mode {
        ZeroOneMode::Standard => (0..n_c).map(|_| rng.random_range(lo..hi)).collect(),
        ZeroOneMode::Modified => (1..=n_c).map(|k| lo + (hi - lo) * (k as f64 * GOLDEN).fract()).collect(),
    };
    let n_cut = n / 10;
    let ns: Vec<f64> = (1..=n_cut).map(|k| k as f64).collect();
    let mean = phi.iter().sum::<f64>() / n as f64;
    let noise_amp = 0.5 * std * 1e-2;
    let mut k_values = Vec::with_capacity(n_c);
    for &c in &c_values {
        if constant {
            k_values.push(0.0);
            continue;
        }
        let mut d = mean_square_displacement(&phi, c, n_cut, fft);
        for (k, v) in d.iter_mut().enumerate() {
            let nn = (k + 1) as f64;
            *v -= mean * mean * (1.0 - (nn * c).cos()) / (1.0 - c.cos());
        }
        if mode == ZeroOneMode::Modified {
            d.iter_mut().for_each(|v| *v += noise_amp * rng.random_range(-1.0..1.0));
        }
        k_values.push(correlation(&ns, &d).clamp(-0.05, 1.05));
    }
    let k_median = median(&k_values);
    Ok(ZeroOneResult { c_values, k_values, k_median, mode })
}

/// Lag of the first local minimum of the sample autocorrelation, or 1 if
/// there is none within half the series.
pub fn autocorrelation_first_minimum(values: &[f64]) -> usize {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let acf = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n - lag) as f64;
    let mut prev = acf(0);
    let mut cur = acf(1);
    for lag in 1..n / 2 {
        let next = acf(lag + 1);
        if cur < prev && cur <= next {
            return lag;
        }
        prev = cur;
        cur = next;
    }
    1
}

/// Mean spacing between upward mean crossings, in samples.
pub fn mean_period(values: &[f64]) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ups: Vec<usize> = (1..n).filter(|&i| values[i - 1] < mean && values[i] >= mean).collect();
    if ups.len() < 2 {
        return n as f64;
    }
    (ups[ups.len() - 1] - ups[0]) as f64 / (ups.len() - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtleDistribution {
    pub window_length: usize,
    pub exponents: Vec<f64>,
    pub positive_fraction: f64,
}

impl FtleDistribution {
    pub fn mean(&self) -> f64 {
        self.exponents.iter().sum::<f64>() / self.exponents.len() as f64
    }
}

struct Embedding {
    data: Vec<f64>,
    dim: usize,
    count: usize,
}

impl Embedding {
    fn new(values: &[f64], dim: usize, delay: usize) -> Self {
        let count = values.len() - (dim - 1) * delay;
        let mut data = Vec::with_capacity(count * dim);
        for i in 0..count {
            for k in 0..dim {
                data.push(values[i + k * delay]);
            }
        }
        Self { data, dim, count }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist2(&self, i: usize, j: usize) -> f64 {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Nearest neighbour of every `i < usable` among `j < usable` with
    /// `|i - j| > theiler`, as `(j, squared distance)`.
    fn neighbours(&self, usable: usize, theiler: usize) -> Vec<Option<(usize, f64)>> {
        (0..usable)
            .map(|i| {
                let pi = self.point(i);
                let mut best: Option<(usize, f64)> = None;
                for j in 0..usable {
                    if i.abs_diff(j) <= theiler {
                        continue;
                    }
                    let bound = best.map_or(f64::INFINITY, |b| b.1);
                    let mut d = 0.0;
                    for (a, b) in pi.iter().zip(self.point(j)) {
                        d += (a - b) * (a - b);
                        if d >= bound {
                            break;
                        }
                    }
                    if d < bound {
                        best = Some((j, d));
                    }
                }
                best
            })
            .collect()
    }
}

/// Embeds, pairs each point with its nearest neighbour outside one mean
/// period, and returns the pairs that can be followed for `horizon` steps.
fn neighbour_pairs(
    series: &TimeSeries,
    embed_dim: usize,
    delay: usize,
    horizon: usize,
) -> Result<(Embedding, Vec<(usize, usize, f64)>), DiagnosticsError> {
    let n = series.len();
    let required = embed_dim.max(1) * delay.max(1) + 10 * horizon.max(1);
    if n < required {
        return Err(DiagnosticsError::TooShort { len: n, required });
    }
    let emb = Embedding::new(&series.values, embed_dim.max(1), delay.max(1));
    let usable = emb.count - horizon;
    let theiler = mean_period(&series.values).ceil() as usize;
    let nb = emb.neighbours(usable, theiler);
    // distances at round-off level count as coincident points
    let (lo, hi) = series.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let tiny = (1e-10 * (hi - lo)).powi(2);
    let found = nb.iter().flatten().count();
    let zeros = nb.iter().flatten().filter(|(_, d)| *d <= tiny).count();
    let zero_fraction = zeros as f64 / found.max(1) as f64;
    if found == 0 || zero_fraction > 0.5 {
        return Err(DiagnosticsError::DegenerateEmbedding { zero_fraction: if found == 0 { 1.0 } else { zero_fraction } });
    }
    let pairs = nb.iter().enumerate().filter_map(|(i, b)| b.and_then(|(j, d)| (d > tiny).then(|| (i, j, d.sqrt())))).collect();
    Ok((emb, pairs))
}

/// Finite-time exponents `ln(d(i+w)/d(i)) / (w dt)` over nearest-neighbour
/// pairs of the delay embedding.
pub fn finite_time_lyapunov(
    series: &TimeSeries,
    embed_dim: usize,
    delay: usize,
    window: usize,
) -> Result<FtleDistribution, DiagnosticsError> {
    let window = window.max(1);
    let (emb, pairs) = neighbour_pairs(series, embed_dim, delay, window)?;
    let span = window as f64 * series.dt_sample;
    let exponents: Vec<f64> = pairs
        .iter()
        .filter_map(|&(i, j, d0)| {
            let d = emb.dist2(i + window, j + window).sqrt();
            (d > 0.0).then(|| (d / d0).ln() / span)
        })
        .collect();
    let positive = exponents.iter().filter(|&&e| e > 0.0).count();
    let positive_fraction = positive as f64 / exponents.len().max(1) as f64;
    Ok(FtleDistribution { window_length: window, exponents, positive_fraction })
}

/// Largest exponent from the whole series: slope of the mean log
/// divergence of nearest-neighbour pairs over `0..=horizon` steps.
pub fn largest_lyapunov(series: &TimeSeries, embed_dim: usize, delay: usize, horizon: usize) -> Result<f64, DiagnosticsError> {
    let horizon = horizon.max(2);
    let (emb, pairs) = neighbour_pairs(series, embed_dim, delay, horizon)?;
    let mut ts = Vec::with_capacity(horizon + 1);
    let mut curve = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let (mut sum, mut count) = (0.0, 0usize);
        for &(i, j, _) in &pairs {
            let d = emb.dist2(i + k, j + k);
            if d > 0.0 {
                sum += 0.5 * d.ln();
                count += 1;
            }
        }
        if count > 0 {
            ts.push(k as f64 * series.dt_sample);
            curve.push(sum / count as f64);
        }
    }
    Ok(linear_fit(&ts, &curve)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::testing::Planner;

    fn sine(n: usize, cycles: f64) -> TimeSeries {
        let v = (0..n).map(|j| (2.0 * PI * cycles * j as f64 / n as f64).sin()).collect();
        TimeSeries::new(v, 1.0, 0.0).unwrap()
    }

    #[test]
    fn sinusoid_on_bin_has_one_peak() {
        let s = power_spectrum(&sine(512, 37.0), Taper::Hann, &mut Planner::new()).unwrap();
        let peaks = s.peak_indices();
        let top = *peaks.iter().max_by(|&&a, &&b| s.amps[a].total_cmp(&s.amps[b])).unwrap();
        assert_eq!(top, 37);
        assert!((s.amps[37] - 1.0).abs() < 1e-12);
        let next = peaks.iter().filter(|&&k| k != top).map(|&k| s.amps[k]).fold(0.0, f64::max);
        assert!(s.amps[top] / next > 100.0);
        assert_eq!(s.dominant_peaks(), 1);
    }

    #[test]
    fn spectrum_guard() {
        assert_eq!(
            power_spectrum(&sine(63, 3.0), Taper::Hann, &mut Planner::new()),
            Err(DiagnosticsError::TooShort { len: 63, required: 64 })
        );
    }

    #[test]
    fn msd_matches_direct_sum() {
        let phi: Vec<f64> = (0..300).map(|j| (0.3 * j as f64).sin() + 0.2 * (1.7 * j as f64).cos()).collect();
        let c = 1.1;
        let fast = mean_square_displacement(&phi, c, 30, &mut Planner::new());
        let mut z = Vec::new();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in phi.iter().enumerate() {
            acc += Complex64::from_polar(v, (j + 1) as f64 * c);
            z.push(acc);
        }
        for lag in 1..=30 {
            let direct: f64 = (0..300 - lag).map(|j| (z[j + lag] - z[j]).norm_sqr()).sum::<f64>() / (300 - lag) as f64;
            assert!((fast[lag - 1] - direct).abs() < 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn fit_guards() {
        assert_eq!(power_law_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0, 2.0, 3.0]), Err(DiagnosticsError::NonPositiveData));
        assert!(matches!(power_law_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(DiagnosticsError::TooFewPoints { .. })));
    }

    #[test]
    fn autocorrelation_minimum_of_sinusoid_is_half_period() {
        let v: Vec<f64> = (0..2000).map(|j| (2.0 * PI * j as f64 / 40.0).sin()).collect();
        assert!(autocorrelation_first_minimum(&v).abs_diff(20) <= 1);
        assert!((mean_period(&v) - 40.0).abs() < 0.5);
    }
}
