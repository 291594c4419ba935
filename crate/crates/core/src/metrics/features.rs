use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub const N_FEATURES: usize = 15;

/// Feature names in output order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean",
    "sd",
    "skewness",
    "excess_kurtosis",
    "acf_lag1",
    "acf_first_below_inv_e",
    "dominant_frequency",
    "spectral_centroid",
    "amplitude",
    "trend_slope",
    "mean_crossing_rate",
    "longest_run_above_mean",
    "histogram5_mode",
    "histogram10_entropy",
    "large_step_fraction",
];

/// Feature extractor for series of one fixed length, with cached FFT plans.
///
/// Per feature (L = series length, x̄ the mean, s the population sd):
/// - `mean`, `sd`: x̄ and s.
/// - `skewness`, `excess_kurtosis`: standardized third moment, fourth moment minus 3; 0 when s = 0.
/// - `acf_lag1`: lag-1 autocorrelation of the mean-removed series; 0 when s = 0.
/// - `acf_first_below_inv_e`: first lag whose autocorrelation drops below 1/e (L if none, 0 when s = 0).
/// - `dominant_frequency`: k/L for the periodogram peak over k = 1..=L/2; 0 for a flat spectrum.
/// - `spectral_centroid`: power-weighted mean of k/L over the same bins; 0 for a flat spectrum.
/// - `amplitude`: sqrt(2) s.
/// - `trend_slope`: least-squares slope against t = 0..L-1.
/// - `mean_crossing_rate`: number of sign changes of x - x̄, over L.
/// - `longest_run_above_mean`: longest run of x > x̄, over L.
/// - `histogram5_mode`: centre of the fullest of 5 equal bins over [min, max] (lowest on ties).
/// - `histogram10_entropy`: Shannon entropy (nats) of a 10-bin histogram over [min, max]; 0 when constant.
/// - `large_step_fraction`: share of |first differences| exceeding their own population sd.
///
/// `mean` and `histogram5_mode` shift with the series; every other feature is
/// translation invariant.
pub struct FeatureBank {
    len: usize,
    pad: usize,
    fft_len: Arc<dyn Fft<f64>>,
    fft_pad: Arc<dyn Fft<f64>>,
    ifft_pad: Arc<dyn Fft<f64>>,
}

impl FeatureBank {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let pad = (2 * len).next_power_of_two();
        Self {
            len,
            pad,
            fft_len: planner.plan_fft_forward(len.max(1)),
            fft_pad: planner.plan_fft_forward(pad),
            ifft_pad: planner.plan_fft_inverse(pad),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Feature vector of `x`, which must have the bank's length.
    pub fn extract(&self, x: &[f64]) -> [f64; N_FEATURES] {
        assert_eq!(x.len(), self.len, "series length does not match the feature bank");
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let m2 = centred.iter().map(|d| d * d).sum::<f64>() / n;
        let sd = m2.sqrt();
        let flat = centred.iter().all(|&d| d == 0.0);
        let (skew, kurt) = if flat || m2 == 0.0 {
            (0.0, 0.0)
        } else {
            let m3 = centred.iter().map(|d| d.powi(3)).sum::<f64>() / n;
            let m4 = centred.iter().map(|d| d.powi(4)).sum::<f64>() / n;
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        };
        let (acf1, acf_e) = if flat { (0.0, 0.0) } else { self.autocorrelation(&centred) };
        let (dom, centroid) = self.spectrum(&centred);
        let slope = {
            let t_mean = (n - 1.0) / 2.0;
            let sxx: f64 = (0..x.len()).map(|t| (t as f64 - t_mean).powi(2)).sum();
            let sxy: f64 = centred.iter().enumerate().map(|(t, d)| (t as f64 - t_mean) * d).sum();
            sxy / sxx
        };
        let above: Vec<bool> = x.iter().map(|&v| v > mean).collect();
        let crossings = above.windows(2).filter(|w| w[0] != w[1]).count() as f64 / n;
        let longest = above
            .iter()
            .fold((0usize, 0usize), |(best, run), &a| {
                let run = if a { run + 1 } else { 0 };
                (best.max(run), run)
            })
            .0 as f64
            / n;
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let hist = |bins: usize| -> Vec<usize> {
            let mut counts = vec![0usize; bins];
            if hi > lo {
                let w = (hi - lo) / bins as f64;
                for &v in x {
                    let k = (((v - lo) / w) as usize).min(bins - 1);
                    counts[k] += 1;
                }
            } else {
                counts[0] = x.len();
            }
            counts
        };
        let mode = {
            let counts = hist(5);
            let best = counts
                .iter()
                .enumerate()
                .fold(0, |b, (k, &c)| if c > counts[b] { k } else { b });
            if hi > lo {
                lo + (best as f64 + 0.5) * (hi - lo) / 5.0
            } else {
                lo
            }
        };
        let entropy = -hist(10)
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>();
        let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let dn = diffs.len() as f64;
        let d_mean = diffs.iter().sum::<f64>() / dn;
        let d_sd = (diffs.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>() / dn).sqrt();
        let large = diffs.iter().filter(|d| d.abs() > d_sd).count() as f64 / dn;
        [
            mean,
            sd,
            skew,
            kurt,
            acf1,
            acf_e,
            dom,
            centroid,
            std::f64::consts::SQRT_2 * sd,
            slope,
            crossings,
            longest,
            mode,
            entropy.max(0.0),
            large,
        ]
    }

    fn autocorrelation(&self, centred: &[f64]) -> (f64, f64) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.pad];
        for (b, &v) in buf.iter_mut().zip(centred) {
            b.re = v;
        }
        self.fft_pad.process(&mut buf);
        for b in &mut buf {
            *b = Complex::new(b.norm_sqr(), 0.0);
        }
        self.ifft_pad.process(&mut buf);
        let r0 = buf[0].re;
        let acf = |k: usize| buf[k].re / r0;
        let lag1 = if centred.len() > 1 { acf(1) } else { 0.0 };
        let threshold = (-1.0f64).exp();
        let first = (1..centred.len())
            .find(|&k| acf(k) < threshold)
            .unwrap_or(centred.len());
        (lag1, first as f64)
    }

    fn spectrum(&self, centred: &[f64]) -> (f64, f64) {
        let mut buf: Vec<Complex<f64>> = centred.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft_len.process(&mut buf);
        let n = centred.len();
        let power: Vec<f64> = (1..=n / 2).map(|k| buf[k].norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        // treat round-off-level power as a flat spectrum
        let scale: f64 = centred.iter().map(|d| d * d).sum::<f64>() * n as f64;
        if total <= 1e-24 * scale.max(f64::MIN_POSITIVE) || total == 0.0 {
            return (0.0, 0.0);
        }
        let peak = power
            .iter()
            .enumerate()
            .fold(0, |b, (k, &p)| if p > power[b] { k } else { b });
        let centroid = power
            .iter()
            .enumerate()
            .map(|(k, p)| (k + 1) as f64 / n as f64 * p)
            .sum::<f64>()
            / total;
        ((peak + 1) as f64 / n as f64, centroid)
    }
}

/// Feature vector of one series (length at least 8).
pub fn feature_vector(series: &[f64]) -> [f64; N_FEATURES] {
    FeatureBank::new(series.len()).extract(series)
}
