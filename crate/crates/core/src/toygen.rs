//! Two-channel "toy medical" sine datasets with known ground truth.
//!
//! Every instance is a patient of type 1 or 2 whose amplitude `A` is drawn
//! once and shared by both channels; channel `i` oscillates at its own
//! frequency with i.i.d. Gaussian measurement noise on every sample.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::MtsDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyVariant {
    SimpleSine,
    FreqChange,
    Anomaly,
}

impl ToyVariant {
    pub const ALL: [ToyVariant; 3] = [Self::SimpleSine, Self::FreqChange, Self::Anomaly];

    pub fn name(self) -> &'static str {
        match self {
            Self::SimpleSine => "simple-sine",
            Self::FreqChange => "freq-change",
            Self::Anomaly => "anomaly",
        }
    }
}

impl std::str::FromStr for ToyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "simple-sine" | "simplesine" | "simple" => Ok(Self::SimpleSine),
            "freq-change" | "freqchange" => Ok(Self::FreqChange),
            "anomaly" | "anomalies" => Ok(Self::Anomaly),
            other => Err(Error::Config(format!("unknown toy variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySpec {
    pub variant: ToyVariant,
    pub n_per_type: usize,
    pub length: usize,
    /// Cycles per timestep.
    pub freq_ch1: f64,
    pub freq_ch2: f64,
    pub amp_mean_pt1: f64,
    pub amp_mean_pt2: f64,
    pub amp_sd: f64,
    pub noise_sd: f64,
    /// Standard deviation of the noise that overwrites the anomalous span.
    pub anomaly_sd: f64,
    /// Width of the anomalous span as a fraction of the length, centred.
    pub anomaly_fraction: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            variant: ToyVariant::SimpleSine,
            n_per_type: 1024,
            length: 800,
            freq_ch1: 0.01,
            freq_ch2: 0.005,
            amp_mean_pt1: 0.4,
            amp_mean_pt2: 0.6,
            amp_sd: 0.05,
            noise_sd: 0.05,
            anomaly_sd: 0.05,
            anomaly_fraction: 0.25,
            seed: 0,
        }
    }
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_per_type == 0 {
            return fail("n_per_type must be positive");
        }
        if self.length < 2 {
            return fail("length must be at least 2");
        }
        if !(self.amp_sd > 0.0) {
            return fail("amp_sd must be positive");
        }
        if !(self.noise_sd >= 0.0) || !(self.anomaly_sd >= 0.0) {
            return fail("noise spreads must be non-negative");
        }
        if !(self.freq_ch1 > 0.0 && self.freq_ch2 > 0.0) {
            return fail("frequencies must be positive");
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return fail("anomaly_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Half-open anomalous span `[L/2 - w/2, L/2 + w/2)`.
    pub fn anomaly_span(&self) -> (usize, usize) {
        let half = (self.length as f64 * self.anomaly_fraction / 2.0).round() as usize;
        let mid = self.length / 2;
        (mid.saturating_sub(half), (mid + half).min(self.length))
    }
}

/// Ground truth for one generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyTruth {
    /// 1 or 2.
    pub patient_type: u8,
    pub amplitude: f64,
}

/// Sine phase at step `t`; with `doubling` the frequency doubles at `L/2`
/// and the phase stays continuous across the switch.
fn phase(freq: f64, t: usize, length: usize, doubling: bool) -> f64 {
    let switch = length / 2;
    if doubling && t >= switch {
        2.0 * PI * (freq * switch as f64 + 2.0 * freq * (t - switch) as f64)
    } else {
        2.0 * PI * freq * t as f64
    }
}

/// Returns `2 * n_per_type` two-channel instances (type 1 first) labeled
/// 0 for type 1 and 1 for type 2.
pub fn generate_toy(spec: &ToySpec) -> Result<(MtsDataset, Vec<ToyTruth>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let anomaly = Normal::new(0.0, spec.anomaly_sd).map_err(|e| Error::Config(e.to_string()))?;
    let amps = [
        Normal::new(spec.amp_mean_pt1, spec.amp_sd),
        Normal::new(spec.amp_mean_pt2, spec.amp_sd),
    ]
    .map(|d| d.expect("validated spread"));

    let l = spec.length;
    let n = 2 * spec.n_per_type;
    let doubling = spec.variant == ToyVariant::FreqChange;
    let (a0, a1) = spec.anomaly_span();
    let mut values = Vec::with_capacity(n * 2 * l);
    let mut truth = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let pt = usize::from(k >= spec.n_per_type);
        let a = amps[pt].sample(&mut rng);
        for freq in [spec.freq_ch1, spec.freq_ch2] {
            for t in 0..l {
                let v = if spec.variant == ToyVariant::Anomaly && (a0..a1).contains(&t) {
                    anomaly.sample(&mut rng)
                } else {
                    a * phase(freq, t, l, doubling).sin() + noise.sample(&mut rng)
                };
                values.push(v);
            }
        }
        truth.push(ToyTruth {
            patient_type: pt as u8 + 1,
            amplitude: a,
        });
        labels.push(pt as u8);
    }
    Ok((MtsDataset::new(n, 2, l, values, Some(labels))?, truth))
}

/// Sidecar CSV: `instance,patient_type,amplitude`.
pub fn save_truth_csv(truth: &[ToyTruth], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("instance,patient_type,amplitude\n");
    for (i, t) in truth.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{:?}", t.patient_type, t.amplitude);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> ToySpec {
        ToySpec {
            n_per_type: 1,
            length: 200,
            amp_sd: 1e-12,
            noise_sd: 0.0,
            ..ToySpec::default()
        }
    }

    #[test]
    fn analytic_sine_values() {
        let (d, _) = generate_toy(&noiseless()).unwrap();
        let s = d.series(0, 0);
        assert!(s[0].abs() < 1e-12);
        assert!((s[25] - 0.4).abs() < 1e-9);
        // channel 2 at half the frequency peaks at t = 50
        assert!((d.series(0, 1)[50] - 0.4).abs() < 1e-9);
        assert!((d.series(1, 0)[25] - 0.6).abs() < 1e-9);
    }

    #[test]
    fn seeds_are_bitwise_reproducible() {
        let spec = ToySpec {
            n_per_type: 8,
            length: 64,
            seed: 42,
            ..ToySpec::default()
        };
        assert_eq!(generate_toy(&spec).unwrap(), generate_toy(&spec).unwrap());
    }

    #[test]
    fn channels_share_amplitude() {
        let spec = ToySpec {
            n_per_type: 4,
            length: 400,
            noise_sd: 0.0,
            ..ToySpec::default()
        };
        let (d, truth) = generate_toy(&spec).unwrap();
        for (i, t) in truth.iter().enumerate() {
            let m0 = d.series(i, 0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let m1 = d.series(i, 1).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((m0 - t.amplitude.abs()).abs() < 1e-9);
            assert!((m1 - t.amplitude.abs()).abs() < 1e-9);
        }
    }

    fn periodogram_peak(x: &[f64]) -> usize {
        let n = x.len();
        (1..=n / 2)
            .max_by(|&a, &b| {
                let p = |k: usize| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (t, v) in x.iter().enumerate() {
                        let w = 2.0 * PI * (k * t) as f64 / n as f64;
                        re += v * w.cos();
                        im -= v * w.sin();
                    }
                    re * re + im * im
                };
                p(a).total_cmp(&p(b))
            })
            .unwrap()
    }

    #[test]
    fn freq_change_doubles_peak() {
        let spec = ToySpec {
            variant: ToyVariant::FreqChange,
            ..noiseless()
        };
        let spec = ToySpec { length: 800, ..spec };
        let (d, _) = generate_toy(&spec).unwrap();
        let s = d.series(0, 0);
        let first = periodogram_peak(&s[..400]);
        let second = periodogram_peak(&s[400..]);
        assert_eq!(first, 4);
        assert_eq!(second, 2 * first);
        // continuity at the switch: no jump larger than one step of the faster sine
        let jump = (s[400] - s[399]).abs();
        assert!(jump < 0.4 * 2.0 * PI * 0.02 + 1e-9);
    }

    #[test]
    fn anomaly_span_is_noise() {
        let spec = ToySpec {
            variant: ToyVariant::Anomaly,
            n_per_type: 64,
            length: 800,
            ..ToySpec::default()
        };
        let (d, _) = generate_toy(&spec).unwrap();
        let (a0, a1) = spec.anomaly_span();
        assert_eq!((a0, a1), (300, 500));
        let mut var_sum = 0.0;
        let mut corr_sum = 0.0;
        let mut count = 0.0;
        for i in 0..d.n_instances() {
            for c in 0..2 {
                let seg = &d.series(i, c)[a0..a1];
                let m = seg.iter().sum::<f64>() / seg.len() as f64;
                var_sum += seg.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (seg.len() - 1) as f64;
                let f = if c == 0 { spec.freq_ch1 } else { spec.freq_ch2 };
                let template: Vec<f64> = (a0..a1).map(|t| (2.0 * PI * f * t as f64).sin()).collect();
                let dot: f64 = seg.iter().zip(&template).map(|(a, b)| a * b).sum();
                let nrm = (seg.iter().map(|v| v * v).sum::<f64>()
                    * template.iter().map(|v| v * v).sum::<f64>())
                .sqrt();
                corr_sum += dot / nrm;
                count += 1.0;
            }
        }
        let var = var_sum / count;
        assert!((var - 0.0025).abs() <= 0.3 * 0.0025, "variance {var}");
        assert!((corr_sum / count).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = ToySpec {
            amp_sd: 0.0,
            ..ToySpec::default()
        };
        assert!(generate_toy(&bad).is_err());
        assert!("bogus".parse::<ToyVariant>().is_err());
        assert_eq!("freq_change".parse::<ToyVariant>().unwrap(), ToyVariant::FreqChange);
    }
}
