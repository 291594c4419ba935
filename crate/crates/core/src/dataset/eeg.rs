//! Hermetic EEG-like recording with annotated blink events.
//!
//! Blinks are damped oscillations volume-conducted to every frontal channel
//! with a shared polarity. Local artifacts use the same waveform family but
//! each channel draws its own polarity, so a single channel cannot tell them
//! from blinks; only the cross-channel pattern can. Background is AR(1)
//! coloured noise, and rare electrode pops provide outliers for the z-score
//! filter. Real recordings can replace this through the CSV layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Event, MtsDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EegFixtureSpec {
    pub n_channels: usize,
    /// Channels `0..n_informative` see blinks and artifacts; the rest are noise.
    pub n_informative: usize,
    pub n_events: usize,
    /// Frame length the recording is laid out for; each event owns `3 * window` steps.
    pub window: usize,
    pub blink_len_min: usize,
    pub blink_len_max: usize,
    pub blink_amp_mean: f64,
    pub blink_amp_sd: f64,
    /// Expected local artifacts per `window` steps.
    pub artifacts_per_window: f64,
    pub ar_coef: f64,
    pub noise_sd: f64,
    /// Per-sample, per-channel probability of an electrode pop.
    pub pop_rate: f64,
    pub pop_amp: f64,
    pub seed: u64,
}

impl Default for EegFixtureSpec {
    fn default() -> Self {
        Self {
            n_channels: 8,
            n_informative: 6,
            n_events: 160,
            window: 256,
            blink_len_min: 48,
            blink_len_max: 96,
            blink_amp_mean: 2.5,
            blink_amp_sd: 0.5,
            artifacts_per_window: 1.0,
            ar_coef: 0.9,
            noise_sd: 1.0,
            pop_rate: 2e-5,
            pop_amp: 40.0,
            seed: 7,
        }
    }
}

/// One continuous recording (a single instance) and its blink annotations.
#[derive(Debug, Clone)]
pub struct EegFixture {
    pub recording: MtsDataset,
    pub events: Vec<Event>,
}

fn waveform(t: usize, len: usize) -> f64 {
    let x = t as f64 / len as f64;
    (-3.0 * x).exp() * (2.0 * std::f64::consts::PI * 1.5 * x).sin()
}

/// Channel gain: informative channels taper from 1.0 to 0.5.
fn gain(spec: &EegFixtureSpec, c: usize) -> f64 {
    if c >= spec.n_informative {
        0.0
    } else if spec.n_informative == 1 {
        1.0
    } else {
        1.0 - 0.5 * c as f64 / (spec.n_informative - 1) as f64
    }
}

pub fn generate_eeg_fixture(spec: &EegFixtureSpec) -> Result<EegFixture> {
    if spec.n_channels == 0 || spec.n_informative > spec.n_channels {
        return Err(Error::Config("need 1 <= n_informative <= n_channels".into()));
    }
    if spec.n_events == 0 || spec.window < 4 {
        return Err(Error::Config("need at least one event and window >= 4".into()));
    }
    if spec.blink_len_min == 0 || spec.blink_len_min > spec.blink_len_max || spec.blink_len_max > spec.window / 2 {
        return Err(Error::Config(
            "blink lengths must satisfy 1 <= min <= max <= window / 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.ar_coef) || spec.noise_sd < 0.0 || spec.blink_amp_sd < 0.0 {
        return Err(Error::Config("ar_coef must be in [0, 1), spreads non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.n_channels;
    let segment = 3 * spec.window;
    let total = spec.n_events * segment;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let amp = Normal::new(spec.blink_amp_mean, spec.blink_amp_sd)
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut values = vec![0.0; c * total];
    let innov = spec.noise_sd * (1.0 - spec.ar_coef * spec.ar_coef).sqrt();
    for ch in 0..c {
        let s = &mut values[ch * total..(ch + 1) * total];
        let mut prev = spec.noise_sd * std.sample(&mut rng);
        for v in s.iter_mut() {
            prev = spec.ar_coef * prev + innov * std.sample(&mut rng);
            *v = prev;
        }
    }

    let add_wave = |values: &mut [f64], ch: usize, start: usize, len: usize, a: f64| {
        let s = &mut values[ch * total..(ch + 1) * total];
        for t in 0..len.min(total - start) {
            s[start + t] += a * waveform(t, len);
        }
    };

    let mut events = Vec::with_capacity(spec.n_events);
    for k in 0..spec.n_events {
        let len = rng.gen_range(spec.blink_len_min..=spec.blink_len_max);
        let start = k * segment + spec.window / 2 + rng.gen_range(0..spec.window / 2);
        let polarity = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let a = amp.sample(&mut rng).abs();
        for ch in 0..c {
            let g = gain(spec, ch);
            if g > 0.0 {
                add_wave(&mut values, ch, start, len, polarity * a * g);
            }
        }
        events.push(Event {
            instance: 0,
            start,
            end: start + len,
        });
    }

    let n_artifacts = (spec.artifacts_per_window * total as f64 / spec.window as f64).round() as usize;
    for _ in 0..n_artifacts {
        let len = rng.gen_range(spec.blink_len_min..=spec.blink_len_max);
        let start = rng.gen_range(0..total - len);
        let a = amp.sample(&mut rng).abs();
        for ch in 0..c {
            let g = gain(spec, ch);
            let polarity = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            if g > 0.0 {
                add_wave(&mut values, ch, start, len, polarity * a * g);
            }
        }
    }

    for v in values.iter_mut() {
        if rng.gen::<f64>() < spec.pop_rate {
            *v += if rng.gen::<bool>() { spec.pop_amp } else { -spec.pop_amp };
        }
    }

    Ok(EegFixture {
        recording: MtsDataset::new(1, c, total, values, None)?,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{extract_event_windows, zscore_filter_counted};

    fn brute_force_outliers(d: &MtsDataset, threshold: f64) -> usize {
        let mut count = 0;
        for c in 0..d.n_channels() {
            let xs: Vec<f64> = (0..d.n_instances()).flat_map(|i| d.series(i, c).to_vec()).collect();
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
            count += xs.iter().filter(|&&x| sd > 0.0 && ((x - m) / sd).abs() > threshold).count();
        }
        count
    }

    fn small() -> EegFixtureSpec {
        EegFixtureSpec {
            n_events: 10,
            ..EegFixtureSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_eeg_fixture(&small()).unwrap();
        let b = generate_eeg_fixture(&small()).unwrap();
        assert_eq!(a.recording, b.recording);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn zscore_count_matches_scan() {
        let fx = generate_eeg_fixture(&small()).unwrap();
        let expected = brute_force_outliers(&fx.recording, 3.0);
        let (filtered, n) = zscore_filter_counted(&fx.recording, 3.0).unwrap();
        assert!(expected > 0);
        assert_eq!(n, expected);
        assert_eq!(filtered.length(), fx.recording.length());
    }

    #[test]
    fn planted_events_give_balanced_clear_frames() {
        let spec = small();
        let fx = generate_eeg_fixture(&spec).unwrap();
        let margin = 32;
        let frames = extract_event_windows(&fx.recording, &fx.events, spec.window, margin).unwrap();
        let labels = frames.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 10);
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 10);

        // Recover each frame's start from channel 0 by exact matching, then
        // scan for overlaps against every event.
        let rec = fx.recording.series(0, 0);
        let w = spec.window;
        for i in 0..frames.n_instances() {
            let f = frames.series(i, 0);
            let start = (0..=rec.len() - w).find(|&s| rec[s..s + w] == *f).unwrap();
            let touches: Vec<&Event> = fx
                .events
                .iter()
                .filter(|e| start < e.end && e.start < start + w)
                .collect();
            if labels[i] == 1 {
                assert!(touches.iter().any(|e| e.start >= start && e.end <= start + w));
            } else {
                assert!(touches.is_empty());
                let clear = fx.events.iter().all(|e| {
                    start + w + margin <= e.start || e.end + margin <= start
                });
                assert!(clear);
            }
        }
    }
}
