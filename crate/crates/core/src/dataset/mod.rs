//! Multivariate time-series container and the preprocessing pipeline that
//! feeds every other module.
//!
//! Values are stored instance-major, then channel-major, then time, so the
//! slice for one instance is exactly one CSV row: channel 0 samples followed
//! by channel 1 samples and so on.

mod csv;
pub mod eeg;
mod preprocess;

pub use self::csv::{csv_shape, load_csv, save_csv, HEADER_TAG};
pub use preprocess::{
    extract_event_windows, forward_select_channels, zscore_filter, zscore_filter_counted, Event,
};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// N instances x C channels x L timesteps with optional binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MtsDataset {
    n_instances: usize,
    n_channels: usize,
    length: usize,
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
}

impl MtsDataset {
    pub fn new(
        n_instances: usize,
        n_channels: usize,
        length: usize,
        values: Vec<f64>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if n_instances == 0 {
            return Err(Error::Shape("dataset needs at least one instance".into()));
        }
        if n_channels == 0 {
            return Err(Error::Shape("dataset needs at least one channel".into()));
        }
        if length < 2 {
            return Err(Error::Shape(format!(
                "series length must be at least 2, got {length}"
            )));
        }
        let expected = n_instances * n_channels * length;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values for {n_instances}x{n_channels}x{length}, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let per = n_channels * length;
            return Err(Error::Data(format!(
                "non-finite value at instance {}, channel {}, step {}",
                pos / per,
                (pos % per) / length,
                pos % length
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n_instances {
                return Err(Error::Shape(format!(
                    "{} labels for {n_instances} instances",
                    labels.len()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::Data(format!("label {bad} is not binary")));
            }
        }
        Ok(Self {
            n_instances,
            n_channels,
            length,
            values,
            labels,
        })
    }

    /// Builds a dataset from nested `[instance][channel][t]` vectors.
    pub fn from_nested(data: &[Vec<Vec<f64>>], labels: Option<Vec<u8>>) -> Result<Self> {
        let n = data.len();
        let c = data.first().map_or(0, Vec::len);
        let l = data.first().and_then(|i| i.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * c * l);
        for (i, inst) in data.iter().enumerate() {
            if inst.len() != c || inst.iter().any(|s| s.len() != l) {
                return Err(Error::Shape(format!("instance {i} is ragged")));
            }
            for s in inst {
                values.extend_from_slice(s);
            }
        }
        Self::new(n, c, l, values, labels)
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn label(&self, instance: usize) -> Option<u8> {
        self.labels.as_ref().map(|l| l[instance])
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// One instance as a channel-major row of `C * L` values.
    pub fn instance(&self, i: usize) -> &[f64] {
        let w = self.n_channels * self.length;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn series(&self, instance: usize, channel: usize) -> &[f64] {
        let start = (instance * self.n_channels + channel) * self.length;
        &self.values[start..start + self.length]
    }

    pub(crate) fn series_mut(&mut self, instance: usize, channel: usize) -> &mut [f64] {
        let start = (instance * self.n_channels + channel) * self.length;
        &mut self.values[start..start + self.length]
    }

    pub fn with_labels(self, labels: Option<Vec<u8>>) -> Result<Self> {
        Self::new(
            self.n_instances,
            self.n_channels,
            self.length,
            self.values,
            labels,
        )
    }

    pub fn select_instances(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_channels * self.length);
        for &i in indices {
            if i >= self.n_instances {
                return Err(Error::Shape(format!(
                    "instance index {i} out of range ({} instances)",
                    self.n_instances
                )));
            }
            values.extend_from_slice(self.instance(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(
            indices.len(),
            self.n_channels,
            self.length,
            values,
            labels,
        )
    }

    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&c) = channels.iter().find(|&&c| c >= self.n_channels) {
            return Err(Error::Shape(format!(
                "channel index {c} out of range ({} channels)",
                self.n_channels
            )));
        }
        let mut values = Vec::with_capacity(self.n_instances * channels.len() * self.length);
        for i in 0..self.n_instances {
            for &c in channels {
                values.extend_from_slice(self.series(i, c));
            }
        }
        Self::new(
            self.n_instances,
            channels.len(),
            self.length,
            values,
            self.labels.clone(),
        )
    }

    /// Instances whose label equals `label`; errors when none match.
    pub fn filter_label(&self, label: u8) -> Result<Self> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("dataset is unlabeled".into()))?;
        let idx: Vec<usize> = (0..self.n_instances).filter(|&i| labels[i] == label).collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("class {label} is absent")));
        }
        self.select_instances(&idx)
    }

    /// Stacks the instances of `other` after those of `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.n_channels != other.n_channels || self.length != other.length {
            return Err(Error::Shape(format!(
                "cannot concatenate {}x{} with {}x{}",
                self.n_channels, self.length, other.n_channels, other.length
            )));
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            (None, None) => None,
            _ => return Err(Error::Data("cannot mix labeled and unlabeled sets".into())),
        };
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(
            self.n_instances + other.n_instances,
            self.n_channels,
            self.length,
            values,
            labels,
        )
    }

    /// Mean-pools every series over non-overlapping blocks of `factor` steps.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("downsample factor must be positive".into()));
        }
        let new_len = self.length / factor;
        let mut values = Vec::with_capacity(self.n_instances * self.n_channels * new_len);
        for i in 0..self.n_instances {
            for c in 0..self.n_channels {
                let s = self.series(i, c);
                values.extend(
                    s.chunks_exact(factor)
                        .map(|b| b.iter().sum::<f64>() / factor as f64),
                );
            }
        }
        Self::new(
            self.n_instances,
            self.n_channels,
            new_len,
            values,
            self.labels.clone(),
        )
    }

    /// `B x L` matrix holding channel `channel` of the given instances.
    pub fn channel_batch(&self, indices: &[usize], channel: usize) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.length));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r)
                .iter_mut()
                .zip(self.series(i, channel))
                .for_each(|(o, &v)| *o = v);
        }
        out
    }

    /// `B x (C*L)` matrix of channel-major instance rows.
    pub fn instance_batch(&self, indices: &[usize]) -> Array2<f64> {
        let w = self.n_channels * self.length;
        let mut out = Array2::zeros((indices.len(), w));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r)
                .iter_mut()
                .zip(self.instance(i))
                .for_each(|(o, &v)| *o = v);
        }
        out
    }

    /// Builds a dataset from a `N x (C*L)` matrix of channel-major rows.
    pub fn from_rows(
        rows: &Array2<f64>,
        n_channels: usize,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let (n, w) = rows.dim();
        if n_channels == 0 || w % n_channels != 0 {
            return Err(Error::Shape(format!(
                "row width {w} is not a multiple of {n_channels} channels"
            )));
        }
        Self::new(n, n_channels, w / n_channels, rows.iter().copied().collect(), labels)
    }

    pub fn split(&self, spec: &SplitSpec) -> Result<(Self, Self)> {
        let (train, test) = self.split_indices(spec)?;
        Ok((self.select_instances(&train)?, self.select_instances(&test)?))
    }

    /// Deterministic shuffled split, stratified by label when labels exist.
    pub fn split_indices(&self, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                spec.train_fraction
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let groups: Vec<Vec<usize>> = match &self.labels {
            Some(labels) => (0..=1u8)
                .map(|c| (0..self.n_instances).filter(|&i| labels[i] == c).collect())
                .collect(),
            None => vec![(0..self.n_instances).collect()],
        };
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut g in groups {
            g.shuffle(&mut rng);
            let k = (g.len() as f64 * spec.train_fraction).round() as usize;
            train.extend_from_slice(&g[..k]);
            test.extend_from_slice(&g[k..]);
        }
        if train.is_empty() || test.is_empty() {
            return Err(Error::Config(format!(
                "split of {} instances at fraction {} leaves one side empty",
                self.n_instances, spec.train_fraction
            )));
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
        Ok((train, test))
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
        }
    }
}
