use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::MtsDataset;
use crate::error::{Error, Result};
use crate::nn::{Criterion, NoiseShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CdType {
    #[default]
    #[serde(rename = "MLP", alias = "mlp")]
    Mlp,
    #[serde(rename = "LSTM", alias = "lstm")]
    Lstm,
}

/// Training hyper-parameters. JSON keys follow the usual COSCI-GAN
/// hyper-parameter names; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosciConfig {
    /// Channel count; `null` takes it from the training data.
    #[serde(rename = "Ngroups")]
    pub n_channels: Option<usize>,
    /// Series length; `null` takes it from the training data.
    #[serde(rename = "nsamples")]
    pub length: Option<usize>,
    pub criterion: Criterion,
    #[serde(rename = "CD_type")]
    pub cd_type: CdType,
    #[serde(rename = "LSTMG")]
    pub lstm_generators: bool,
    #[serde(rename = "LSTMD")]
    pub lstm_discriminators: bool,
    #[serde(rename = "withCD")]
    pub with_cd: bool,
    #[serde(rename = "nepochs")]
    pub n_epochs: usize,
    pub batch_size: usize,
    pub glr: f64,
    pub dlr: f64,
    pub cdlr: f64,
    pub real_data_fraction: f64,
    pub gamma: f64,
    pub noise_len: usize,
    /// Hidden width of channel generators (LSTM hidden or MLP hidden).
    pub g_hidden: usize,
    /// Hidden width of LSTM channel discriminators.
    pub d_hidden: usize,
    /// Hidden width of an LSTM central discriminator.
    pub cd_hidden: usize,
    /// Widths of the Linear-LeakyReLU-Dropout blocks of MLP discriminators.
    pub lld_widths: Vec<usize>,
    /// Dropout of the MLP central discriminator. Channel discriminators never use dropout.
    pub cd_dropout: f64,
    /// Use the literal minimax generator objective instead of the non-saturating one.
    pub minimax: bool,
    pub noise_shape: NoiseShape,
    pub seed: u64,
}

impl Default for CosciConfig {
    fn default() -> Self {
        Self {
            n_channels: None,
            length: None,
            criterion: Criterion::Bce,
            cd_type: CdType::Mlp,
            lstm_generators: true,
            lstm_discriminators: true,
            with_cd: true,
            n_epochs: 100,
            batch_size: 32,
            glr: 1e-3,
            dlr: 1e-3,
            cdlr: 1e-4,
            real_data_fraction: 1.0,
            gamma: 5.0,
            noise_len: 32,
            g_hidden: 256,
            d_hidden: 256,
            cd_hidden: 256,
            lld_widths: vec![256, 128, 64],
            cd_dropout: 0.3,
            minimax: false,
            noise_shape: NoiseShape::Sequence,
            seed: 0,
        }
    }
}

impl CosciConfig {
    /// Single-core preset: narrow nets, MLP channel discriminators, the
    /// noise vector fed as one step, small batches and 30 epochs.
    pub fn desk() -> Self {
        Self {
            g_hidden: 32,
            d_hidden: 32,
            cd_hidden: 16,
            lld_widths: vec![64, 32, 16],
            lstm_discriminators: false,
            noise_shape: NoiseShape::SingleStep,
            batch_size: 4,
            n_epochs: 30,
            ..Self::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.n_channels == Some(0) {
            return bad("Ngroups", "must be >= 1");
        }
        if matches!(self.length, Some(l) if l < 2) {
            return bad("nsamples", "must be >= 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.noise_len == 0 {
            return bad("noise_len", "must be >= 1");
        }
        for (name, lr) in [("glr", self.glr), ("dlr", self.dlr), ("cdlr", self.cdlr)] {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(name, "must be a positive finite number");
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad("gamma", "must be finite and >= 0");
        }
        if !(self.real_data_fraction > 0.0 && self.real_data_fraction <= 1.0) {
            return bad("real_data_fraction", "must lie in (0, 1]");
        }
        if self.g_hidden == 0 || self.d_hidden == 0 || self.cd_hidden == 0 {
            return bad("hidden", "widths must be >= 1");
        }
        if self.lld_widths.is_empty()
            || self.lld_widths.contains(&0)
            || self.lld_widths.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("lld_widths", "must be nonzero and strictly decreasing");
        }
        if !(0.0..1.0).contains(&self.cd_dropout) {
            return bad("cd_dropout", "must lie in [0, 1)");
        }
        Ok(())
    }

    /// Fills channel count and length from `data`, failing on disagreement.
    pub fn resolve(&self, data: &MtsDataset) -> Result<Self> {
        let mut cfg = self.clone();
        match cfg.n_channels {
            Some(c) if c != data.n_channels() => {
                return Err(Error::Config(format!(
                    "Ngroups is {c} but the data has {} channels",
                    data.n_channels()
                )))
            }
            _ => cfg.n_channels = Some(data.n_channels()),
        }
        match cfg.length {
            Some(l) if l != data.length() => {
                return Err(Error::Config(format!(
                    "nsamples is {l} but the data has length {}",
                    data.length()
                )))
            }
            _ => cfg.length = Some(data.length()),
        }
        Ok(cfg)
    }

    pub(crate) fn dims(&self) -> Result<(usize, usize)> {
        match (self.n_channels, self.length) {
            (Some(c), Some(l)) => Ok((c, l)),
            _ => Err(Error::Config(
                "Ngroups and nsamples must be set (or resolved from data)".into(),
            )),
        }
    }
}
