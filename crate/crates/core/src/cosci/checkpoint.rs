//! JSON checkpoints: format tag, version, configuration, every network's
//! named arrays with its optimizer state, and the epoch log.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::JointModel;
use super::config::CosciConfig;
use super::model::{CosciModel, EpochLoss};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamState, ArrayRecord, NetParams};

pub const CHECKPOINT_FORMAT: &str = "cosci-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Cosci,
    Joint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetRecord {
    role: String,
    arrays: Vec<ArrayRecord>,
    optimizer: AdamState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    kind: ModelKind,
    config: CosciConfig,
    nets: Vec<NetRecord>,
    epoch_log: Vec<EpochLoss>,
}

fn record(role: String, params: &NetParams, opt: &Adam) -> NetRecord {
    NetRecord {
        role,
        arrays: params.to_records(),
        optimizer: opt.state(params),
    }
}

fn restore(rec: &NetRecord, role: &str, params: &mut NetParams, opt: &mut Adam) -> Result<()> {
    if rec.role != role {
        return Err(Error::Corrupt(format!("expected network {role}, found {}", rec.role)));
    }
    params.load_records(&rec.arrays)?;
    opt.restore(&rec.optimizer)
}

fn write(path: &Path, ck: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string(ck).map_err(|e| Error::Corrupt(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path, kind: ModelKind) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(Error::Corrupt(format!("{} is not a model checkpoint", path.display())));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Corrupt("missing version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let ck: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;
    if ck.kind != kind {
        return Err(Error::Corrupt(format!("checkpoint holds a {:?} model", ck.kind)));
    }
    ck.config.validate()?;
    Ok(ck)
}

fn net_count(ck: &Checkpoint, want: usize) -> Result<()> {
    if ck.nets.len() == want {
        Ok(())
    } else {
        Err(Error::Corrupt(format!("expected {want} networks, found {}", ck.nets.len())))
    }
}

impl CosciModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut nets = Vec::with_capacity(2 * self.channels.len() + 1);
        for (i, ch) in self.channels.iter().enumerate() {
            nets.push(record(format!("generator.{i}"), ch.generator.params(), &ch.g_opt));
            nets.push(record(format!("discriminator.{i}"), ch.discriminator.params(), &ch.d_opt));
        }
        nets.push(record("central".into(), self.central.params(), &self.cd_opt));
        write(
            path.as_ref(),
            &Checkpoint {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                kind: ModelKind::Cosci,
                config: self.config.clone(),
                nets,
                epoch_log: self.epoch_log.clone(),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = read(path.as_ref(), ModelKind::Cosci)?;
        let mut model = Self::new(ck.config.clone())?;
        net_count(&ck, 2 * model.channels.len() + 1)?;
        for (i, ch) in model.channels.iter_mut().enumerate() {
            restore(&ck.nets[2 * i], &format!("generator.{i}"), ch.generator.params_mut(), &mut ch.g_opt)?;
            restore(
                &ck.nets[2 * i + 1],
                &format!("discriminator.{i}"),
                ch.discriminator.params_mut(),
                &mut ch.d_opt,
            )?;
        }
        let last = ck.nets.last().expect("count checked");
        restore(last, "central", model.central.params_mut(), &mut model.cd_opt)?;
        model.epoch_log = ck.epoch_log;
        Ok(model)
    }
}

impl JointModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write(
            path.as_ref(),
            &Checkpoint {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                kind: ModelKind::Joint,
                config: self.config.clone(),
                nets: vec![
                    record("generator".into(), self.generator.params(), &self.g_opt),
                    record("discriminator".into(), self.discriminator.params(), &self.d_opt),
                ],
                epoch_log: self.epoch_log.clone(),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = read(path.as_ref(), ModelKind::Joint)?;
        let mut model = Self::new(ck.config.clone())?;
        net_count(&ck, 2)?;
        restore(&ck.nets[0], "generator", model.generator.params_mut(), &mut model.g_opt)?;
        restore(&ck.nets[1], "discriminator", model.discriminator.params_mut(), &mut model.d_opt)?;
        model.epoch_log = ck.epoch_log;
        Ok(model)
    }
}

/// A loaded checkpoint of either model family.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Cosci(CosciModel),
    Joint(JointModel),
}

impl AnyModel {
    /// Dispatches on the checkpoint's `kind` field; anything other than a
    /// joint checkpoint goes through the per-channel loader and its checks.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let joint = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(|k| k == "joint"))
            .unwrap_or(false);
        if joint {
            JointModel::load(path).map(Self::Joint)
        } else {
            CosciModel::load(path).map(Self::Cosci)
        }
    }

    pub fn config(&self) -> &CosciConfig {
        match self {
            Self::Cosci(m) => m.config(),
            Self::Joint(m) => m.config(),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<crate::dataset::MtsDataset> {
        match self {
            Self::Cosci(m) => m.sample(n, seed),
            Self::Joint(m) => m.sample(n, seed),
        }
    }
}
