//! The multi-channel GAN: per-channel generator/discriminator pairs driven
//! by one shared noise vector, a central discriminator over whole
//! instances, the joint single-GAN baseline, sampling and checkpoints.
//!
//! Per batch: every channel discriminator takes one step, then the central
//! discriminator, then every generator against its own discriminator loss
//! plus `gamma` times the central loss. Channel steps run in parallel.

mod baseline;
mod checkpoint;
mod config;
mod model;

pub use baseline::JointModel;
pub use checkpoint::{AnyModel, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{CdType, CosciConfig};
pub use model::{derive_seed, ChannelGan, CosciModel, EpochLoss, NoiseProbe};
