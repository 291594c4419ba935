//! Common-source multivariate time-series generation: one GAN per channel
//! fed from a shared noise vector, a central discriminator over whole
//! instances, and the evaluation toolkit around it.

pub mod cli;
pub mod cosci;
pub mod dataset;
pub mod downstream;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod toygen;

pub use error::{Error, Result};
