//! Minimal differentiable kernel: linear and LSTM layers, the network
//! families used by the GANs and the classifier, BCE/MSE losses, Adam, and
//! a finite-difference gradient checker.

mod adam;
pub mod gradcheck;
mod layers;
mod loss;
mod nets;
mod params;

pub use adam::{Adam, AdamState};
pub use gradcheck::{grad_check, GradCheckNet, GradCheckReport};
pub use layers::{Linear, Lstm, LstmTape, StackedLstm};
pub use loss::{bce_grad, bce_loss, minimax_generator_loss, Criterion, BCE_CLAMP};
pub use nets::{
    DiscriminatorNet, GeneratorNet, LstmDiscriminator, LstmGenerator, LstmNetSpec, MlpDiscSpec,
    MlpDiscriminator, MlpGenerator, NoiseShape,
};
pub use params::{ArrayRecord, NetParams, Param};
