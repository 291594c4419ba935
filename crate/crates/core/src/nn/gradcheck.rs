//! Backpropagation vs. central finite differences for every parameter.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::loss::bce_loss;
use super::nets::{
    LstmDiscriminator, LstmGenerator, LstmNetSpec, MlpDiscSpec, MlpDiscriminator, MlpGenerator,
    NoiseShape,
};
use super::params::NetParams;
use super::{bce_grad, Linear};
use crate::error::Result;

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR)` as denominator.
/// Central differences of an O(1) loss carry about `1e-16 / FD_STEP = 1e-11`
/// of roundoff, so smaller gradients are compared at this absolute scale.
pub const REL_FLOOR: f64 = 1e-4;

/// Network family to check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GradCheckNet {
    Linear { inputs: usize, outputs: usize },
    LstmGenerator { noise_len: usize, hidden: usize, out_len: usize, layers: usize },
    LstmDiscriminator { features: usize, steps: usize, hidden: usize, layers: usize },
    /// Dropout is disabled (evaluation mode) during the check.
    MlpDiscriminator { input_dim: usize, widths: Vec<usize> },
    MlpGenerator { noise_len: usize, hidden: usize, out_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub passed: bool,
}

/// A network under test exposed as `params -> scalar loss` plus its backprop gradient.
trait Probe {
    fn params_mut(&mut self) -> &mut NetParams;
    fn loss(&mut self) -> f64;
    /// Zeroes, then fills the gradient buffers.
    fn backprop(&mut self) -> Vec<f64>;
}

struct LinearProbe {
    params: NetParams,
    layer: Linear,
    x: Array2<f64>,
    w: Array2<f64>,
}

impl Probe for LinearProbe {
    fn params_mut(&mut self) -> &mut NetParams {
        &mut self.params
    }
    fn loss(&mut self) -> f64 {
        (self.layer.forward(&self.params, self.x.view()) * &self.w).sum()
    }
    fn backprop(&mut self) -> Vec<f64> {
        self.params.zero_grad();
        self.layer
            .backward(&mut self.params, self.x.view(), self.w.view(), true, false);
        self.params.flat_grads()
    }
}

struct GenProbe<G> {
    net: G,
    noise: Array2<f64>,
    w: Array2<f64>,
}

macro_rules! gen_probe {
    ($t:ty) => {
        impl Probe for GenProbe<$t> {
            fn params_mut(&mut self) -> &mut NetParams {
                self.net.params_mut()
            }
            fn loss(&mut self) -> f64 {
                (self.net.forward(&self.noise).expect("shape") * &self.w).sum()
            }
            fn backprop(&mut self) -> Vec<f64> {
                self.net.params_mut().zero_grad();
                self.net.forward(&self.noise).expect("shape");
                self.net.backward(&self.w).expect("forward recorded");
                self.net.params().flat_grads()
            }
        }
    };
}
gen_probe!(LstmGenerator);
gen_probe!(MlpGenerator);

struct DiscProbe<D> {
    net: D,
    x: Array2<f64>,
    target: Array1<f64>,
}

impl Probe for DiscProbe<LstmDiscriminator> {
    fn params_mut(&mut self) -> &mut NetParams {
        self.net.params_mut()
    }
    fn loss(&mut self) -> f64 {
        let p = self.net.forward(&self.x).expect("shape");
        bce_loss(&p, &self.target).expect("lengths")
    }
    fn backprop(&mut self) -> Vec<f64> {
        self.net.params_mut().zero_grad();
        let p = self.net.forward(&self.x).expect("shape");
        let g = bce_grad(&p, &self.target).expect("lengths");
        self.net.backward(&g, true, false).expect("forward recorded");
        self.net.params().flat_grads()
    }
}

impl Probe for DiscProbe<MlpDiscriminator> {
    fn params_mut(&mut self) -> &mut NetParams {
        self.net.params_mut()
    }
    fn loss(&mut self) -> f64 {
        let p = self.net.forward(&self.x, None).expect("shape");
        bce_loss(&p, &self.target).expect("lengths")
    }
    fn backprop(&mut self) -> Vec<f64> {
        self.net.params_mut().zero_grad();
        let p = self.net.forward(&self.x, None).expect("shape");
        let g = bce_grad(&p, &self.target).expect("lengths");
        self.net.backward(&g, true, false).expect("forward recorded");
        self.net.params().flat_grads()
    }
}

fn run(probe: &mut dyn Probe, tolerance: f64) -> GradCheckReport {
    let analytic = probe.backprop();
    let mut worst = (0.0f64, 0usize);
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().scalar_mut(k);
        *probe.params_mut().scalar_mut(k) = orig + FD_STEP;
        let up = probe.loss();
        *probe.params_mut().scalar_mut(k) = orig - FD_STEP;
        let down = probe.loss();
        *probe.params_mut().scalar_mut(k) = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > worst.0 {
            worst = (rel, k);
        }
    }
    let (name, r, c) = probe.params_mut().locate(worst.1);
    GradCheckReport {
        n_params: analytic.len(),
        max_rel_error: worst.0,
        worst_param: format!("{name}[{r},{c}]"),
        passed: worst.0 < tolerance,
    }
}

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let u = Uniform::new_inclusive(-1.0, 1.0);
    Array2::from_shape_simple_fn((rows, cols), || u.sample(rng))
}

/// Randomises parameters and inputs from `seed`, then compares backprop
/// against central differences for every scalar parameter.
pub fn grad_check(net: &GradCheckNet, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = 3;
    let targets = |rng: &mut ChaCha8Rng| -> Array1<f64> {
        (0..batch)
            .map(|_| if Uniform::new(0.0, 1.0).sample(rng) < 0.5 { 0.0 } else { 1.0 })
            .collect()
    };
    let report = match net {
        GradCheckNet::Linear { inputs, outputs } => {
            let mut params = NetParams::new(seed);
            let layer = Linear::new(&mut params, "linear", *inputs, *outputs, &mut rng);
            let mut probe = LinearProbe {
                params,
                layer,
                x: uniform(batch, *inputs, &mut rng),
                w: uniform(batch, *outputs, &mut rng),
            };
            run(&mut probe, tolerance)
        }
        GradCheckNet::LstmGenerator { noise_len, hidden, out_len, layers } => {
            let spec = LstmNetSpec {
                input_dim: *noise_len,
                hidden_dim: *hidden,
                num_layers: *layers,
                output_dim: *out_len,
            };
            let mut probe = GenProbe {
                net: LstmGenerator::new(spec, NoiseShape::Sequence, seed)?,
                noise: uniform(batch, *noise_len, &mut rng),
                w: uniform(batch, *out_len, &mut rng),
            };
            run(&mut probe, tolerance)
        }
        GradCheckNet::LstmDiscriminator { features, steps, hidden, layers } => {
            let spec = LstmNetSpec {
                input_dim: *features,
                hidden_dim: *hidden,
                num_layers: *layers,
                output_dim: 1,
            };
            let mut probe = DiscProbe {
                net: LstmDiscriminator::new(spec, *steps, seed)?,
                x: uniform(batch, features * steps, &mut rng),
                target: targets(&mut rng),
            };
            run(&mut probe, tolerance)
        }
        GradCheckNet::MlpDiscriminator { input_dim, widths } => {
            let spec = MlpDiscSpec {
                lld_widths: widths.clone(),
                ..MlpDiscSpec::new(*input_dim)
            };
            let mut probe = DiscProbe {
                net: MlpDiscriminator::new(spec, seed)?,
                x: uniform(batch, *input_dim, &mut rng),
                target: targets(&mut rng),
            };
            run(&mut probe, tolerance)
        }
        GradCheckNet::MlpGenerator { noise_len, hidden, out_len } => {
            let mut probe = GenProbe {
                net: MlpGenerator::new(*noise_len, *hidden, *out_len, seed)?,
                noise: uniform(batch, *noise_len, &mut rng),
                w: uniform(batch, *out_len, &mut rng),
            };
            run(&mut probe, tolerance)
        }
    };
    Ok(report)
}
