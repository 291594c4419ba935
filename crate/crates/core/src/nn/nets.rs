//! The concrete networks: LSTM generator and discriminator, the LLD
//! multilayer-perceptron discriminator, and an MLP generator.
//!
//! Every network records its last forward pass internally; `backward`
//! consumes that record and fails with a state error when there is none.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, Linear, LstmTape, StackedLstm};
use super::params::NetParams;
use crate::error::{Error, Result};

/// How a noise vector is presented to a generator LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoiseShape {
    /// `noise_len` steps of one scalar each.
    #[default]
    Sequence,
    /// One step of width `noise_len`.
    SingleStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmNetSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub output_dim: usize,
}

impl LstmNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 || self.output_dim == 0
        {
            return Err(Error::Config(format!("LSTM dimensions must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDiscSpec {
    pub input_dim: usize,
    pub lld_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub dropout_p: f64,
}

impl MlpDiscSpec {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            lld_widths: vec![256, 128, 64],
            leaky_slope: 0.1,
            dropout_p: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.lld_widths.is_empty() || self.lld_widths.contains(&0) {
            return Err(Error::Config(format!("bad MLP widths: {self:?}")));
        }
        if self.lld_widths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("LLD widths must strictly decrease".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config("dropout_p must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Splits `B x (features * steps)` channel-major rows into `steps` matrices of `B x features`.
pub(crate) fn rows_to_sequence(x: &Array2<f64>, features: usize, steps: usize) -> Vec<Array2<f64>> {
    (0..steps)
        .map(|t| {
            let mut xt = Array2::zeros((x.nrows(), features));
            for (mut out, row) in xt.outer_iter_mut().zip(x.outer_iter()) {
                for c in 0..features {
                    out[c] = row[c * steps + t];
                }
            }
            xt
        })
        .collect()
}

fn sequence_to_rows(seq: &[Array2<f64>], features: usize) -> Array2<f64> {
    let steps = seq.len();
    let batch = seq[0].nrows();
    let mut out = Array2::zeros((batch, features * steps));
    for (t, xt) in seq.iter().enumerate() {
        for (mut orow, row) in out.outer_iter_mut().zip(xt.outer_iter()) {
            for c in 0..features {
                orow[c * steps + t] = row[c];
            }
        }
    }
    out
}

fn shape_check(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: width {got}, expected {want}")))
    }
}

fn no_forward(what: &str) -> Error {
    Error::State(format!("{what}: backward called without a recorded forward pass"))
}

/// Noise -> LSTM -> final hidden state -> linear -> `out_len` values.
#[derive(Debug, Clone)]
pub struct LstmGenerator {
    pub noise_len: usize,
    pub out_len: usize,
    pub noise_shape: NoiseShape,
    params: NetParams,
    lstm: StackedLstm,
    head: Linear,
    tape: Option<Vec<LstmTape>>,
}

impl LstmGenerator {
    pub fn new(spec: LstmNetSpec, noise_shape: NoiseShape, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetParams::new(seed);
        let step_dim = match noise_shape {
            NoiseShape::Sequence => 1,
            NoiseShape::SingleStep => spec.input_dim,
        };
        let lstm = StackedLstm::new(&mut params, "lstm", step_dim, spec.hidden_dim, spec.num_layers, &mut rng);
        let head = Linear::new(&mut params, "linear", spec.hidden_dim, spec.output_dim, &mut rng);
        Ok(Self {
            noise_len: spec.input_dim,
            out_len: spec.output_dim,
            noise_shape,
            params,
            lstm,
            head,
            tape: None,
        })
    }

    fn sequence(&self, noise: &Array2<f64>) -> Vec<Array2<f64>> {
        match self.noise_shape {
            NoiseShape::Sequence => rows_to_sequence(noise, 1, self.noise_len),
            NoiseShape::SingleStep => vec![noise.clone()],
        }
    }

    fn run(&self, noise: &Array2<f64>) -> Result<(Array2<f64>, Vec<LstmTape>)> {
        shape_check("generator noise", noise.ncols(), self.noise_len)?;
        let tapes = self.lstm.forward(&self.params, self.sequence(noise));
        let out = self
            .head
            .forward(&self.params, tapes.last().expect("one layer").last_hidden().view());
        Ok((out, tapes))
    }

    pub fn forward(&mut self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        let (out, tapes) = self.run(noise)?;
        self.tape = Some(tapes);
        Ok(out)
    }

    /// Forward pass that records nothing.
    pub fn predict(&self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.run(noise)?.0)
    }

    /// Accumulates parameter gradients for upstream `dout` (`B x out_len`).
    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<()> {
        let tapes = self.tape.take().ok_or_else(|| no_forward("generator"))?;
        let h_last = tapes.last().expect("one layer").last_hidden();
        let dh = self
            .head
            .backward(&mut self.params, h_last.view(), dout.view(), true, true)
            .expect("input grad requested");
        self.lstm.backward(&mut self.params, &tapes, &dh, true, false);
        Ok(())
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        &mut self.params
    }
}

/// Sequence -> LSTM -> final hidden -> linear -> sigmoid.
///
/// Input rows hold `features * steps` channel-major values; step `t` sees
/// feature `c` at column `c * steps + t`.
#[derive(Debug, Clone)]
pub struct LstmDiscriminator {
    pub features: usize,
    pub steps: usize,
    params: NetParams,
    lstm: StackedLstm,
    head: Linear,
    tape: Option<(Vec<LstmTape>, Array1<f64>)>,
}

impl LstmDiscriminator {
    /// `spec.input_dim` is the per-step feature count.
    pub fn new(spec: LstmNetSpec, steps: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if steps == 0 {
            return Err(Error::Config("sequence length must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetParams::new(seed);
        let lstm = StackedLstm::new(&mut params, "lstm", spec.input_dim, spec.hidden_dim, spec.num_layers, &mut rng);
        let head = Linear::new(&mut params, "linear", spec.hidden_dim, 1, &mut rng);
        Ok(Self {
            features: spec.input_dim,
            steps,
            params,
            lstm,
            head,
            tape: None,
        })
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array1<f64>> {
        shape_check("discriminator input", x.ncols(), self.features * self.steps)?;
        let tapes = self
            .lstm
            .forward(&self.params, rows_to_sequence(x, self.features, self.steps));
        let logits = self
            .head
            .forward(&self.params, tapes.last().expect("one layer").last_hidden().view());
        let probs = logits.column(0).mapv(sigmoid);
        self.tape = Some((tapes, probs.clone()));
        Ok(probs)
    }

    /// `dprob` is dL/d(probability) per row.
    pub fn backward(
        &mut self,
        dprob: &Array1<f64>,
        param_grads: bool,
        input_grad: bool,
    ) -> Result<Option<Array2<f64>>> {
        let (tapes, probs) = self.tape.take().ok_or_else(|| no_forward("LSTM discriminator"))?;
        let dlogit = (dprob * &probs.mapv(|p| p * (1.0 - p))).insert_axis(Axis(1));
        let h_last = tapes.last().expect("one layer").last_hidden();
        let dh = self
            .head
            .backward(&mut self.params, h_last.view(), dlogit.view(), param_grads, true)
            .expect("input grad requested");
        let dxs = self
            .lstm
            .backward(&mut self.params, &tapes, &dh, param_grads, input_grad);
        Ok(dxs.map(|d| sequence_to_rows(&d, self.features)))
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        &mut self.params
    }
}

#[derive(Debug, Clone)]
struct MlpTape {
    /// Input to each linear layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    /// Scaled dropout masks (absent in eval mode).
    masks: Vec<Option<Array2<f64>>>,
    probs: Array1<f64>,
}

/// Stacked Linear -> LeakyReLU -> Dropout blocks, then linear -> 1 -> sigmoid.
#[derive(Debug, Clone)]
pub struct MlpDiscriminator {
    pub spec: MlpDiscSpec,
    params: NetParams,
    layers: Vec<Linear>,
    tape: Option<MlpTape>,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

impl MlpDiscriminator {
    pub fn new(spec: MlpDiscSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetParams::new(seed);
        let mut dims = vec![spec.input_dim];
        dims.extend(&spec.lld_widths);
        dims.push(1);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::new(&mut params, &format!("fc{k}"), w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            spec,
            params,
            layers,
            tape: None,
        })
    }

    /// Dropout is active only when `dropout` supplies an RNG (training mode);
    /// inverted scaling keeps evaluation mode free of rescaling.
    pub fn forward(&mut self, x: &Array2<f64>, mut dropout: Option<&mut ChaCha8Rng>) -> Result<Array1<f64>> {
        shape_check("MLP discriminator input", x.ncols(), self.spec.input_dim)?;
        let slope = self.spec.leaky_slope;
        let p = self.spec.dropout_p;
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut a = x.clone();
        for layer in &self.layers[..n_hidden] {
            let z = layer.forward(&self.params, a.view());
            let mut act = z.mapv(|v| leaky(v, slope));
            let mask = match dropout.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_simple_fn(z.raw_dim(), || {
                        if rng.gen::<f64>() < p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    act *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(std::mem::replace(&mut a, act));
            pre.push(z);
            masks.push(mask);
        }
        let logits = self.layers[n_hidden].forward(&self.params, a.view());
        inputs.push(a);
        let probs = logits.column(0).mapv(sigmoid);
        self.tape = Some(MlpTape {
            inputs,
            pre,
            masks,
            probs: probs.clone(),
        });
        Ok(probs)
    }

    pub fn backward(
        &mut self,
        dprob: &Array1<f64>,
        param_grads: bool,
        input_grad: bool,
    ) -> Result<Option<Array2<f64>>> {
        let tape = self.tape.take().ok_or_else(|| no_forward("MLP discriminator"))?;
        let slope = self.spec.leaky_slope;
        let mut d = (dprob * &tape.probs.mapv(|p| p * (1.0 - p))).insert_axis(Axis(1));
        for k in (0..self.layers.len()).rev() {
            let need = input_grad || k > 0;
            let dx = self.layers[k].backward(&mut self.params, tape.inputs[k].view(), d.view(), param_grads, need);
            match dx {
                Some(mut dx) if k > 0 => {
                    if let Some(m) = &tape.masks[k - 1] {
                        dx *= m;
                    }
                    dx.zip_mut_with(&tape.pre[k - 1], |g, &z| *g *= leaky_grad(z, slope));
                    d = dx;
                }
                other => return Ok(other),
            }
        }
        unreachable!("loop returns at the first layer")
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        &mut self.params
    }
}

/// Noise -> (Linear -> LeakyReLU) x 2 -> linear -> `out_len` values.
#[derive(Debug, Clone)]
pub struct MlpGenerator {
    pub noise_len: usize,
    pub out_len: usize,
    slope: f64,
    params: NetParams,
    layers: Vec<Linear>,
    tape: Option<(Vec<Array2<f64>>, Vec<Array2<f64>>)>,
}

impl MlpGenerator {
    pub fn new(noise_len: usize, hidden: usize, out_len: usize, seed: u64) -> Result<Self> {
        if noise_len == 0 || hidden == 0 || out_len == 0 {
            return Err(Error::Config("MLP generator dimensions must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetParams::new(seed);
        let dims = [noise_len, hidden, hidden, out_len];
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::new(&mut params, &format!("fc{k}"), w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            noise_len,
            out_len,
            slope: 0.1,
            params,
            layers,
            tape: None,
        })
    }

    pub fn forward(&mut self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        let (out, tape) = self.run(noise)?;
        self.tape = Some(tape);
        Ok(out)
    }

    /// Forward pass that records nothing.
    pub fn predict(&self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.run(noise)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn run(&self, noise: &Array2<f64>) -> Result<(Array2<f64>, (Vec<Array2<f64>>, Vec<Array2<f64>>))> {
        shape_check("generator noise", noise.ncols(), self.noise_len)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut a = noise.clone();
        for layer in &self.layers[..last] {
            let z = layer.forward(&self.params, a.view());
            let act = z.mapv(|v| leaky(v, self.slope));
            inputs.push(std::mem::replace(&mut a, act));
            pre.push(z);
        }
        let out = self.layers[last].forward(&self.params, a.view());
        inputs.push(a);
        Ok((out, (inputs, pre)))
    }

    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<()> {
        let (inputs, pre) = self.tape.take().ok_or_else(|| no_forward("MLP generator"))?;
        let mut d = dout.clone();
        for k in (0..self.layers.len()).rev() {
            let dx = self.layers[k].backward(&mut self.params, inputs[k].view(), d.view(), true, k > 0);
            if let Some(mut dx) = dx {
                dx.zip_mut_with(&pre[k - 1], |g, &z| *g *= leaky_grad(z, self.slope));
                d = dx;
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        &mut self.params
    }
}

/// Generator architecture chosen by configuration.
#[derive(Debug, Clone)]
pub enum GeneratorNet {
    Lstm(LstmGenerator),
    Mlp(MlpGenerator),
}

impl GeneratorNet {
    pub fn forward(&mut self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Self::Lstm(g) => g.forward(noise),
            Self::Mlp(g) => g.forward(noise),
        }
    }

    pub fn predict(&self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Self::Lstm(g) => g.predict(noise),
            Self::Mlp(g) => g.predict(noise),
        }
    }

    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<()> {
        match self {
            Self::Lstm(g) => g.backward(dout),
            Self::Mlp(g) => g.backward(dout),
        }
    }

    pub fn params(&self) -> &NetParams {
        match self {
            Self::Lstm(g) => g.params(),
            Self::Mlp(g) => g.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        match self {
            Self::Lstm(g) => g.params_mut(),
            Self::Mlp(g) => g.params_mut(),
        }
    }
}

/// Discriminator architecture chosen by configuration.
#[derive(Debug, Clone)]
pub enum DiscriminatorNet {
    Lstm(LstmDiscriminator),
    Mlp(MlpDiscriminator),
}

impl DiscriminatorNet {
    /// `dropout` switches MLP discriminators into training mode; LSTMs ignore it.
    pub fn forward(&mut self, x: &Array2<f64>, dropout: Option<&mut ChaCha8Rng>) -> Result<Array1<f64>> {
        match self {
            Self::Lstm(d) => d.forward(x),
            Self::Mlp(d) => d.forward(x, dropout),
        }
    }

    pub fn backward(
        &mut self,
        dprob: &Array1<f64>,
        param_grads: bool,
        input_grad: bool,
    ) -> Result<Option<Array2<f64>>> {
        match self {
            Self::Lstm(d) => d.backward(dprob, param_grads, input_grad),
            Self::Mlp(d) => d.backward(dprob, param_grads, input_grad),
        }
    }

    pub fn params(&self) -> &NetParams {
        match self {
            Self::Lstm(d) => d.params(),
            Self::Mlp(d) => d.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut NetParams {
        match self {
            Self::Lstm(d) => d.params_mut(),
            Self::Mlp(d) => d.params_mut(),
        }
    }
}
