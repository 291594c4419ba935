use std::borrow::Cow;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CdType, CosciConfig};
use crate::dataset::MtsDataset;
use crate::error::{Error, Result};
use crate::nn::{
    Adam, Criterion, DiscriminatorNet, GeneratorNet, LstmDiscriminator, LstmGenerator, LstmNetSpec,
    MlpDiscSpec, MlpDiscriminator, MlpGenerator, NetParams,
};

/// Stream identifiers mixed into the master seed.
pub(crate) mod stream {
    pub const GENERATOR: u64 = 1;
    pub const DISCRIMINATOR: u64 = 2;
    pub const CENTRAL: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const DROPOUT: u64 = 6;
    pub const FRACTION: u64 = 7;
    pub const SAMPLE: u64 = 8;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent sub-seed for `(stream, index)` under a master seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ index)
}

pub(crate) fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

pub(crate) fn draw_noise(rng: &mut ChaCha8Rng, rows: usize, len: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, len), || StandardNormal.sample(rng))
}

/// Mean losses over the batches of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// One entry per channel discriminator.
    pub d_loss: Vec<f64>,
    /// One entry per channel generator.
    pub g_loss: Vec<f64>,
    /// Present only when a central discriminator is trained.
    pub cd_loss: Option<f64>,
}

/// Observer of the noise handed to generators during sampling.
pub trait NoiseProbe {
    /// `noise` feeds instances `first_instance..first_instance + noise.nrows()` of `channel`.
    fn record(&mut self, first_instance: usize, channel: usize, noise: ArrayView2<f64>);
}

pub(crate) fn build_generator(cfg: &CosciConfig, out_len: usize, seed: u64) -> Result<GeneratorNet> {
    Ok(if cfg.lstm_generators {
        GeneratorNet::Lstm(LstmGenerator::new(
            LstmNetSpec {
                input_dim: cfg.noise_len,
                hidden_dim: cfg.g_hidden,
                num_layers: 1,
                output_dim: out_len,
            },
            cfg.noise_shape,
            seed,
        )?)
    } else {
        GeneratorNet::Mlp(MlpGenerator::new(cfg.noise_len, cfg.g_hidden, out_len, seed)?)
    })
}

/// Discriminator over rows of `features * steps` channel-major values, without dropout.
pub(crate) fn build_discriminator(
    cfg: &CosciConfig,
    features: usize,
    steps: usize,
    seed: u64,
) -> Result<DiscriminatorNet> {
    Ok(if cfg.lstm_discriminators {
        DiscriminatorNet::Lstm(LstmDiscriminator::new(
            LstmNetSpec {
                input_dim: features,
                hidden_dim: cfg.d_hidden,
                num_layers: 1,
                output_dim: 1,
            },
            steps,
            seed,
        )?)
    } else {
        DiscriminatorNet::Mlp(MlpDiscriminator::new(
            MlpDiscSpec {
                input_dim: features * steps,
                lld_widths: cfg.lld_widths.clone(),
                leaky_slope: 0.1,
                dropout_p: 0.0,
            },
            seed,
        )?)
    })
}

fn build_central(cfg: &CosciConfig, c: usize, l: usize, seed: u64) -> Result<DiscriminatorNet> {
    Ok(match cfg.cd_type {
        CdType::Mlp => DiscriminatorNet::Mlp(MlpDiscriminator::new(
            MlpDiscSpec {
                input_dim: c * l,
                lld_widths: cfg.lld_widths.clone(),
                leaky_slope: 0.1,
                dropout_p: cfg.cd_dropout,
            },
            seed,
        )?),
        // channels become per-step features of one sequence of length L
        CdType::Lstm => DiscriminatorNet::Lstm(LstmDiscriminator::new(
            LstmNetSpec {
                input_dim: c,
                hidden_dim: cfg.cd_hidden,
                num_layers: 1,
                output_dim: 1,
            },
            l,
            seed,
        )?),
    })
}

fn finite(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numeric(format!("non-finite {what} loss")))
    }
}

/// One ascent step of a discriminator on reals (target 1) and fakes (target 0).
pub(crate) fn discriminator_step(
    net: &mut DiscriminatorNet,
    opt: &mut Adam,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    criterion: Criterion,
    mut dropout: Option<&mut ChaCha8Rng>,
    what: &str,
) -> Result<f64> {
    net.params_mut().zero_grad();
    let p = net.forward(real, dropout.as_deref_mut())?;
    let (l_real, g) = criterion.against(&p, 1.0)?;
    net.backward(&g, true, false)?;
    let p = net.forward(fake, dropout.as_deref_mut())?;
    let (l_fake, g) = criterion.against(&p, 0.0)?;
    net.backward(&g, true, false)?;
    let loss = finite(l_real + l_fake, what)?;
    opt.step(net.params_mut())?;
    Ok(loss)
}

/// Generator objective on discriminator outputs for fakes, and its gradient.
pub(crate) fn generator_objective(
    criterion: Criterion,
    minimax: bool,
    p: &ndarray::Array1<f64>,
) -> Result<(f64, ndarray::Array1<f64>)> {
    if minimax {
        let (l, g) = criterion.against(p, 0.0)?;
        Ok((-l, -g))
    } else {
        criterion.against(p, 1.0)
    }
}

/// Subset of `data` used for training under `real_data_fraction`.
pub(crate) fn training_subset<'a>(cfg: &CosciConfig, data: &'a MtsDataset) -> Result<Cow<'a, MtsDataset>> {
    if cfg.real_data_fraction >= 1.0 {
        return Ok(Cow::Borrowed(data));
    }
    let n = data.n_instances();
    let k = ((n as f64 * cfg.real_data_fraction).round() as usize).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(cfg.seed, stream::FRACTION, 0));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(Cow::Owned(data.select_instances(&idx)?))
}

#[derive(Default)]
pub(crate) struct BatchLoss {
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    pub cd: Option<f64>,
}

/// Runs `epochs` epochs of shuffled mini-batches (final partial batch kept).
/// Each epoch's shuffle, noise and dropout streams derive from the seed and
/// the global epoch index, so resumed training replays the same streams.
pub(crate) fn run_epochs<F>(
    seed: u64,
    n: usize,
    batch_size: usize,
    epochs: usize,
    log: &mut Vec<EpochLoss>,
    mut step: F,
) -> Result<()>
where
    F: FnMut(&[usize], &mut ChaCha8Rng, &mut ChaCha8Rng) -> Result<BatchLoss>,
{
    for _ in 0..epochs {
        let epoch = log.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(seed, stream::SHUFFLE, epoch as u64));
        let mut noise = rng_for(seed, stream::NOISE, epoch as u64);
        let mut dropout = rng_for(seed, stream::DROPOUT, epoch as u64);
        let mut sum = BatchLoss::default();
        let mut batches = 0usize;
        for (b, idx) in order.chunks(batch_size).enumerate() {
            let loss = step(idx, &mut noise, &mut dropout).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, batch {b}: {msg}")),
                other => other,
            })?;
            if batches == 0 {
                sum = loss;
            } else {
                sum.d.iter_mut().zip(&loss.d).for_each(|(a, b)| *a += b);
                sum.g.iter_mut().zip(&loss.g).for_each(|(a, b)| *a += b);
                if let (Some(a), Some(b)) = (sum.cd.as_mut(), loss.cd) {
                    *a += b;
                }
            }
            batches += 1;
        }
        let k = batches as f64;
        let entry = EpochLoss {
            epoch,
            d_loss: sum.d.iter().map(|v| v / k).collect(),
            g_loss: sum.g.iter().map(|v| v / k).collect(),
            cd_loss: sum.cd.map(|v| v / k),
        };
        log::debug!("epoch {epoch}: {entry:?}");
        log.push(entry);
    }
    Ok(())
}

/// Generator/discriminator pair for one channel, with their optimizers.
#[derive(Debug, Clone)]
pub struct ChannelGan {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub(crate) g_opt: Adam,
    pub(crate) d_opt: Adam,
}

/// C channel GANs fed from one shared noise vector, plus a central discriminator.
#[derive(Debug, Clone)]
pub struct CosciModel {
    pub(crate) config: CosciConfig,
    pub(crate) channels: Vec<ChannelGan>,
    pub(crate) central: DiscriminatorNet,
    pub(crate) cd_opt: Adam,
    pub(crate) epoch_log: Vec<EpochLoss>,
}

impl CosciModel {
    /// Freshly initialized model; `Ngroups` and `nsamples` must be set.
    pub fn new(config: CosciConfig) -> Result<Self> {
        config.validate()?;
        let (c, l) = config.dims()?;
        let seed = config.seed;
        let channels = (0..c)
            .map(|i| {
                let generator = build_generator(&config, l, derive_seed(seed, stream::GENERATOR, i as u64))?;
                let discriminator =
                    build_discriminator(&config, 1, l, derive_seed(seed, stream::DISCRIMINATOR, i as u64))?;
                Ok(ChannelGan {
                    g_opt: Adam::new(generator.params(), config.glr),
                    d_opt: Adam::new(discriminator.params(), config.dlr),
                    generator,
                    discriminator,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let central = build_central(&config, c, l, derive_seed(seed, stream::CENTRAL, 0))?;
        Ok(Self {
            cd_opt: Adam::new(central.params(), config.cdlr),
            central,
            channels,
            config,
            epoch_log: Vec::new(),
        })
    }

    /// Model sized for `data`, taking unset dimensions from it.
    pub fn for_data(config: &CosciConfig, data: &MtsDataset) -> Result<Self> {
        Self::new(config.resolve(data)?)
    }

    pub fn config(&self) -> &CosciConfig {
        &self.config
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn length(&self) -> usize {
        self.config.length.expect("resolved at construction")
    }

    pub fn channels(&self) -> &[ChannelGan] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [ChannelGan] {
        &mut self.channels
    }

    pub fn generator_params(&self, channel: usize) -> &NetParams {
        self.channels[channel].generator.params()
    }

    pub fn discriminator_params(&self, channel: usize) -> &NetParams {
        self.channels[channel].discriminator.params()
    }

    pub fn central_params(&self) -> &NetParams {
        self.central.params()
    }

    pub fn epoch_log(&self) -> &[EpochLoss] {
        &self.epoch_log
    }

    /// Trains for `config.n_epochs` further epochs.
    pub fn train(&mut self, data: &MtsDataset) -> Result<()> {
        let (c, l) = (self.n_channels(), self.length());
        if data.n_channels() != c || data.length() != l {
            return Err(Error::Config(format!(
                "model expects {c} channels of length {l}, data has {} of length {}",
                data.n_channels(),
                data.length()
            )));
        }
        let data = training_subset(&self.config, data)?;
        let Self {
            config,
            channels,
            central,
            cd_opt,
            epoch_log,
        } = self;
        let cfg = &*config;
        run_epochs(
            cfg.seed,
            data.n_instances(),
            cfg.batch_size,
            cfg.n_epochs,
            epoch_log,
            |idx, noise_rng, drop_rng| {
                batch_step(cfg, channels, central, cd_opt, &data, idx, noise_rng, drop_rng)
            },
        )
    }

    /// `n` instances, each from one noise vector shared by every channel generator.
    pub fn sample(&self, n: usize, seed: u64) -> Result<MtsDataset> {
        self.sample_probed(n, seed, None)
    }

    pub fn sample_probed(
        &self,
        n: usize,
        seed: u64,
        mut probe: Option<&mut dyn NoiseProbe>,
    ) -> Result<MtsDataset> {
        let (c, l) = (self.n_channels(), self.length());
        let mut rng = rng_for(seed, stream::SAMPLE, 0);
        let mut rows = Array2::zeros((n, c * l));
        let mut start = 0;
        while start < n {
            let b = SAMPLE_CHUNK.min(n - start);
            let z = draw_noise(&mut rng, b, self.config.noise_len);
            for (i, ch) in self.channels.iter().enumerate() {
                if let Some(p) = probe.as_deref_mut() {
                    p.record(start, i, z.view());
                }
                let out = ch.generator.predict(&z)?;
                rows.slice_mut(s![start..start + b, i * l..(i + 1) * l]).assign(&out);
            }
            start += b;
        }
        MtsDataset::from_rows(&rows, c, None)
    }
}

const SAMPLE_CHUNK: usize = 256;

#[allow(clippy::too_many_arguments)]
fn batch_step(
    cfg: &CosciConfig,
    channels: &mut [ChannelGan],
    central: &mut DiscriminatorNet,
    cd_opt: &mut Adam,
    data: &MtsDataset,
    idx: &[usize],
    noise_rng: &mut ChaCha8Rng,
    drop_rng: &mut ChaCha8Rng,
) -> Result<BatchLoss> {
    let l = data.length();
    let crit = cfg.criterion;
    let z = draw_noise(noise_rng, idx.len(), cfg.noise_len);

    // channel discriminators; fakes are kept for the generator step
    let stage: Vec<(Array2<f64>, f64)> = channels
        .par_iter_mut()
        .enumerate()
        .map(|(i, ch)| {
            let fake = ch.generator.forward(&z)?;
            let real = data.channel_batch(idx, i);
            let what = format!("discriminator {i}");
            let loss = discriminator_step(&mut ch.discriminator, &mut ch.d_opt, &real, &fake, crit, None, &what)?;
            Ok((fake, loss))
        })
        .collect::<Result<_>>()?;
    let (fakes, d_losses): (Vec<_>, Vec<_>) = stage.into_iter().unzip();

    let mut cd_loss = None;
    let mut cd_grad = None;
    if cfg.with_cd {
        let views: Vec<_> = fakes.iter().map(|f| f.view()).collect();
        let fake_cat = concatenate(Axis(1), &views).expect("equal batch sizes");
        let real_cat = data.instance_batch(idx);
        cd_loss = Some(discriminator_step(
            central,
            cd_opt,
            &real_cat,
            &fake_cat,
            crit,
            Some(&mut *drop_rng),
            "central discriminator",
        )?);
        // input gradient through the freshly updated, fixed CD; channel i only
        // ever reads its own column block
        let p = central.forward(&fake_cat, Some(drop_rng))?;
        let (loss, g) = generator_objective(crit, cfg.minimax, &p)?;
        let dx = central.backward(&g, false, true)?.expect("input gradient requested");
        cd_grad = Some((loss, dx));
    }

    let gamma = cfg.gamma;
    let g_losses: Vec<f64> = channels
        .par_iter_mut()
        .zip(fakes)
        .enumerate()
        .map(|(i, (ch, fake))| {
            ch.generator.params_mut().zero_grad();
            let p = ch.discriminator.forward(&fake, None)?;
            let (mut loss, g) = generator_objective(crit, cfg.minimax, &p)?;
            let mut dout = ch
                .discriminator
                .backward(&g, false, true)?
                .expect("input gradient requested");
            if let Some((cd_l, dx)) = &cd_grad {
                dout.scaled_add(gamma, &dx.slice(s![.., i * l..(i + 1) * l]));
                loss += gamma * cd_l;
            }
            let loss = finite(loss, &format!("generator {i}"))?;
            ch.generator.backward(&dout)?;
            ch.g_opt.step(ch.generator.params_mut())?;
            Ok(loss)
        })
        .collect::<Result<_>>()?;

    Ok(BatchLoss {
        d: d_losses,
        g: g_losses,
        cd: cd_loss,
    })
}
