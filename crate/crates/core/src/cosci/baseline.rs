use ndarray::Array2;

use super::config::CosciConfig;
use super::model::{
    build_discriminator, build_generator, derive_seed, discriminator_step, draw_noise,
    generator_objective, rng_for, run_epochs, stream, training_subset, BatchLoss, EpochLoss,
};
use crate::dataset::MtsDataset;
use crate::error::{Error, Result};
use crate::nn::{Adam, DiscriminatorNet, GeneratorNet, NetParams};

/// Single GAN over whole instances: the generator emits all `C*L` values at
/// once and the discriminator reads the instance as one scalar sequence of
/// length `C*L`. There is no central discriminator.
///
/// Seeds and random streams coincide with channel 0 of a [`super::CosciModel`],
/// so with one channel the two models train identically.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub(crate) config: CosciConfig,
    pub(crate) generator: GeneratorNet,
    pub(crate) discriminator: DiscriminatorNet,
    pub(crate) g_opt: Adam,
    pub(crate) d_opt: Adam,
    pub(crate) epoch_log: Vec<EpochLoss>,
}

impl JointModel {
    pub fn new(config: CosciConfig) -> Result<Self> {
        config.validate()?;
        let (c, l) = config.dims()?;
        let seed = config.seed;
        let generator = build_generator(&config, c * l, derive_seed(seed, stream::GENERATOR, 0))?;
        let discriminator =
            build_discriminator(&config, 1, c * l, derive_seed(seed, stream::DISCRIMINATOR, 0))?;
        Ok(Self {
            g_opt: Adam::new(generator.params(), config.glr),
            d_opt: Adam::new(discriminator.params(), config.dlr),
            generator,
            discriminator,
            config,
            epoch_log: Vec::new(),
        })
    }

    pub fn for_data(config: &CosciConfig, data: &MtsDataset) -> Result<Self> {
        Self::new(config.resolve(data)?)
    }

    pub fn config(&self) -> &CosciConfig {
        &self.config
    }

    pub fn generator_params(&self) -> &NetParams {
        self.generator.params()
    }

    pub fn discriminator_params(&self) -> &NetParams {
        self.discriminator.params()
    }

    pub fn epoch_log(&self) -> &[EpochLoss] {
        &self.epoch_log
    }

    pub fn train(&mut self, data: &MtsDataset) -> Result<()> {
        let (c, l) = self.config.dims()?;
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
            generator,
            discriminator,
            g_opt,
            d_opt,
            epoch_log,
        } = self;
        let cfg = &*config;
        run_epochs(
            cfg.seed,
            data.n_instances(),
            cfg.batch_size,
            cfg.n_epochs,
            epoch_log,
            |idx, noise_rng, _| {
                let z = draw_noise(noise_rng, idx.len(), cfg.noise_len);
                let fake = generator.forward(&z)?;
                let real = data.instance_batch(idx);
                let d = discriminator_step(discriminator, d_opt, &real, &fake, cfg.criterion, None, "discriminator")?;
                generator.params_mut().zero_grad();
                let p = discriminator.forward(&fake, None)?;
                let (g, grad) = generator_objective(cfg.criterion, cfg.minimax, &p)?;
                if !g.is_finite() {
                    return Err(Error::Numeric("non-finite generator loss".into()));
                }
                let dout = discriminator
                    .backward(&grad, false, true)?
                    .expect("input gradient requested");
                generator.backward(&dout)?;
                g_opt.step(generator.params_mut())?;
                Ok(BatchLoss {
                    d: vec![d],
                    g: vec![g],
                    cd: None,
                })
            },
        )
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<MtsDataset> {
        let (c, l) = self.config.dims()?;
        let mut rng = rng_for(seed, stream::SAMPLE, 0);
        let mut rows = Array2::zeros((n, c * l));
        let mut start = 0;
        while start < n {
            let b = 256.min(n - start);
            let z = draw_noise(&mut rng, b, self.config.noise_len);
            rows.slice_mut(ndarray::s![start..start + b, ..])
                .assign(&self.generator.predict(&z)?);
            start += b;
        }
        MtsDataset::from_rows(&rows, c, None)
    }
}
