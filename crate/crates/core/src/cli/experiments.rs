//! Seeded pipelines behind the repro and bench commands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cosci::{CosciConfig, CosciModel};
use crate::dataset::MtsDataset;
use crate::downstream::{
    run_all_synthetic, run_augmentation, run_trts_tstr, BlinkTask, ClassifierSpec, Method,
    MethodSynthesizer, UtilityConfig, UtilityReport,
};
use crate::error::{Error, Result};
use crate::metrics::{
    aed, amplitudes, awd, feature_corr_matrix, feature_corr_matrix_with, matrix_similarity,
    FeatureCorrMatrix, MatrixSimilarity,
};
use crate::toygen::{generate_toy, ToySpec, ToyVariant};

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn seed_list(base: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|k| base + k).collect()
}

/// With/without central discriminator on the toy variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyExperiment {
    pub toy: ToySpec,
    pub gan: CosciConfig,
    pub variants: Vec<ToyVariant>,
    pub repeats: usize,
    /// Synthetic instances per run; `None` matches the real instance count.
    pub n_samples: Option<usize>,
}

impl Default for ToyExperiment {
    fn default() -> Self {
        Self {
            toy: ToySpec::default(),
            gan: CosciConfig::default(),
            variants: ToyVariant::ALL.to_vec(),
            repeats: 5,
            n_samples: None,
        }
    }
}

impl ToyExperiment {
    /// N = 256 instances of length 200 with the desk network preset.
    pub fn desk() -> Self {
        Self {
            toy: ToySpec {
                n_per_type: 128,
                length: 200,
                ..ToySpec::default()
            },
            gan: CosciConfig::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.toy.validate()?;
        self.gan.validate()?;
        if self.repeats == 0 || self.variants.is_empty() {
            return Err(Error::Config("repeats and variants must be non-empty".into()));
        }
        if self.n_samples == Some(0) {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyRun {
    pub seed: u64,
    pub with_cd: bool,
    pub awd: f64,
    pub aed: f64,
    pub similarity: MatrixSimilarity,
    #[serde(skip)]
    pub matrix: FeatureCorrMatrix,
    /// Per-instance `(channel 0, channel 1)` amplitudes of the synthetic set.
    #[serde(skip)]
    pub amplitudes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyVariantResult {
    pub variant: ToyVariant,
    pub real_aed: f64,
    #[serde(skip)]
    pub real_matrix: FeatureCorrMatrix,
    #[serde(skip)]
    pub real_amplitudes: Vec<(f64, f64)>,
    pub runs: Vec<ToyRun>,
}

impl ToyVariantResult {
    pub fn runs_with(&self, with_cd: bool) -> impl Iterator<Item = &ToyRun> {
        self.runs.iter().filter(move |r| r.with_cd == with_cd)
    }

    /// `(without, with)` runs for each seed.
    pub fn pairs(&self) -> Vec<(&ToyRun, &ToyRun)> {
        self.runs_with(false)
            .map(|a| {
                let b = self
                    .runs_with(true)
                    .find(|b| b.seed == a.seed)
                    .expect("both arms run per seed");
                (a, b)
            })
            .collect()
    }

    pub fn median_of(&self, with_cd: bool, f: impl Fn(&ToyRun) -> f64) -> f64 {
        median(&self.runs_with(with_cd).map(f).collect::<Vec<_>>())
    }
}

fn amplitude_pairs(data: &MtsDataset) -> Vec<(f64, f64)> {
    let a = amplitudes(data);
    a[0].iter().copied().zip(a[1].iter().copied()).collect()
}

fn toy_run(real: &MtsDataset, reference: &FeatureCorrMatrix, exp: &ToyExperiment, seed: u64, with_cd: bool) -> Result<ToyRun> {
    let cfg = CosciConfig {
        with_cd,
        seed,
        ..exp.gan.clone()
    };
    let mut model = CosciModel::for_data(&cfg, real)?;
    model.train(real)?;
    let synth = model.sample(exp.n_samples.unwrap_or(real.n_instances()), seed)?;
    let matrix = feature_corr_matrix_with(&synth, 0, 1, &reference.kept)?;
    Ok(ToyRun {
        seed,
        with_cd,
        awd: awd(real, &synth)?,
        aed: aed(&synth)?,
        similarity: matrix_similarity(reference, &matrix)?,
        matrix,
        amplitudes: amplitude_pairs(&synth),
    })
}

/// Trains both arms for every variant and seed `base_seed..base_seed + repeats`.
pub fn run_toy_experiment(exp: &ToyExperiment, base_seed: u64) -> Result<Vec<ToyVariantResult>> {
    exp.validate()?;
    let seeds = seed_list(base_seed, exp.repeats);
    exp.variants
        .iter()
        .map(|&variant| {
            let (real, _) = generate_toy(&ToySpec {
                variant,
                ..exp.toy.clone()
            })?;
            let reference = feature_corr_matrix(&real, 0, 1)?;
            let cells: Vec<(u64, bool)> = seeds.iter().flat_map(|&s| [(s, false), (s, true)]).collect();
            let runs = cells
                .par_iter()
                .map(|&(seed, with_cd)| toy_run(&real, &reference, exp, seed, with_cd))
                .collect::<Result<Vec<_>>>()?;
            Ok(ToyVariantResult {
                variant,
                real_aed: aed(&real)?,
                real_amplitudes: amplitude_pairs(&real),
                real_matrix: reference,
                runs,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub variant: ToyVariant,
    pub with_cd: bool,
    pub awd: f64,
    pub aed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub variant: ToyVariant,
    pub with_cd: bool,
    pub mae: f64,
    pub frobenius: f64,
    pub spearman: f64,
    pub kendall: f64,
}

/// Medians over seeds of AWD and AED per variant and arm.
pub fn table1(results: &[ToyVariantResult]) -> Vec<Table1Row> {
    results
        .iter()
        .flat_map(|r| {
            [true, false].map(|with_cd| Table1Row {
                variant: r.variant,
                with_cd,
                awd: r.median_of(with_cd, |x| x.awd),
                aed: r.median_of(with_cd, |x| x.aed),
            })
        })
        .collect()
}

/// Medians over seeds of the four matrix-similarity scores.
pub fn table2(results: &[ToyVariantResult]) -> Vec<Table2Row> {
    results
        .iter()
        .flat_map(|r| {
            [true, false].map(|with_cd| Table2Row {
                variant: r.variant,
                with_cd,
                mae: r.median_of(with_cd, |x| x.similarity.mae),
                frobenius: r.median_of(with_cd, |x| x.similarity.frobenius),
                spearman: r.median_of(with_cd, |x| x.similarity.spearman),
                kendall: r.median_of(with_cd, |x| x.similarity.kendall),
            })
        })
        .collect()
}

/// Utility experiments on the labeled blink frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlinkExperiment {
    pub task: BlinkTask,
    pub gan: CosciConfig,
    pub classifier: ClassifierSpec,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub channel_counts: Vec<usize>,
    /// `(real, synthetic)` mixes for the augmentation experiment; empty skips it.
    pub ratios: Vec<(usize, usize)>,
}

impl Default for BlinkExperiment {
    fn default() -> Self {
        Self {
            task: BlinkTask::default(),
            gan: CosciConfig::default(),
            classifier: ClassifierSpec::default(),
            repeats: 30,
            methods: Method::GENERATIVE.to_vec(),
            channel_counts: vec![2, 3, 4, 5],
            ratios: [1, 2, 4, 6, 8, 10].iter().map(|&k| (1, k)).collect(),
        }
    }
}

impl BlinkExperiment {
    pub fn desk() -> Self {
        Self {
            gan: CosciConfig::desk(),
            classifier: ClassifierSpec::desk(),
            repeats: 5,
            ratios: vec![(1, 1), (1, 4)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gan.validate()?;
        self.classifier.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        Ok(())
    }

    pub fn utility(&self, base_seed: u64) -> UtilityConfig {
        UtilityConfig {
            classifier: self.classifier.clone(),
            seeds: seed_list(base_seed, self.repeats),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    /// TRTF then TFTR for each of with CD and without CD.
    pub reports: Vec<UtilityReport>,
}

impl Table3 {
    pub fn get(&self, protocol: crate::downstream::Protocol, method: Method) -> Option<&UtilityReport> {
        self.reports.iter().find(|r| r.protocol == protocol && r.method == method)
    }
}

/// TRTF and TFTR for COSCI-GAN with and without the central discriminator on all channels of the task.
pub fn run_table3(exp: &BlinkExperiment, real: &MtsDataset, base_seed: u64) -> Result<Table3> {
    exp.validate()?;
    let utility = exp.utility(base_seed);
    let mut reports = Vec::new();
    for method in [Method::CosciCd, Method::CosciNoCd] {
        let synth = MethodSynthesizer::new(method, exp.gan.clone());
        let (trtf, tftr) = run_trts_tstr(real, &synth, method, &utility)?;
        reports.push(trtf);
        reports.push(tftr);
    }
    Ok(Table3 { reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub all_synthetic: Vec<UtilityReport>,
    pub augmentation: Vec<UtilityReport>,
}

pub fn run_bench(exp: &BlinkExperiment, real: &MtsDataset, base_seed: u64) -> Result<BenchReport> {
    exp.validate()?;
    let utility = exp.utility(base_seed);
    let all_synthetic = run_all_synthetic(real, &exp.methods, &exp.gan, &exp.channel_counts, &utility)?;
    let augmentation = if exp.ratios.is_empty() {
        Vec::new()
    } else {
        run_augmentation(real, &exp.methods, &exp.gan, &exp.channel_counts, &exp.ratios, &utility)?
    };
    Ok(BenchReport {
        all_synthetic,
        augmentation,
    })
}
