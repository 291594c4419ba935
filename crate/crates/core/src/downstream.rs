//! Utility of synthetic data measured through a binary sequence classifier.
//!
//! Every protocol splits the real data 80/20 per seed. Generative models and
//! classifiers only ever see the 80% side; the 20% side is the real test set.
//! Inside any classifier training set a further 80/20 split provides the
//! validation data used to keep the best parameters.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cosci::{derive_seed, CosciConfig, CosciModel, JointModel};
use crate::dataset::eeg::{generate_eeg_fixture, EegFixtureSpec};
use crate::dataset::{extract_event_windows, zscore_filter, MtsDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::nn::{bce_grad, bce_loss, Adam, LstmDiscriminator, LstmNetSpec};

mod stream {
    pub const TEST_SPLIT: u64 = 101;
    pub const VAL_SPLIT: u64 = 102;
    pub const CLASSIFIER: u64 = 103;
    pub const SYNTH: u64 = 104;
    pub const SHUFFLE: u64 = 105;
}

/// Fraction of the real data that generative models and classifiers may train on.
pub const TRAIN_FRACTION: f64 = 0.8;
/// Fraction of a classifier's training pool kept for fitting; the rest validates.
pub const FIT_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub hidden_dim: usize,
    pub layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            layers: 1,
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl ClassifierSpec {
    pub fn desk() -> Self {
        Self {
            hidden_dim: 32,
            lr: 3e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.layers == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "classifier hidden_dim, layers and batch_size must be >= 1".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("classifier lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Anything that scores instances with P(label = 1).
pub trait BinaryClassifier {
    fn predict_proba(&mut self, data: &MtsDataset) -> Result<Vec<f64>>;
}

/// LSTM over the time axis with one input feature per channel, then a
/// linear head and a sigmoid.
#[derive(Debug, Clone)]
pub struct LstmClassifier {
    net: LstmDiscriminator,
    /// Validation accuracy after each epoch.
    pub val_history: Vec<f64>,
    pub best_val_accuracy: f64,
}

const PREDICT_CHUNK: usize = 256;

impl BinaryClassifier for LstmClassifier {
    fn predict_proba(&mut self, data: &MtsDataset) -> Result<Vec<f64>> {
        if data.n_channels() != self.net.features || data.length() != self.net.steps {
            return Err(Error::Shape(format!(
                "classifier expects {} channels x {} steps, got {} x {}",
                self.net.features,
                self.net.steps,
                data.n_channels(),
                data.length()
            )));
        }
        let idx: Vec<usize> = (0..data.n_instances()).collect();
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(PREDICT_CHUNK) {
            out.extend(self.net.forward(&data.instance_batch(chunk))?);
        }
        Ok(out)
    }
}

fn require_labels(data: &MtsDataset, what: &str) -> Result<Vec<u8>> {
    data.labels()
        .map(<[u8]>::to_vec)
        .ok_or_else(|| Error::Data(format!("{what} set is unlabeled")))
}

fn require_both_classes(labels: &[u8], what: &str) -> Result<()> {
    for c in 0..=1u8 {
        if !labels.contains(&c) {
            return Err(Error::Data(format!("{what} set has no instance of class {c}")));
        }
    }
    Ok(())
}

pub fn train_classifier(spec: &ClassifierSpec, train: &MtsDataset, val: &MtsDataset) -> Result<LstmClassifier> {
    spec.validate()?;
    let labels = require_labels(train, "training")?;
    require_both_classes(&labels, "training")?;
    require_labels(val, "validation")?;
    if val.n_instances() == 0 {
        return Err(Error::Data("validation set is empty".into()));
    }
    if (val.n_channels(), val.length()) != (train.n_channels(), train.length()) {
        return Err(Error::Shape("training and validation shapes differ".into()));
    }
    let net_spec = LstmNetSpec {
        input_dim: train.n_channels(),
        hidden_dim: spec.hidden_dim,
        num_layers: spec.layers,
        output_dim: 1,
    };
    let mut clf = LstmClassifier {
        net: LstmDiscriminator::new(net_spec, train.length(), derive_seed(spec.seed, stream::CLASSIFIER, 0))?,
        val_history: Vec::with_capacity(spec.epochs),
        best_val_accuracy: 0.0,
    };
    clf.best_val_accuracy = evaluate(&mut clf, val)?;
    let mut best = clf.net.clone();
    let mut opt = Adam::new(clf.net.params(), spec.lr);
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();

    for epoch in 0..spec.epochs {
        let mut order: Vec<usize> = (0..train.n_instances()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, stream::SHUFFLE, epoch as u64)));
        for idx in order.chunks(spec.batch_size) {
            let x = train.instance_batch(idx);
            let t: Array1<f64> = idx.iter().map(|&i| targets[i]).collect();
            clf.net.params_mut().zero_grad();
            let p = clf.net.forward(&x)?;
            let loss = bce_loss(&p, &t)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("classifier loss is {loss} in epoch {epoch}")));
            }
            clf.net.backward(&bce_grad(&p, &t)?, true, false)?;
            opt.step(clf.net.params_mut())?;
        }
        let acc = evaluate(&mut clf, val)?;
        clf.val_history.push(acc);
        if acc > clf.best_val_accuracy {
            clf.best_val_accuracy = acc;
            best = clf.net.clone();
        }
    }
    clf.net = best;
    Ok(clf)
}

/// 2x2 counts indexed `[true label][predicted label]` at threshold 0.5.
pub fn confusion_matrix(clf: &mut dyn BinaryClassifier, test: &MtsDataset) -> Result<[[usize; 2]; 2]> {
    let labels = require_labels(test, "test")?;
    if labels.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    let probs = clf.predict_proba(test)?;
    let mut m = [[0usize; 2]; 2];
    for (&l, &p) in labels.iter().zip(&probs) {
        m[usize::from(l)][usize::from(p >= 0.5)] += 1;
    }
    Ok(m)
}

/// Fraction of correct predictions at threshold 0.5.
pub fn evaluate(clf: &mut dyn BinaryClassifier, test: &MtsDataset) -> Result<f64> {
    let m = confusion_matrix(clf, test)?;
    let total: usize = m.iter().flatten().sum();
    Ok((m[0][0] + m[1][1]) as f64 / total as f64)
}

/// Produces `n` synthetic instances resembling `class_data`.
pub trait Synthesizer: Sync {
    fn synthesize(&self, class_data: &MtsDataset, n: usize, seed: u64) -> Result<MtsDataset>;
}

impl<F> Synthesizer for F
where
    F: Fn(&MtsDataset, usize, u64) -> Result<MtsDataset> + Sync,
{
    fn synthesize(&self, class_data: &MtsDataset, n: usize, seed: u64) -> Result<MtsDataset> {
        self(class_data, n, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Control arm: the real training data itself.
    Real,
    CosciCd,
    CosciNoCd,
    /// One joint GAN over whole instances.
    Baseline,
}

impl Method {
    pub const GENERATIVE: [Method; 3] = [Method::CosciCd, Method::CosciNoCd, Method::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Real => "real",
            Method::CosciCd => "cosci_cd",
            Method::CosciNoCd => "cosci_no_cd",
            Method::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Method::Real, Method::CosciCd, Method::CosciNoCd, Method::Baseline]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Trains one model of the given method on the class data and samples from it.
#[derive(Debug, Clone)]
pub struct MethodSynthesizer {
    pub method: Method,
    pub config: CosciConfig,
}

impl MethodSynthesizer {
    pub fn new(method: Method, config: CosciConfig) -> Self {
        Self { method, config }
    }
}

impl Synthesizer for MethodSynthesizer {
    fn synthesize(&self, class_data: &MtsDataset, n: usize, seed: u64) -> Result<MtsDataset> {
        let mut cfg = self.config.clone();
        cfg.seed = seed;
        cfg.n_channels = None;
        cfg.length = None;
        let sample_seed = derive_seed(seed, stream::SYNTH, 1);
        match self.method {
            Method::Real => {
                let idx: Vec<usize> = (0..n).map(|i| i % class_data.n_instances()).collect();
                class_data.select_instances(&idx)
            }
            Method::CosciCd | Method::CosciNoCd => {
                cfg.with_cd = self.method == Method::CosciCd;
                let mut m = CosciModel::for_data(&cfg, class_data)?;
                m.train(class_data)?;
                m.sample(n, sample_seed)
            }
            Method::Baseline => {
                let mut m = JointModel::for_data(&cfg, class_data)?;
                m.train(class_data)?;
                m.sample(n, sample_seed)
            }
        }
    }
}

/// Synthesizes `per_class(count)` instances for each class of `train`, one model per class.
pub fn synthesize_labeled(
    synth: &dyn Synthesizer,
    train: &MtsDataset,
    per_class: impl Fn(usize) -> usize,
    seed: u64,
) -> Result<MtsDataset> {
    require_both_classes(&require_labels(train, "training")?, "training")?;
    let mut out: Option<MtsDataset> = None;
    for class in 0..=1u8 {
        let data = train.filter_label(class)?;
        let n = per_class(data.n_instances());
        if n == 0 {
            continue;
        }
        let s = synth.synthesize(&data, n, derive_seed(seed, stream::SYNTH, 10 + u64::from(class)))?;
        if s.n_instances() != n || s.n_channels() != data.n_channels() || s.length() != data.length() {
            return Err(Error::Shape(format!(
                "synthesizer returned {}x{}x{} for class {class}, expected {n}x{}x{}",
                s.n_instances(),
                s.n_channels(),
                s.length(),
                data.n_channels(),
                data.length()
            )));
        }
        let s = s.with_labels(Some(vec![class; n]))?;
        out = Some(match out {
            None => s,
            Some(prev) => prev.concat(&s)?,
        });
    }
    out.ok_or_else(|| Error::Data("no synthetic instances requested".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// Train on real, test on fake.
    #[serde(rename = "TRTF")]
    Trtf,
    /// Train on fake, test on real.
    #[serde(rename = "TFTR")]
    Tftr,
    AllSynthetic,
    Augmentation,
}

/// Per-seed accuracies of one (protocol, method, channel count, ratio) cell group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub protocol: Protocol,
    pub method: Method,
    pub n_channels: usize,
    /// `(real, synthetic)` parts of the classifier training mix.
    pub augmentation_ratio: (usize, usize),
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single seed).
    pub sd: f64,
}

impl UtilityReport {
    fn new(protocol: Protocol, method: Method, n_channels: usize, ratio: (usize, usize), seeds: &[u64], accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let sd = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            protocol,
            method,
            n_channels,
            augmentation_ratio: ratio,
            seeds: seeds.to_vec(),
            accuracies,
            mean,
            sd,
        }
    }

    pub fn median(&self) -> f64 {
        let mut v = self.accuracies.clone();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }

    /// One row per seed.
    pub fn rows(&self) -> Vec<UtilityRow> {
        self.seeds
            .iter()
            .zip(&self.accuracies)
            .map(|(&seed, &accuracy)| UtilityRow {
                protocol: self.protocol,
                method: self.method,
                n_channels: self.n_channels,
                ratio_real: self.augmentation_ratio.0,
                ratio_synthetic: self.augmentation_ratio.1,
                seed,
                accuracy,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub protocol: Protocol,
    pub method: Method,
    pub n_channels: usize,
    pub ratio_real: usize,
    pub ratio_synthetic: usize,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig {
    pub classifier: ClassifierSpec,
    pub seeds: Vec<u64>,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierSpec::default(),
            seeds: (0..5).collect(),
        }
    }
}

impl UtilityConfig {
    fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    fn classifier_for(&self, seed: u64) -> ClassifierSpec {
        ClassifierSpec {
            seed: derive_seed(seed, stream::CLASSIFIER, 1),
            ..self.classifier.clone()
        }
    }
}

/// Real train/test split for one seed, with the disjointness check.
pub fn real_split(real: &MtsDataset, seed: u64) -> Result<(MtsDataset, MtsDataset)> {
    require_both_classes(&require_labels(real, "real")?, "real")?;
    let (train, test) = real.split_indices(&SplitSpec::new(TRAIN_FRACTION, derive_seed(seed, stream::TEST_SPLIT, 0)))?;
    let mut seen = vec![false; real.n_instances()];
    train.iter().for_each(|&i| seen[i] = true);
    if test.iter().any(|&i| seen[i]) {
        return Err(Error::State("train and test index sets overlap".into()));
    }
    Ok((real.select_instances(&train)?, real.select_instances(&test)?))
}

/// Fits a classifier on `pool`, validating on a held-back fifth of it.
pub fn fit_on(pool: &MtsDataset, spec: &ClassifierSpec) -> Result<LstmClassifier> {
    let (fit, val) = pool.split(&SplitSpec::new(FIT_FRACTION, derive_seed(spec.seed, stream::VAL_SPLIT, 0)))?;
    train_classifier(spec, &fit, &val)
}

fn per_seed<F>(seeds: &[u64], f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Both directions of the real/fake exchange, with a synthetic set the size of the real training part.
pub fn run_trts_tstr(
    real: &MtsDataset,
    synth: &dyn Synthesizer,
    method: Method,
    cfg: &UtilityConfig,
) -> Result<(UtilityReport, UtilityReport)> {
    cfg.validate()?;
    let pairs: Vec<(f64, f64)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (train, test) = real_split(real, seed)?;
            let fake = synthesize_labeled(synth, &train, |n| n, seed)?;
            let spec = cfg.classifier_for(seed);
            let trtf = evaluate(&mut fit_on(&train, &spec)?, &fake)?;
            let tftr = evaluate(&mut fit_on(&fake, &spec)?, &test)?;
            Ok((trtf, tftr))
        })
        .collect::<Result<_>>()?;
    let c = real.n_channels();
    Ok((
        UtilityReport::new(Protocol::Trtf, method, c, (0, 1), &cfg.seeds, pairs.iter().map(|p| p.0).collect()),
        UtilityReport::new(Protocol::Tftr, method, c, (1, 0), &cfg.seeds, pairs.iter().map(|p| p.1).collect()),
    ))
}

fn first_channels(real: &MtsDataset, k: usize) -> Result<MtsDataset> {
    if k == 0 || k > real.n_channels() {
        return Err(Error::Config(format!(
            "channel count {k} outside 1..={}",
            real.n_channels()
        )));
    }
    real.select_channels(&(0..k).collect::<Vec<_>>())
}

fn with_control(methods: &[Method]) -> Vec<Method> {
    let mut all = vec![Method::Real];
    all.extend(methods.iter().copied().filter(|&m| m != Method::Real));
    all
}

/// Classifiers trained only on synthetic data and tested on held-out real
/// data, for every method and channel count. The real control arm is always
/// included. Channel count `k` keeps the first `k` channels.
pub fn run_all_synthetic(
    real: &MtsDataset,
    methods: &[Method],
    base: &CosciConfig,
    channel_counts: &[usize],
    cfg: &UtilityConfig,
) -> Result<Vec<UtilityReport>> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for &k in channel_counts {
        let data = first_channels(real, k)?;
        for method in with_control(methods) {
            let synth = MethodSynthesizer::new(method, base.clone());
            let acc = per_seed(&cfg.seeds, |seed| {
                let (train, test) = real_split(&data, seed)?;
                let pool = match method {
                    Method::Real => train,
                    _ => synthesize_labeled(&synth, &train, |n| n, seed)?,
                };
                evaluate(&mut fit_on(&pool, &cfg.classifier_for(seed))?, &test)
            })?;
            reports.push(UtilityReport::new(Protocol::AllSynthetic, method, k, (0, 1), &cfg.seeds, acc));
        }
    }
    Ok(reports)
}

/// Classifiers trained on the real training part plus `k` synthetic
/// instances per real one (ratio `(1, k)`), tested on held-out real data.
/// A synthetic part of 0 reproduces the train-on-real control.
pub fn run_augmentation(
    real: &MtsDataset,
    methods: &[Method],
    base: &CosciConfig,
    channel_counts: &[usize],
    ratios: &[(usize, usize)],
    cfg: &UtilityConfig,
) -> Result<Vec<UtilityReport>> {
    cfg.validate()?;
    if let Some(r) = ratios.iter().find(|r| r.0 == 0) {
        return Err(Error::Config(format!("ratio {r:?} has no real part")));
    }
    let mut reports = Vec::new();
    for &k in channel_counts {
        let data = first_channels(real, k)?;
        for &method in methods {
            let synth = MethodSynthesizer::new(method, base.clone());
            for &(r, s) in ratios {
                let acc = per_seed(&cfg.seeds, |seed| {
                    let (train, test) = real_split(&data, seed)?;
                    let pool = if s == 0 {
                        train
                    } else {
                        let fake = synthesize_labeled(&synth, &train, |n| n * s / r, seed)?;
                        train.concat(&fake)?
                    };
                    evaluate(&mut fit_on(&pool, &cfg.classifier_for(seed))?, &test)
                })?;
                reports.push(UtilityReport::new(Protocol::Augmentation, method, k, (r, s), &cfg.seeds, acc));
            }
        }
    }
    Ok(reports)
}

/// Labeled blink / no-blink frames cut from the hermetic EEG-like recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlinkTask {
    pub fixture: EegFixtureSpec,
    pub frame_len: usize,
    pub margin: usize,
    pub zscore_threshold: f64,
    pub downsample: usize,
}

impl Default for BlinkTask {
    fn default() -> Self {
        Self {
            fixture: EegFixtureSpec {
                n_channels: 5,
                n_informative: 5,
                n_events: 400,
                window: 200,
                noise_sd: 0.5,
                ..EegFixtureSpec::default()
            },
            frame_len: 200,
            margin: 16,
            zscore_threshold: 5.0,
            downsample: 10,
        }
    }
}

impl BlinkTask {
    pub fn build(&self) -> Result<MtsDataset> {
        let fx = generate_eeg_fixture(&self.fixture)?;
        let clean = zscore_filter(&fx.recording, self.zscore_threshold)?;
        extract_event_windows(&clean, &fx.events, self.frame_len, self.margin)?.downsample(self.downsample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One channel; class 1 has positive mean, class 0 negative.
    fn separable(n: usize, len: usize, seed: u64) -> MtsDataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = (i % 2) as u8;
            let mu = if class == 1 { 0.5 } else { -0.5 };
            values.extend((0..len).map(|_| mu + rng.gen_range(-0.3..0.3)));
            labels.push(class);
        }
        MtsDataset::new(n, 1, len, values, Some(labels)).unwrap()
    }

    struct Constant(f64);
    impl BinaryClassifier for Constant {
        fn predict_proba(&mut self, data: &MtsDataset) -> Result<Vec<f64>> {
            Ok(vec![self.0; data.n_instances()])
        }
    }

    /// Scores by the sign of the instance mean.
    struct MeanSign;
    impl BinaryClassifier for MeanSign {
        fn predict_proba(&mut self, data: &MtsDataset) -> Result<Vec<f64>> {
            Ok((0..data.n_instances())
                .map(|i| if data.instance(i).iter().sum::<f64>() > 0.0 { 1.0 } else { 0.0 })
                .collect())
        }
    }

    fn small_spec() -> ClassifierSpec {
        ClassifierSpec {
            hidden_dim: 8,
            epochs: 10,
            batch_size: 16,
            lr: 1e-2,
            seed: 3,
            ..ClassifierSpec::default()
        }
    }

    #[test]
    fn learns_separable_fixture() {
        let train = separable(96, 12, 1);
        let val = separable(40, 12, 2);
        let mut clf = train_classifier(&small_spec(), &train, &val).unwrap();
        assert!(clf.best_val_accuracy >= 0.95, "{:?}", clf.val_history);
        assert_eq!(evaluate(&mut clf, &val).unwrap(), clf.best_val_accuracy);
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let train = separable(40, 8, 1);
        let val = separable(20, 8, 2);
        let spec = ClassifierSpec { epochs: 0, ..small_spec() };
        let clf = train_classifier(&spec, &train, &val).unwrap();
        assert!(clf.val_history.is_empty());
        let mut a = train_classifier(&small_spec(), &train, &val).unwrap();
        let mut b = train_classifier(&small_spec(), &train, &val).unwrap();
        assert_eq!(a.predict_proba(&val).unwrap(), b.predict_proba(&val).unwrap());
    }

    #[test]
    fn single_class_training_rejected() {
        let train = separable(20, 8, 1).filter_label(1).unwrap();
        let val = separable(20, 8, 2);
        assert!(matches!(train_classifier(&small_spec(), &train, &val), Err(Error::Data(_))));
    }

    #[test]
    fn trivial_classifiers() {
        let test = separable(50, 4, 5);
        assert_eq!(evaluate(&mut Constant(0.9), &test).unwrap(), 0.5);
        assert_eq!(evaluate(&mut MeanSign, &test).unwrap(), 1.0);
        let unlabeled = test.clone().with_labels(None).unwrap();
        assert!(matches!(evaluate(&mut Constant(0.9), &unlabeled), Err(Error::Data(_))));
    }

    #[test]
    fn accuracy_matches_confusion_oracle() {
        let test = separable(60, 6, 9);
        let mut clf = train_classifier(&ClassifierSpec { epochs: 1, ..small_spec() }, &separable(40, 6, 1), &separable(10, 6, 2)).unwrap();
        let probs = clf.predict_proba(&test).unwrap();
        let labels = test.labels().unwrap();
        let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
        for (p, &l) in probs.iter().zip(labels) {
            match (*p >= 0.5, l == 1) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
            }
        }
        let m = confusion_matrix(&mut clf, &test).unwrap();
        assert_eq!(m, [[tn, fp], [fneg, tp]]);
        assert_eq!(evaluate(&mut clf, &test).unwrap(), (tp + tn) as f64 / 60.0);
    }

    #[test]
    fn shuffled_labels_give_chance_accuracy() {
        let train = separable(96, 12, 1);
        let val = separable(40, 12, 2);
        let mut clf = train_classifier(&small_spec(), &train, &val).unwrap();
        let test = separable(400, 12, 4);
        let mut labels = test.labels().unwrap().to_vec();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
        let shuffled = test.with_labels(Some(labels)).unwrap();
        let acc = evaluate(&mut clf, &shuffled).unwrap();
        let sigma = (0.25f64 / 400.0).sqrt();
        assert!((acc - 0.5).abs() < 3.0 * sigma, "{acc}");
    }

    #[test]
    fn splits_are_disjoint_and_stratified() {
        let real = separable(50, 4, 1);
        for seed in 0..5 {
            let (train, test) = real_split(&real, seed).unwrap();
            assert_eq!(train.n_instances() + test.n_instances(), 50);
            for i in 0..test.n_instances() {
                assert!((0..train.n_instances()).all(|j| train.instance(j) != test.instance(i)));
            }
            assert!(test.labels().unwrap().contains(&0) && test.labels().unwrap().contains(&1));
        }
    }

    #[test]
    fn copied_synthetic_set_tracks_real_accuracy() {
        let real = separable(120, 10, 1);
        let copy = |d: &MtsDataset, n: usize, _seed: u64| {
            assert_eq!(n, d.n_instances());
            Ok(d.clone())
        };
        let cfg = UtilityConfig { classifier: small_spec(), seeds: vec![0, 1] };
        let (trtf, tftr) = run_trts_tstr(&real, &copy, Method::Real, &cfg).unwrap();
        assert_eq!(trtf.accuracies.len(), 2);
        for seed in [0, 1] {
            let (train, test) = real_split(&real, seed).unwrap();
            let trtr = evaluate(&mut fit_on(&train, &cfg.classifier_for(seed)).unwrap(), &test).unwrap();
            assert!((trtf.accuracies[seed as usize] - trtr).abs() <= 0.1);
            assert!((tftr.accuracies[seed as usize] - trtr).abs() <= 0.1);
        }
        let (again, _) = run_trts_tstr(&real, &copy, Method::Real, &cfg).unwrap();
        assert_eq!(again, trtf);
    }

    #[test]
    fn missing_class_is_an_error() {
        let real = separable(40, 4, 1).filter_label(0).unwrap();
        let copy = |d: &MtsDataset, _n: usize, _s: u64| Ok(d.clone());
        let cfg = UtilityConfig { classifier: small_spec(), seeds: vec![0] };
        assert!(matches!(run_trts_tstr(&real, &copy, Method::Real, &cfg), Err(Error::Data(_))));
    }

    fn tiny_gan() -> CosciConfig {
        CosciConfig {
            n_epochs: 1,
            g_hidden: 4,
            d_hidden: 4,
            cd_hidden: 4,
            lld_widths: vec![8, 4],
            noise_len: 4,
            batch_size: 16,
            ..CosciConfig::desk()
        }
    }

    fn two_channel(n: usize) -> MtsDataset {
        let a = separable(n, 6, 1);
        let b = separable(n, 6, 1);
        let nested: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| vec![a.series(i, 0).to_vec(), b.series(i, 0).iter().map(|v| -v).collect()])
            .collect();
        MtsDataset::from_nested(&nested, a.labels().map(<[u8]>::to_vec)).unwrap()
    }

    #[test]
    fn all_synthetic_report_shape() {
        let real = two_channel(40);
        let cfg = UtilityConfig {
            classifier: ClassifierSpec { epochs: 2, ..small_spec() },
            seeds: (0..5).collect(),
        };
        let reports = run_all_synthetic(&real, &Method::GENERATIVE, &tiny_gan(), &[1, 2], &cfg).unwrap();
        assert_eq!(reports.len(), 2 * 4);
        for k in [1, 2] {
            assert!(reports.iter().any(|r| r.method == Method::Real && r.n_channels == k));
        }
        for r in &reports {
            assert_eq!(r.accuracies.len(), 5);
            assert!(r.accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
            assert_eq!(r.rows().len(), 5);
        }
    }

    #[test]
    fn augmentation_without_synthetic_part_equals_control() {
        let real = two_channel(40);
        let cfg = UtilityConfig {
            classifier: ClassifierSpec { epochs: 2, ..small_spec() },
            seeds: vec![0, 1, 2],
        };
        let aug = run_augmentation(&real, &[Method::CosciCd], &tiny_gan(), &[2], &[(1, 0), (1, 1)], &cfg).unwrap();
        assert_eq!(aug.len(), 2);
        let control = run_all_synthetic(&real, &[], &tiny_gan(), &[2], &cfg).unwrap();
        assert_eq!(control.len(), 1);
        assert_eq!(aug[0].accuracies, control[0].accuracies);
        assert_eq!(aug[1].augmentation_ratio, (1, 1));
        assert!(run_augmentation(&real, &[Method::CosciCd], &tiny_gan(), &[2], &[(0, 1)], &cfg).is_err());
    }

    #[test]
    fn blink_task_shape() {
        let task = BlinkTask {
            fixture: EegFixtureSpec { n_events: 12, ..BlinkTask::default().fixture },
            ..BlinkTask::default()
        };
        let d = task.build().unwrap();
        assert_eq!((d.n_instances(), d.n_channels(), d.length()), (24, 5, 20));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Real, Method::CosciCd, Method::CosciNoCd, Method::Baseline] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
    }
}
