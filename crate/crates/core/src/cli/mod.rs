//! Command-line front end. Every command reads an optional JSON config that
//! is merged over the (full-scale or desk) preset, writes its artifacts into
//! `--out`, and finishes with a `manifest.json` holding the config hash, the
//! seed, the tool version, the wall time and a digest of every artifact.

pub mod experiments;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cosci::{AnyModel, CosciConfig, CosciModel, JointModel};
use crate::dataset::{csv_shape, load_csv, save_csv, MtsDataset};
use crate::error::{Error, Result};
use crate::metrics::{
    aed, amplitudes, awd, channel_wds, feature_corr_matrix, feature_corr_matrix_with,
    matrix_similarity, pca_project, tsne_embed, FeatureCorrMatrix, MatrixSimilarity, TsneConfig,
};
use crate::toygen::{generate_toy, save_truth_csv, ToySpec, ToyVariant};
use experiments::{
    run_bench, run_table3, run_toy_experiment, table1, table2, BlinkExperiment, ToyExperiment,
    ToyVariantResult,
};

#[derive(Debug, Parser)]
#[command(name = "cosci", version, about = "Multichannel time-series GAN with a central discriminator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config merged over the command's preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Start from the reduced single-core presets.
    #[arg(long, global = true)]
    pub desk_scale: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a two-channel toy dataset.
    GenToy {
        #[arg(long)]
        variant: Option<ToyVariant>,
    },
    /// Train the per-channel model on a CSV dataset.
    Train(DataArgs),
    /// Draw synthetic instances from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Train the joint baseline on a CSV dataset.
    TrainBaseline(DataArgs),
    /// Compare a synthetic dataset against a real one.
    Eval {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
    },
    /// All-synthetic and augmentation utility experiments.
    Bench,
    /// AWD and AED with and without the central discriminator.
    ReproTable1,
    /// Correlation-matrix similarity with and without the central discriminator.
    ReproTable2,
    /// Train-on-real/test-on-fake and the reverse on blink frames.
    ReproTable3,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Needed only when the CSV has no header line.
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenToy { .. } => "gen-toy",
            Command::Train(_) => "train",
            Command::Sample { .. } => "sample",
            Command::TrainBaseline(_) => "train-baseline",
            Command::Eval { .. } => "eval",
            Command::Bench => "bench",
            Command::ReproTable1 => "repro-table1",
            Command::ReproTable2 => "repro-table2",
            Command::ReproTable3 => "repro-table3",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub config_sha256: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records a digest of everything written into it.
struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(name)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
        self.text(name, &(text + "\n"))
    }

    fn dataset(&mut self, name: &str, data: &MtsDataset) -> Result<()> {
        save_csv(data, self.dir.join(name))?;
        self.record(name)
    }

    fn with_path(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.dir.join(name))?;
        self.record(name)
    }

    fn finish(self, command: &str, config: Value, seed: u64, started: Instant) -> Result<Manifest> {
        let canonical = serde_json::to_string(&config).map_err(|e| Error::Data(e.to_string()))?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(canonical.as_bytes()),
            config,
            seed,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            artifacts: self.entries,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset overlaid with the user's JSON. Unknown keys are rejected by the
/// target type, and the error names the offending field.
pub fn load_config<T: Serialize + DeserializeOwned>(preset: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(preset) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let overlay: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !overlay.is_object() {
        return Err(Error::Config(format!("{}: top level must be a JSON object", path.display())));
    }
    let mut value = serde_json::to_value(&preset).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut value, overlay);
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Data(e.to_string()))
}

fn load_dataset(path: &Path, channels: Option<usize>, length: Option<usize>) -> Result<MtsDataset> {
    match (csv_shape(path)?, channels, length) {
        (Some((c, l)), _, _) => load_csv(path, c, l),
        (None, Some(c), Some(l)) => load_csv(path, c, l),
        (None, _, _) => Err(Error::Config(format!(
            "{} has no header; pass --channels and --length",
            path.display()
        ))),
    }
}

fn losses_csv(log: &[crate::cosci::EpochLoss]) -> String {
    let mut out = String::from("epoch,d_loss,g_loss,cd_loss\n");
    for e in log {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";");
        let cd = e.cd_loss.map(|v| format!("{v:?}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", e.epoch, join(&e.d_loss), join(&e.g_loss), cd);
    }
    out
}

fn heatmap_csv(m: &FeatureCorrMatrix) -> String {
    let mut out = String::from("feature");
    for name in &m.feature_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (name, row) in m.feature_names.iter().zip(m.values.outer_iter()) {
        out.push_str(name);
        for v in row {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

fn scatter_csv(rows: impl IntoIterator<Item = (String, Vec<f64>)>, header: &str) -> String {
    let mut out = format!("{header}\n");
    for (tag, values) in rows {
        out.push_str(&tag);
        for v in values {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Channel pairs whose cross-feature correlation matrices are compared.
    pub pairs: Vec<(usize, usize)>,
    pub pca_dims: usize,
    /// t-SNE is exact and quadratic in the point count, so it is opt-in.
    pub tsne: Option<TsneConfig>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pairs: vec![(0, 1)],
            pca_dims: 2,
            tsne: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct PairReport {
    channels: (usize, usize),
    kept: Vec<String>,
    dropped: Vec<String>,
    similarity: MatrixSimilarity,
}

#[derive(Debug, Clone, Serialize)]
struct EvalReport {
    n_real: usize,
    n_synthetic: usize,
    channel_wds: Vec<f64>,
    awd: f64,
    aed: Option<f64>,
    pairs: Vec<PairReport>,
}

fn eval(cfg: &EvalConfig, real: &MtsDataset, synth: &MtsDataset, out: &mut Artifacts) -> Result<()> {
    if (real.n_channels(), real.length()) != (synth.n_channels(), synth.length()) {
        return Err(Error::Shape("real and synthetic datasets differ in shape".into()));
    }
    let mut pairs = Vec::new();
    for &(a, b) in &cfg.pairs {
        let rm = feature_corr_matrix(real, a, b)?;
        let sm = feature_corr_matrix_with(synth, a, b, &rm.kept)?;
        out.text(&format!("heatmap_real_{a}_{b}.csv"), &heatmap_csv(&rm))?;
        out.text(&format!("heatmap_synthetic_{a}_{b}.csv"), &heatmap_csv(&sm))?;
        pairs.push(PairReport {
            channels: (a, b),
            kept: rm.feature_names.clone(),
            dropped: rm.dropped.clone(),
            similarity: matrix_similarity(&rm, &sm)?,
        });
    }
    let report = EvalReport {
        n_real: real.n_instances(),
        n_synthetic: synth.n_instances(),
        channel_wds: channel_wds(real, synth)?,
        awd: awd(real, synth)?,
        aed: (real.n_channels() == 2).then(|| aed(synth)).transpose()?,
        pairs,
    };
    out.json("metrics.json", &report)?;

    let header = std::iter::once("source".to_string())
        .chain((0..real.n_channels()).map(|c| format!("amplitude_{c}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = [("real", real), ("synthetic", synth)].into_iter().flat_map(|(tag, d)| {
        let amps = amplitudes(d);
        (0..d.n_instances())
            .map(move |i| (tag.to_string(), amps.iter().map(|ch| ch[i]).collect()))
            .collect::<Vec<_>>()
    });
    out.text("amplitudes.csv", &scatter_csv(rows, &header))?;

    if cfg.pca_dims > 0 {
        let pca = pca_project(&[real, synth], cfg.pca_dims)?;
        out.text("pca.csv", &embedding_csv(&pca.points))?;
    }
    if let Some(tsne) = &cfg.tsne {
        out.text("tsne.csv", &embedding_csv(&tsne_embed(&[real, synth], tsne)?))?;
    }
    Ok(())
}

fn embedding_csv(points: &[ndarray::Array2<f64>]) -> String {
    let dims = points.first().map_or(0, |p| p.ncols());
    let header = std::iter::once("source".to_string())
        .chain((0..dims).map(|d| format!("dim_{d}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = points.iter().zip(["real", "synthetic"]).flat_map(|(p, tag)| {
        p.outer_iter()
            .map(|r| (tag.to_string(), r.to_vec()))
            .collect::<Vec<_>>()
    });
    scatter_csv(rows, &header)
}

fn toy_artifacts(results: &[ToyVariantResult], out: &mut Artifacts) -> Result<()> {
    out.json("runs.json", &results)?;
    for r in results {
        let name = r.variant.name();
        out.text(&format!("heatmap_{name}_real.csv"), &heatmap_csv(&r.real_matrix))?;
        let mut scatter: Vec<(String, Vec<f64>)> = r
            .real_amplitudes
            .iter()
            .map(|&(a, b)| ("real".to_string(), vec![a, b]))
            .collect();
        for (without, with) in r.pairs().into_iter().take(1) {
            out.text(&format!("heatmap_{name}_without_cd.csv"), &heatmap_csv(&without.matrix))?;
            out.text(&format!("heatmap_{name}_with_cd.csv"), &heatmap_csv(&with.matrix))?;
            for (tag, run) in [("without_cd", without), ("with_cd", with)] {
                scatter.extend(run.amplitudes.iter().map(|&(a, b)| (tag.to_string(), vec![a, b])));
            }
        }
        out.text(&format!("amplitudes_{name}.csv"), &scatter_csv(scatter, "source,amplitude_0,amplitude_1"))?;
    }
    Ok(())
}

fn table_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let Value::Object(map) = to_value(row)? else {
            return Err(Error::Data("table rows must be objects".into()));
        };
        if i == 0 {
            out.push_str(&map.keys().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        let cells: Vec<String> = map
            .values()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Executes one command and returns its manifest.
pub fn run(cli: &Cli) -> Result<Manifest> {
    let started = Instant::now();
    let g = &cli.global;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let config = g.config.as_deref();
    let mut out = Artifacts::new(&g.out)?;
    let desk = g.desk_scale;
    let name = cli.command.name();

    let (config_value, seed) = match &cli.command {
        Command::GenToy { variant } => {
            let preset = if desk { ToyExperiment::desk().toy } else { ToySpec::default() };
            let mut spec = load_config(preset, config)?;
            if let Some(v) = variant {
                spec.variant = *v;
            }
            if let Some(s) = g.seed {
                spec.seed = s;
            }
            spec.validate()?;
            let (data, truth) = generate_toy(&spec)?;
            out.dataset("data.csv", &data)?;
            out.with_path("truth.csv", |p| save_truth_csv(&truth, p))?;
            (to_value(&spec)?, spec.seed)
        }
        Command::Train(args) | Command::TrainBaseline(args) => {
            let preset = if desk { CosciConfig::desk() } else { CosciConfig::default() };
            let mut cfg = load_config(preset, config)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let data = load_dataset(&args.data, args.channels, args.length)?;
            let log = if matches!(cli.command, Command::Train(_)) {
                let mut m = CosciModel::for_data(&cfg, &data)?;
                m.train(&data)?;
                out.with_path("checkpoint.json", |p| m.save(p))?;
                m.epoch_log().to_vec()
            } else {
                let mut m = JointModel::for_data(&cfg, &data)?;
                m.train(&data)?;
                out.with_path("checkpoint.json", |p| m.save(p))?;
                m.epoch_log().to_vec()
            };
            out.text("losses.csv", &losses_csv(&log))?;
            (to_value(&cfg)?, cfg.seed)
        }
        Command::Sample { checkpoint, n } => {
            let seed = g.seed.unwrap_or(0);
            let model = AnyModel::load(checkpoint)?;
            out.dataset("samples.csv", &model.sample(*n, seed)?)?;
            let digest = sha256_hex(&std::fs::read(checkpoint).map_err(|e| Error::io(checkpoint, e))?);
            (serde_json::json!({ "checkpoint_sha256": digest, "n": n }), seed)
        }
        Command::Eval {
            real,
            synthetic,
            channels,
            length,
        } => {
            let cfg = load_config(EvalConfig::default(), config)?;
            let r = load_dataset(real, *channels, *length)?;
            let s = load_dataset(synthetic, *channels, *length)?;
            eval(&cfg, &r, &s, &mut out)?;
            (to_value(&cfg)?, g.seed.unwrap_or(0))
        }
        Command::ReproTable1 | Command::ReproTable2 => {
            let preset = if desk { ToyExperiment::desk() } else { ToyExperiment::default() };
            let exp = load_config(preset, config)?;
            let seed = g.seed.unwrap_or(0);
            let results = run_toy_experiment(&exp, seed)?;
            if matches!(cli.command, Command::ReproTable1) {
                let rows = table1(&results);
                out.json("table1.json", &rows)?;
                out.text("table1.csv", &table_csv(&rows)?)?;
            } else {
                let rows = table2(&results);
                out.json("table2.json", &rows)?;
                out.text("table2.csv", &table_csv(&rows)?)?;
            }
            toy_artifacts(&results, &mut out)?;
            (to_value(&exp)?, seed)
        }
        Command::ReproTable3 | Command::Bench => {
            let preset = if desk { BlinkExperiment::desk() } else { BlinkExperiment::default() };
            let exp = load_config(preset, config)?;
            let seed = g.seed.unwrap_or(0);
            let real = exp.task.build()?;
            if matches!(cli.command, Command::ReproTable3) {
                let table = run_table3(&exp, &real, seed)?;
                out.json("table3.json", &table)?;
                let rows: Vec<_> = table.reports.iter().flat_map(|r| r.rows()).collect();
                out.text("table3.csv", &table_csv(&rows)?)?;
            } else {
                let report = run_bench(&exp, &real, seed)?;
                out.json("bench.json", &report)?;
                let rows: Vec<_> = report
                    .all_synthetic
                    .iter()
                    .chain(&report.augmentation)
                    .flat_map(|r| r.rows())
                    .collect();
                out.text("bench.csv", &table_csv(&rows)?)?;
            }
            (to_value(&exp)?, seed)
        }
    };
    log::info!("{name} finished in {:.1}s", started.elapsed().as_secs_f64());
    out.finish(name, config_value, seed, started)
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}
