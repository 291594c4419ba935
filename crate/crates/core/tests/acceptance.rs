//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cosci::cli::experiments::{run_table3, run_toy_experiment, BlinkExperiment, ToyExperiment};
use cosci::cli::{run, Cli};
use cosci::cosci::{CosciConfig, CosciModel, NoiseProbe};
use cosci::dataset::MtsDataset;
use cosci::downstream::{run_all_synthetic, BlinkTask, Method, Protocol};
use cosci::metrics::{amplitudes, kendall_tau_b, pca_project, wasserstein1d};
use cosci::nn::{grad_check, GradCheckNet};
use cosci::toygen::{generate_toy, ToySpec, ToyVariant};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> std::result::Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

// ---------------------------------------------------------------- 1

fn gradients() -> Check {
    let start = Instant::now();
    let lstm = [
        GradCheckNet::LstmGenerator { noise_len: 5, hidden: 4, out_len: 6, layers: 1 },
        GradCheckNet::LstmDiscriminator { features: 2, steps: 5, hidden: 4, layers: 2 },
    ];
    let dense = [
        GradCheckNet::Linear { inputs: 5, outputs: 3 },
        GradCheckNet::MlpDiscriminator { input_dim: 8, widths: vec![6, 4, 3] },
        GradCheckNet::MlpGenerator { noise_len: 4, hidden: 5, out_len: 6 },
    ];
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..20 {
        for net in &lstm {
            let r = grad_check(net, 1e-4, seed).map_err(|e| e.to_string())?;
            ensure(r.max_rel_error < 1e-4, format!("{net:?} seed {seed}: {} at {}", r.max_rel_error, r.worst_param))?;
            worst.0 = worst.0.max(r.max_rel_error);
        }
        for net in &dense {
            let r = grad_check(net, 1e-6, seed).map_err(|e| e.to_string())?;
            ensure(r.max_rel_error < 1e-6, format!("{net:?} seed {seed}: {} at {}", r.max_rel_error, r.worst_param))?;
            worst.1 = worst.1.max(r.max_rel_error);
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("max rel error LSTM {:.1e}, dense {:.1e}", worst.0, worst.1))
}

// ---------------------------------------------------------------- 2

/// Transport LP as min-cost flow (successive shortest paths, Bellman-Ford).
/// Point masses are scaled to integers: `m` units per `a` point, `n` per `b` point.
fn transport_lp(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let nodes = n + m + 2;
    let (src, sink) = (n + m, n + m + 1);
    let mut to = Vec::new();
    let mut cap: Vec<i64> = Vec::new();
    let mut cost = Vec::new();
    let mut adj = vec![Vec::new(); nodes];
    let mut edge = |u: usize, v: usize, c: i64, w: f64, to: &mut Vec<usize>, cap: &mut Vec<i64>, cost: &mut Vec<f64>| {
        adj[u].push(to.len());
        to.push(v);
        cap.push(c);
        cost.push(w);
        adj[v].push(to.len());
        to.push(u);
        cap.push(0);
        cost.push(-w);
    };
    for i in 0..n {
        edge(src, i, m as i64, 0.0, &mut to, &mut cap, &mut cost);
        for j in 0..m {
            edge(i, n + j, i64::MAX / 4, (a[i] - b[j]).abs(), &mut to, &mut cap, &mut cost);
        }
    }
    for j in 0..m {
        edge(n + j, sink, n as i64, 0.0, &mut to, &mut cap, &mut cost);
    }
    let need = (n * m) as i64;
    let (mut flow, mut total) = (0i64, 0.0);
    while flow < need {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        loop {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    if cap[e] > 0 && dist[u] + cost[e] < dist[to[e]] - 1e-15 {
                        dist[to[e]] = dist[u] + cost[e];
                        prev[to[e]] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut push = need - flow;
        let mut v = sink;
        while v != src {
            push = push.min(cap[prev[v]]);
            v = to[prev[v] ^ 1];
        }
        let mut v = sink;
        while v != src {
            let e = prev[v];
            cap[e] -= push;
            cap[e ^ 1] += push;
            total += push as f64 * cost[e];
            v = to[e ^ 1];
        }
        flow += push;
    }
    total / need as f64
}

fn kendall_pairs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut s, mut ta, mut tb) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (da, db) = (a[i] - a[j], b[i] - b[j]);
            ta += i64::from(da == 0.0);
            tb += i64::from(db == 0.0);
            s += (da * db).signum() as i64 * i64::from(da * db != 0.0);
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    s as f64 / (((n0 - ta) as f64) * ((n0 - tb) as f64)).sqrt()
}

fn metric_oracles() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_w = 0.0f64;
    for _ in 0..50 {
        let a: Vec<f64> = (0..rng.gen_range(1..=30)).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..rng.gen_range(1..=30)).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let d = (wasserstein1d(&a, &b).map_err(|e| e.to_string())? - transport_lp(&a, &b)).abs();
        ensure(d <= 1e-9, format!("Wasserstein off by {d:e} (n={}, m={})", a.len(), b.len()))?;
        worst_w = worst_w.max(d);
    }
    for k in 0..50 {
        let a: Vec<f64> = (0..16).map(|_| f64::from(rng.gen_range(-2..=2)) * 0.5).collect();
        let b: Vec<f64> = (0..16).map(|_| f64::from(rng.gen_range(-2..=2)) * 0.5).collect();
        let fast = kendall_tau_b(&a, &b).ok_or("constant 4x4 matrix drawn")?;
        ensure(fast == kendall_pairs(&a, &b), format!("Kendall mismatch on matrix {k}"))?;
    }
    let mut worst_p = 0.0f64;
    for seed in 0..5u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (n, c, l) = (30, 2, 4);
        let values: Vec<f64> = (0..n * c * l).map(|i| r.gen_range(-1.0..1.0) * (1 + i % 5) as f64).collect();
        let ds = MtsDataset::new(n, c, l, values, None).map_err(|e| e.to_string())?;
        let dims = 3;
        let pca = pca_project(&[&ds], dims).map_err(|e| e.to_string())?;
        let d = c * l;
        let x = DMatrix::from_fn(n, d, |i, j| ds.instance(i)[j]);
        let mean = x.row_mean();
        let mut cov = DMatrix::zeros(d, d);
        for row in x.row_iter() {
            let centred = row - &mean;
            cov += centred.transpose() * &centred;
        }
        cov /= (n - 1) as f64;
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(|p, q| q.total_cmp(p));
        let pts = &pca.points[0];
        for k in 0..dims {
            let col = pts.column(k);
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let gap = (var - eig[k]).abs();
            ensure(gap <= 1e-8, format!("PCA component {k} variance off by {gap:e}"))?;
            worst_p = worst_p.max(gap);
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("Wasserstein max gap {worst_w:.1e}, Kendall exact on 50, PCA max gap {worst_p:.1e}"))
}

// ---------------------------------------------------------------- 3 and 4

fn toy_directions(results: &[cosci::cli::experiments::ToyVariantResult], elapsed: Duration) -> (Check, Check) {
    let mut c3 = Vec::new();
    let mut c4 = Vec::new();
    let mut fail3 = Vec::new();
    let mut fail4 = Vec::new();
    for r in results {
        let name = r.variant.name();
        let aed = (r.median_of(true, |x| x.aed), r.median_of(false, |x| x.aed));
        let awd = (r.median_of(true, |x| x.awd), r.median_of(false, |x| x.awd));
        let ok3 = aed.0 < aed.1 && awd.1 <= awd.0;
        c3.push(format!("{name} AED {:.4}<{:.4} AWD {:.4}<={:.4}", aed.0, aed.1, awd.1, awd.0));
        if !ok3 {
            fail3.push(name);
        }
        let wins = r
            .pairs()
            .iter()
            .filter(|(no, cd)| {
                let (a, b) = (no.similarity, cd.similarity);
                b.mae < a.mae && b.frobenius < a.frobenius && b.spearman > a.spearman && b.kendall > a.kendall
            })
            .count();
        c4.push(format!("{name} {wins}/{}", r.pairs().len()));
        if wins < 4 {
            fail4.push(name);
        }
    }
    let slow = elapsed > Duration::from_secs(30 * 60);
    let c3 = if fail3.is_empty() && !slow {
        Ok(c3.join("; "))
    } else {
        Err(format!("{} (failed: {fail3:?}, {:.0}s)", c3.join("; "), elapsed.as_secs_f64()))
    };
    let c4 = if fail4.is_empty() {
        Ok(format!("seeds winning all four metrics: {}", c4.join(", ")))
    } else {
        Err(format!("seeds winning all four metrics: {} (failed: {fail4:?})", c4.join(", ")))
    };
    (c3, c4)
}

// ---------------------------------------------------------------- 5

fn ground_truth() -> Check {
    let start = Instant::now();
    let (data, _) = generate_toy(&ToySpec {
        variant: ToyVariant::SimpleSine,
        n_per_type: 1024,
        ..ToySpec::default()
    })
    .map_err(|e| e.to_string())?;
    let amps = amplitudes(&data);
    let mut parts = Vec::new();
    for (pt, range, mu) in [(1, 0..1024, 0.4), (2, 1024..2048, 0.6)] {
        for (c, ch) in amps.iter().enumerate() {
            let v = &ch[range.clone()];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            ensure((mean - mu).abs() <= 0.01, format!("type {pt} channel {c}: mean {mean:.4}"))?;
            ensure((sd - 0.05).abs() <= 0.01, format!("type {pt} channel {c}: sd {sd:.4}"))?;
            parts.push(format!("pt{pt}/ch{c} {mean:.3}±{sd:.3}"));
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------- 6

fn blink_utility() -> Check {
    let start = Instant::now();
    let exp = BlinkExperiment::desk();
    let real = BlinkTask::default().build().map_err(|e| e.to_string())?;
    let table = run_table3(&exp, &real, 0).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    for protocol in [Protocol::Trtf, Protocol::Tftr] {
        let cd = table.get(protocol, Method::CosciCd).ok_or("missing report")?;
        let no = table.get(protocol, Method::CosciNoCd).ok_or("missing report")?;
        let wins = cd.accuracies.iter().zip(&no.accuracies).filter(|(a, b)| a > b).count();
        parts.push(format!("{protocol:?} {:.3} vs {:.3}, {wins}/5", cd.mean, no.mean));
        if wins < 4 {
            failed.push(format!("{protocol:?}"));
        }
    }
    let reports = run_all_synthetic(&real, &[Method::CosciCd, Method::Baseline], &exp.gan, &[4, 5], &exp.utility(0))
        .map_err(|e| e.to_string())?;
    for k in [4, 5] {
        let med = |m: Method| {
            reports
                .iter()
                .find(|r| r.method == m && r.n_channels == k)
                .map(|r| median(&r.accuracies))
                .unwrap_or(f64::NAN)
        };
        let (cd, base) = (med(Method::CosciCd), med(Method::Baseline));
        parts.push(format!("all-synthetic {k}ch {cd:.3} vs {base:.3}"));
        if !(cd >= base) {
            failed.push(format!("all-synthetic {k}ch"));
        }
    }
    let slow = start.elapsed() > Duration::from_secs(60 * 60);
    if failed.is_empty() && !slow {
        Ok(parts.join("; "))
    } else {
        Err(format!("{} (failed: {failed:?}, {:.0}s)", parts.join("; "), start.elapsed().as_secs_f64()))
    }
}

// ---------------------------------------------------------------- 7

#[derive(Default)]
struct Recorder {
    /// `rows[channel][instance]`
    rows: Vec<Vec<Option<Vec<f64>>>>,
}

impl NoiseProbe for Recorder {
    fn record(&mut self, first: usize, channel: usize, noise: ArrayView2<f64>) {
        if self.rows.len() <= channel {
            self.rows.resize(channel + 1, Vec::new());
        }
        let rows = &mut self.rows[channel];
        for (k, row) in noise.outer_iter().enumerate() {
            let i = first + k;
            if rows.len() <= i {
                rows.resize(i + 1, None);
            }
            assert!(rows[i].is_none(), "instance {i} of channel {channel} drawn twice");
            rows[i] = Some(row.to_vec());
        }
    }
}

fn three_channel_data() -> MtsDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, c, l) = (40, 3, 16);
    let values: Vec<f64> = (0..n)
        .flat_map(|_| {
            let a: f64 = rng.gen_range(0.3..0.7);
            (0..c).flat_map(move |ch| (0..l).map(move |t| a * ((t as f64) * 0.4 + ch as f64).sin()))
        })
        .collect();
    MtsDataset::new(n, c, l, values, None).unwrap()
}

fn noise_and_gamma() -> Check {
    let start = Instant::now();
    let data = three_channel_data();
    let cfg = CosciConfig {
        n_epochs: 2,
        g_hidden: 6,
        d_hidden: 6,
        cd_hidden: 6,
        lld_widths: vec![12, 8],
        noise_len: 5,
        seed: 9,
        ..CosciConfig::desk()
    };
    let mut model = CosciModel::for_data(&cfg, &data).map_err(|e| e.to_string())?;
    model.train(&data).map_err(|e| e.to_string())?;
    let n = 300;
    let mut rec = Recorder::default();
    let probed = model.sample_probed(n, 4, Some(&mut rec)).map_err(|e| e.to_string())?;
    ensure(probed == model.sample(n, 4).map_err(|e| e.to_string())?, "probing changed the samples")?;
    ensure(rec.rows.len() == 3, "not every channel was probed")?;
    for i in 0..n {
        let first = rec.rows[0].get(i).cloned().flatten().ok_or(format!("instance {i} missing"))?;
        for ch in 1..3 {
            ensure(rec.rows[ch].get(i).cloned().flatten().as_ref() == Some(&first), format!("instance {i} channel {ch} saw other noise"))?;
        }
    }
    let distinct = (1..n).all(|i| rec.rows[0][i] != rec.rows[0][i - 1]);
    ensure(distinct, "consecutive instances share noise")?;

    let train = |gamma: f64| -> std::result::Result<(Vec<Vec<f64>>, MtsDataset), String> {
        let c = CosciConfig { with_cd: false, gamma, ..cfg.clone() };
        let mut m = CosciModel::for_data(&c, &data).map_err(|e| e.to_string())?;
        m.train(&data).map_err(|e| e.to_string())?;
        let params = (0..3)
            .flat_map(|i| [m.generator_params(i).flat_values(), m.discriminator_params(i).flat_values()])
            .collect();
        Ok((params, m.sample(64, 1).map_err(|e| e.to_string())?))
    };
    let (pa, sa) = train(0.0)?;
    let (pb, sb) = train(50.0)?;
    let bitwise = pa.iter().flatten().zip(pb.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(bitwise && sa == sb, "without CD, gamma changed the trained parameters")?;
    within(start, Duration::from_secs(5 * 60))?;
    Ok(format!("{n} instances x 3 channels share one noise row; gamma 0 vs 50 bitwise equal"))
}

// ---------------------------------------------------------------- 8

fn invoke(args: &[&str], out: &Path) -> std::result::Result<cosci::cli::Manifest, String> {
    let mut argv = vec!["cosci"];
    argv.extend_from_slice(args);
    let out_s = out.to_str().unwrap().to_string();
    argv.extend_from_slice(&["--out", &out_s]);
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    run(&cli).map_err(|e| e.to_string())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let tiny_gan = r#"{"nepochs": 2, "g_hidden": 6, "d_hidden": 6, "cd_hidden": 6, "lld_widths": [12, 8], "noise_len": 6}"#;
    std::fs::write(p("gan.json"), tiny_gan).unwrap();
    std::fs::write(
        p("toy.json"),
        format!(r#"{{"toy": {{"n_per_type": 12, "length": 60}}, "gan": {tiny_gan}, "repeats": 2, "variants": ["SimpleSine", "Anomaly"]}}"#),
    )
    .unwrap();
    std::fs::write(
        p("blink.json"),
        format!(
            r#"{{"task": {{"fixture": {{"n_events": 24}}}}, "gan": {tiny_gan}, "classifier": {{"hidden_dim": 6, "epochs": 2}}, "repeats": 2, "channel_counts": [2], "ratios": [[1, 1]]}}"#
        ),
    )
    .unwrap();
    std::fs::write(p("gentoy.json"), r#"{"n_per_type": 16, "length": 60}"#).unwrap();

    let mut checked = 0;
    for round in 0..2 {
        let r = |name: &str| dir.path().join(format!("{name}{round}"));
        let toy = r("toy");
        let s = |path: &Path| path.to_str().unwrap().to_string();
        let cfg = |name: &str| s(&p(name));
        let runs: Vec<(String, Vec<String>)> = vec![
            ("toy".into(), vec!["gen-toy".into(), "--desk-scale".into(), "--config".into(), cfg("gentoy.json"), "--seed".into(), "3".into()]),
            ("train".into(), vec!["train".into(), "--desk-scale".into(), "--config".into(), cfg("gan.json"), "--data".into(), s(&toy.join("data.csv"))]),
            ("base".into(), vec!["train-baseline".into(), "--desk-scale".into(), "--config".into(), cfg("gan.json"), "--data".into(), s(&toy.join("data.csv"))]),
            ("sample".into(), vec!["sample".into(), "--checkpoint".into(), s(&r("train").join("checkpoint.json")), "--n".into(), "40".into(), "--seed".into(), "2".into()]),
            ("eval".into(), vec!["eval".into(), "--real".into(), s(&toy.join("data.csv")), "--synthetic".into(), s(&r("sample").join("samples.csv"))]),
            ("t1".into(), vec!["repro-table1".into(), "--desk-scale".into(), "--config".into(), cfg("toy.json")]),
            ("t2".into(), vec!["repro-table2".into(), "--desk-scale".into(), "--config".into(), cfg("toy.json")]),
            ("t3".into(), vec!["repro-table3".into(), "--desk-scale".into(), "--config".into(), cfg("blink.json")]),
            ("bench".into(), vec!["bench".into(), "--desk-scale".into(), "--config".into(), cfg("blink.json")]),
        ];
        for (name, args) in runs {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            invoke(&args, &r(&name)).map_err(|e| format!("{}: {e}", args[0]))?;
        }
        checked = 9;
    }
    let names = ["toy", "train", "base", "sample", "eval", "t1", "t2", "t3", "bench"];
    for name in names {
        let read = |round: u8| -> cosci::cli::Manifest {
            let text = std::fs::read_to_string(dir.path().join(format!("{name}{round}")).join("manifest.json")).unwrap();
            serde_json::from_str(&text).unwrap()
        };
        let (a, b) = (read(0), read(1));
        ensure(a.config_sha256 == b.config_sha256, format!("{name}: config hash differs"))?;
        for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
            // the sample command records its checkpoint's digest, which is itself an artifact of train
            ensure(x.sha256 == y.sha256, format!("{name}: {} differs between runs", x.path))?;
        }
        ensure(a.artifacts.len() == b.artifacts.len(), format!("{name}: artifact lists differ"))?;
    }
    Ok(format!("{checked} commands, every artifact hash identical across two runs"))
}

fn main() {
    // the harness may be probed for a test list
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut failures = 0;
    let mut report = |id: u8, name: &str, result: Check, took: Duration| {
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id} [{tag}] {name} ({:.1}s): {detail}", took.as_secs_f64());
    };
    let guarded = |f: &dyn Fn() -> Check| -> Check {
        catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        })
    };

    let t = Instant::now();
    report(1, "gradient correctness", guarded(&gradients), t.elapsed());
    let t = Instant::now();
    report(2, "metric oracles", guarded(&metric_oracles), t.elapsed());

    let t = Instant::now();
    let toy = catch_unwind(|| run_toy_experiment(&ToyExperiment::desk(), 0));
    let took = t.elapsed();
    match toy {
        Ok(Ok(results)) => {
            let (c3, c4) = toy_directions(&results, took);
            report(3, "AWD/AED direction", c3, took);
            report(4, "correlation-matrix direction", c4, took);
        }
        Ok(Err(e)) => {
            report(3, "AWD/AED direction", Err(e.to_string()), took);
            report(4, "correlation-matrix direction", Err(e.to_string()), took);
        }
        Err(_) => {
            report(3, "AWD/AED direction", Err("panicked".into()), took);
            report(4, "correlation-matrix direction", Err("panicked".into()), took);
        }
    }

    let t = Instant::now();
    report(5, "toy ground-truth recovery", guarded(&ground_truth), t.elapsed());
    let t = Instant::now();
    report(6, "classification utility direction", guarded(&blink_utility), t.elapsed());
    let t = Instant::now();
    report(7, "shared noise and gamma independence", guarded(&noise_and_gamma), t.elapsed());
    let t = Instant::now();
    report(8, "determinism", guarded(&determinism), t.elapsed());

    if failures > 0 {
        println!("acceptance: {failures} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}
