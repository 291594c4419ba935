use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::MtsDataset;
use crate::error::{Error, Result};

/// PCA basis fitted on the first (real) set and every set's projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// Unit components, one per row, by descending eigenvalue.
    pub components: Array2<f64>,
    /// Sample-covariance eigenvalues of the components.
    pub eigenvalues: Vec<f64>,
    /// One `N_k x dims` matrix per input set.
    pub points: Vec<Array2<f64>>,
}

fn check_sets(sets: &[&MtsDataset]) -> Result<()> {
    let first = sets.first().ok_or_else(|| Error::Shape("no datasets to embed".into()))?;
    if sets
        .iter()
        .any(|s| s.n_channels() != first.n_channels() || s.length() != first.length())
    {
        return Err(Error::Shape("all sets must share channel count and length".into()));
    }
    Ok(())
}

fn flatten(ds: &MtsDataset) -> DMatrix<f64> {
    let w = ds.n_channels() * ds.length();
    DMatrix::from_row_slice(ds.n_instances(), w, ds.values())
}

/// Projects every set onto the top `dims` principal components of the first set.
/// Each component's sign makes its largest-magnitude coordinate positive.
pub fn pca_project(sets: &[&MtsDataset], dims: usize) -> Result<PcaProjection> {
    check_sets(sets)?;
    let real = flatten(sets[0]);
    let (n, d) = real.shape();
    if n < 3 {
        return Err(Error::Shape(format!("PCA needs at least 3 instances, got {n}")));
    }
    if dims == 0 || dims > d.min(n - 1) {
        return Err(Error::Config(format!("cannot extract {dims} components from {n}x{d} data")));
    }
    let mean = real.row_mean();
    let mut centred = real.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let scale = 1.0 / (n as f64 - 1.0);
    // eigen-decompose whichever of the covariance and Gram matrices is smaller
    let (vals, vecs) = if d <= n {
        let eig = SymmetricEigen::new(centred.transpose() * &centred * scale);
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        let eig = SymmetricEigen::new(&centred * centred.transpose() * scale);
        let mut v = centred.transpose() * eig.eigenvectors;
        for mut col in v.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        (eig.eigenvalues, v)
    };
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut components = Array2::zeros((dims, d));
    let mut eigenvalues = Vec::with_capacity(dims);
    for (k, &j) in order.iter().take(dims).enumerate() {
        let col = vecs.column(j);
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if v.abs() > col[b].abs() { i } else { b });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[(k, i)] = sign * col[i];
        }
        eigenvalues.push(vals[j]);
    }
    let mean: Vec<f64> = mean.iter().copied().collect();
    let points = sets
        .iter()
        .map(|s| {
            let x = flatten(s);
            let mut out = Array2::zeros((x.nrows(), dims));
            for (r, row) in x.row_iter().enumerate() {
                for k in 0..dims {
                    out[(r, k)] = (0..d).map(|i| (row[i] - mean[i]) * components[(k, i)]).sum();
                }
            }
            out
        })
        .collect();
    Ok(PcaProjection {
        mean,
        components,
        eigenvalues,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// `None` picks `max(N / (4 * exaggeration), 50)`.
    pub learning_rate: Option<f64>,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: None,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

/// Row-stochastic conditional affinities `p_{j|i}` from squared distances,
/// each row calibrated by bisection so its entropy equals `ln(perplexity)`.
/// Returns the affinities and the per-row precisions.
pub fn conditional_probabilities(dist2: &Array2<f64>, perplexity: f64) -> (Array2<f64>, Vec<f64>) {
    let n = dist2.nrows();
    let target = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    let mut betas = vec![1.0; n];
    for i in 0..n {
        let row = dist2.row(i);
        let dmin = (0..n).filter(|&j| j != i).map(|j| row[j]).fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut probs = vec![0.0; n];
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                probs[j] = if j == i { 0.0 } else { (-(row[j] - dmin) * beta).exp() };
                sum += probs[j];
            }
            let mut h = 0.0;
            for j in 0..n {
                probs[j] /= sum;
                if probs[j] > 0.0 {
                    h -= probs[j] * probs[j].ln();
                }
            }
            let diff = h - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        betas[i] = beta;
        p.row_mut(i).iter_mut().zip(&probs).for_each(|(o, &v)| *o = v);
    }
    (p, betas)
}

/// Exact t-SNE of the pooled, flattened sets; one `N_k x 2` matrix per set.
pub fn tsne_embed(sets: &[&MtsDataset], config: &TsneConfig) -> Result<Vec<Array2<f64>>> {
    check_sets(sets)?;
    let rows: Vec<&[f64]> = sets
        .iter()
        .flat_map(|s| (0..s.n_instances()).map(move |i| s.instance(i)))
        .collect();
    let n = rows.len();
    if !(config.perplexity > 0.0) || (n as f64) < 3.0 * config.perplexity {
        return Err(Error::Config(format!(
            "perplexity {} infeasible for {n} points (need at least 3x perplexity)",
            config.perplexity
        )));
    }
    let mut dist2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b).powi(2)).sum();
            dist2[(i, j)] = d;
            dist2[(j, i)] = d;
        }
    }
    let (cond, _) = conditional_probabilities(&dist2, config.perplexity);
    let mut p = &cond + &cond.t();
    p /= 2.0 * n as f64;
    p.mapv_inplace(|v| v.max(1e-12));

    let lr = config
        .learning_rate
        .unwrap_or_else(|| (n as f64 / (4.0 * config.exaggeration)).max(50.0));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Array2::from_shape_simple_fn((n, 2), || init.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut num = Array2::<f64>::zeros((n, n));
    for iter in 0..config.iterations {
        let exaggerate = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.exaggeration_iters { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[(i, 0)] - y[(j, 0)];
                let dy = y[(i, 1)] - y[(j, 1)];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[(i, j)] = q;
                num[(j, i)] = q;
                z += 2.0 * q;
            }
        }
        let mut grad = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[(i, j)];
                let w = (exaggerate * p[(i, j)] - q / z) * q;
                gx += w * (y[(i, 0)] - y[(j, 0)]);
                gy += w * (y[(i, 1)] - y[(j, 1)]);
            }
            grad[(i, 0)] = 4.0 * gx;
            grad[(i, 1)] = 4.0 * gy;
        }
        for ((g, v), gain) in grad.iter().zip(velocity.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*v > 0.0) { *gain + 0.2 } else { (*gain * 0.8).max(0.01) };
            *v = momentum * *v - lr * *gain * g;
        }
        y += &velocity;
        let means = y.mean_axis(ndarray::Axis(0)).expect("nonempty");
        y -= &means;
    }
    let mut out = Vec::with_capacity(sets.len());
    let mut start = 0;
    for s in sets {
        let k = s.n_instances();
        out.push(y.slice(ndarray::s![start..start + k, ..]).to_owned());
        start += k;
    }
    Ok(out)
}
