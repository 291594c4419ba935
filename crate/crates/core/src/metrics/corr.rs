use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::features::{FeatureBank, FEATURE_NAMES, N_FEATURES};
use crate::dataset::MtsDataset;
use crate::error::{Error, Result};

/// Cross-channel feature correlations: entry `(f, g)` is the Pearson
/// correlation across instances between feature `f` of `channels.0` and
/// feature `g` of `channels.1`, over the kept features only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrMatrix {
    pub feature_names: Vec<String>,
    /// Indices into [`FEATURE_NAMES`] of the kept features.
    pub kept: Vec<usize>,
    pub dropped: Vec<String>,
    pub channels: (usize, usize),
    pub values: Array2<f64>,
    /// Entries whose correlation was undefined (zero variance) and set to 0.
    pub undefined: Vec<(usize, usize)>,
}

fn feature_table(data: &MtsDataset, channel: usize) -> Array2<f64> {
    let bank = FeatureBank::new(data.length());
    let mut out = Array2::zeros((data.n_instances(), N_FEATURES));
    for i in 0..data.n_instances() {
        let f = bank.extract(data.series(i, channel));
        out.row_mut(i).iter_mut().zip(f).for_each(|(o, v)| *o = v);
    }
    out
}

fn is_constant(col: ndarray::ArrayView1<f64>) -> bool {
    let first = col[0];
    col.iter().all(|&v| v == first)
}

fn check_inputs(data: &MtsDataset, a: usize, b: usize) -> Result<()> {
    if data.n_instances() < 3 {
        return Err(Error::Shape(format!(
            "feature correlations need at least 3 instances, got {}",
            data.n_instances()
        )));
    }
    if data.length() < 8 {
        return Err(Error::Shape("feature bank needs series of length >= 8".into()));
    }
    let c = data.n_channels();
    if a >= c || b >= c {
        return Err(Error::Shape(format!("channel pair ({a}, {b}) out of range for {c} channels")));
    }
    Ok(())
}

/// Correlation matrix with features dropped when constant across instances
/// on either channel of `data`; the kept list can then be applied to other
/// datasets through [`feature_corr_matrix_with`].
pub fn feature_corr_matrix(data: &MtsDataset, channel_a: usize, channel_b: usize) -> Result<FeatureCorrMatrix> {
    check_inputs(data, channel_a, channel_b)?;
    let fa = feature_table(data, channel_a);
    let fb = feature_table(data, channel_b);
    let kept: Vec<usize> = (0..N_FEATURES)
        .filter(|&f| !is_constant(fa.column(f)) && !is_constant(fb.column(f)))
        .collect();
    build(&fa, &fb, kept, (channel_a, channel_b))
}

/// Correlation matrix over a fixed kept-feature list.
pub fn feature_corr_matrix_with(
    data: &MtsDataset,
    channel_a: usize,
    channel_b: usize,
    kept: &[usize],
) -> Result<FeatureCorrMatrix> {
    check_inputs(data, channel_a, channel_b)?;
    if kept.iter().any(|&f| f >= N_FEATURES) {
        return Err(Error::Shape("kept feature index out of range".into()));
    }
    let fa = feature_table(data, channel_a);
    let fb = feature_table(data, channel_b);
    build(&fa, &fb, kept.to_vec(), (channel_a, channel_b))
}

fn standardize(col: ndarray::ArrayView1<f64>) -> Option<Vec<f64>> {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let dev: Vec<f64> = col.iter().map(|v| v - mean).collect();
    let ss = dev.iter().map(|d| d * d).sum::<f64>();
    if ss == 0.0 || is_constant(col) {
        return None;
    }
    let norm = ss.sqrt();
    Some(dev.into_iter().map(|d| d / norm).collect())
}

fn build(fa: &Array2<f64>, fb: &Array2<f64>, kept: Vec<usize>, channels: (usize, usize)) -> Result<FeatureCorrMatrix> {
    if kept.len() < 2 {
        return Err(Error::Data(format!(
            "only {} features vary across instances; at least 2 are needed",
            kept.len()
        )));
    }
    let za: Vec<Option<Vec<f64>>> = kept.iter().map(|&f| standardize(fa.column(f))).collect();
    let zb: Vec<Option<Vec<f64>>> = kept.iter().map(|&f| standardize(fb.column(f))).collect();
    let k = kept.len();
    let mut values = Array2::zeros((k, k));
    let mut undefined = Vec::new();
    for r in 0..k {
        for c in 0..k {
            match (&za[r], &zb[c]) {
                (Some(x), Some(y)) => {
                    let v: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                    values[(r, c)] = v.clamp(-1.0, 1.0);
                }
                _ => undefined.push((r, c)),
            }
        }
    }
    Ok(FeatureCorrMatrix {
        feature_names: kept.iter().map(|&f| FEATURE_NAMES[f].to_string()).collect(),
        dropped: (0..N_FEATURES)
            .filter(|f| !kept.contains(f))
            .map(|f| FEATURE_NAMES[f].to_string())
            .collect(),
        kept,
        channels,
        values,
        undefined,
    })
}

/// Agreement between a real and a synthetic correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSimilarity {
    pub mae: f64,
    pub frobenius: f64,
    pub spearman: f64,
    pub kendall: f64,
}

/// MAE and Frobenius norm of the difference, and rank correlations of the
/// row-major flattened entries. Undefined rank correlations (a constant
/// matrix) are reported as 0.
pub fn matrix_similarity(real: &FeatureCorrMatrix, synth: &FeatureCorrMatrix) -> Result<MatrixSimilarity> {
    if real.kept != synth.kept || real.values.dim() != synth.values.dim() {
        return Err(Error::Shape(format!(
            "feature lists differ: {:?} vs {:?}",
            real.feature_names, synth.feature_names
        )));
    }
    let a: Vec<f64> = real.values.iter().copied().collect();
    let b: Vec<f64> = synth.values.iter().copied().collect();
    let n = a.len() as f64;
    let mae = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let frobenius = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(MatrixSimilarity {
        mae,
        frobenius,
        spearman: spearman_rho(&a, &b).unwrap_or(0.0),
        kendall: kendall_tau_b(&a, &b).unwrap_or(0.0),
    })
}

/// Average ranks (1-based), ties sharing their mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut s = 0;
    while s < order.len() {
        let mut e = s;
        while e + 1 < order.len() && x[order[e + 1]] == x[order[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        for &i in &order[s..=e] {
            r[i] = avg;
        }
        s = e + 1;
    }
    r
}

/// Spearman's rho with tie-averaged ranks; `None` when either side is constant.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

/// Counts tied pairs in a sorted sequence of runs.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Merge sort counting inversions (strictly decreasing pairs).
fn sort_count_swaps(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], buf) + sort_count_swaps(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm); `None` when either
/// side is constant.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as u64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let n0 = n * n.saturating_sub(1) / 2;
    let n1 = tied_pairs(order.iter().map(|&i| a[i].to_bits()));
    let n3 = tied_pairs(order.iter().map(|&i| (a[i].to_bits(), b[i].to_bits())));
    let mut ys: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(ys.iter().map(|y| y.to_bits()));
    if n0 == n1 || n0 == n2 {
        return None;
    }
    // concordant - discordant
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Some(s as f64 / (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kendall_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let (mut conc, mut disc, mut tie_a, mut tie_b) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let da = a[i] - a[j];
                let db = b[i] - b[j];
                if da == 0.0 {
                    tie_a += 1;
                }
                if db == 0.0 {
                    tie_b += 1;
                }
                if da * db > 0.0 {
                    conc += 1;
                } else if da * db < 0.0 {
                    disc += 1;
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as i64;
        (conc - disc) as f64 / (((n0 - tie_a) as f64) * ((n0 - tie_b) as f64)).sqrt()
    }

    #[test]
    fn kendall_matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            // coarse values force ties
            let a: Vec<f64> = (0..16).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let b: Vec<f64> = (0..16).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            assert_eq!(kendall_tau_b(&a, &b).unwrap(), kendall_oracle(&a, &b));
        }
    }

    fn matrix(values: Array2<f64>) -> FeatureCorrMatrix {
        let k = values.nrows();
        FeatureCorrMatrix {
            feature_names: FEATURE_NAMES[..k].iter().map(|s| s.to_string()).collect(),
            kept: (0..k).collect(),
            dropped: vec![],
            channels: (0, 1),
            values,
            undefined: vec![],
        }
    }

    #[test]
    fn similarity_of_identical_and_negated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Array2::from_shape_simple_fn((4, 4), || rng.gen_range(-1.0..1.0));
        let s = matrix_similarity(&matrix(m.clone()), &matrix(m.clone())).unwrap();
        assert_eq!((s.mae, s.frobenius), (0.0, 0.0));
        assert!((s.spearman - 1.0).abs() < 1e-12 && (s.kendall - 1.0).abs() < 1e-12);
        let s = matrix_similarity(&matrix(m.clone()), &matrix(-&m)).unwrap();
        assert!((s.spearman + 1.0).abs() < 1e-12 && (s.kendall + 1.0).abs() < 1e-12);
        let other = matrix(Array2::zeros((3, 3)));
        assert!(matrix_similarity(&matrix(m), &other).is_err());
    }

    fn dataset(n: usize, scale: f64) -> MtsDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nested: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| {
                let f = rng.gen_range(0.02..0.2);
                let a = rng.gen_range(0.5..2.0);
                let trend = rng.gen_range(-0.01..0.01);
                let x: Vec<f64> = (0..64)
                    .map(|t| a * (2.0 * std::f64::consts::PI * f * t as f64).sin() + trend * t as f64 + rng.gen_range(-0.3..0.3))
                    .collect();
                let y = x.iter().map(|v| scale * v).collect();
                vec![x, y]
            })
            .collect();
        MtsDataset::from_nested(&nested, None).unwrap()
    }

    #[test]
    fn self_matrix_has_unit_diagonal() {
        let ds = dataset(30, 1.0);
        let m = feature_corr_matrix(&ds, 0, 0).unwrap();
        for k in 0..m.kept.len() {
            assert!((m.values[(k, k)] - 1.0).abs() < 1e-12);
        }
        assert!(m.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn doubled_channel_reproduces_self_correlation() {
        let ds = dataset(30, 2.0);
        let cross = feature_corr_matrix(&ds, 1, 0).unwrap();
        let own = feature_corr_matrix_with(&ds, 0, 0, &cross.kept).unwrap();
        for (x, y) in cross.values.iter().zip(own.values.iter()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn drop_list_comes_from_reference() {
        // every series shares one frequency, so that feature is constant
        let nested: Vec<Vec<Vec<f64>>> = (0..10)
            .map(|i| {
                let a = 0.5 + 0.1 * i as f64;
                let s: Vec<f64> = (0..40).map(|t| a * (t as f64 * std::f64::consts::PI / 5.0).sin() + 0.01 * ((t * i) % 7) as f64).collect();
                vec![s.clone(), s]
            })
            .collect();
        let real = MtsDataset::from_nested(&nested, None).unwrap();
        let m = feature_corr_matrix(&real, 0, 1).unwrap();
        assert!(m.dropped.contains(&"dominant_frequency".to_string()));
        let constant = MtsDataset::new(3, 2, 40, vec![1.0; 240], None).unwrap();
        let s = feature_corr_matrix_with(&constant, 0, 1, &m.kept).unwrap();
        assert_eq!(s.undefined.len(), m.kept.len() * m.kept.len());
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(feature_corr_matrix(&constant, 0, 1).is_err());
    }
}
