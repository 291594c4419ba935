//! Fidelity metrics: amplitude-distribution Wasserstein distances (AWD),
//! distance to the equal-amplitude diagonal (AED), the feature bank with its
//! cross-channel correlation matrices and their similarity scores, and
//! PCA / t-SNE embeddings.

mod corr;
mod embed;
mod features;

pub use corr::{
    feature_corr_matrix, feature_corr_matrix_with, kendall_tau_b, matrix_similarity, spearman_rho,
    FeatureCorrMatrix, MatrixSimilarity,
};
pub use embed::{conditional_probabilities, pca_project, tsne_embed, PcaProjection, TsneConfig};
pub use features::{feature_vector, FeatureBank, FEATURE_NAMES, N_FEATURES};

use crate::dataset::MtsDataset;
use crate::error::{Error, Result};

/// Empirical 1-Wasserstein distance, the integral of `|F_a^-1 - F_b^-1|`
/// over the unit interval for the step quantile functions.
pub fn wasserstein1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("Wasserstein distance of an empty sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("Wasserstein distance of non-finite values".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == m {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64);
    }
    // quantile breakpoints in units of 1/(n*m): a steps at multiples of m, b at multiples of n
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0usize);
    let total = n * m;
    let mut acc = 0.0;
    while pos < total {
        let next = ((i + 1) * m).min((j + 1) * n);
        acc += (next - pos) as f64 * (a[i] - b[j]).abs();
        pos = next;
        if pos == (i + 1) * m {
            i += 1;
        }
        if pos == (j + 1) * n {
            j += 1;
        }
    }
    Ok(acc / total as f64)
}

/// `sqrt(2)` times the population standard deviation, exact for a sinusoid
/// sampled over whole periods.
pub fn estimate_amplitude(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    if series.len() < 2 {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (2.0 * var).sqrt()
}

/// Amplitude estimates indexed `[channel][instance]`.
pub fn amplitudes(data: &MtsDataset) -> Vec<Vec<f64>> {
    (0..data.n_channels())
        .map(|c| {
            (0..data.n_instances())
                .map(|i| estimate_amplitude(data.series(i, c)))
                .collect()
        })
        .collect()
}

/// Per-channel Wasserstein distance between real and synthetic amplitude distributions.
pub fn channel_wds(real: &MtsDataset, synth: &MtsDataset) -> Result<Vec<f64>> {
    if real.n_channels() != synth.n_channels() {
        return Err(Error::Shape(format!(
            "real data has {} channels, synthetic {}",
            real.n_channels(),
            synth.n_channels()
        )));
    }
    amplitudes(real)
        .iter()
        .zip(&amplitudes(synth))
        .map(|(r, s)| wasserstein1d(r, s))
        .collect()
}

/// Mean over channels of [`channel_wds`].
pub fn awd(real: &MtsDataset, synth: &MtsDataset) -> Result<f64> {
    let wds = channel_wds(real, synth)?;
    Ok(wds.iter().sum::<f64>() / wds.len() as f64)
}

/// Mean distance of the per-instance amplitude pairs to the line `y = x`.
pub fn aed(synth: &MtsDataset) -> Result<f64> {
    if synth.n_channels() != 2 {
        return Err(Error::Shape(format!(
            "AED needs exactly 2 channels, got {}",
            synth.n_channels()
        )));
    }
    let amps = amplitudes(synth);
    let n = synth.n_instances() as f64;
    Ok(amps[0]
        .iter()
        .zip(&amps[1])
        .map(|(a, b)| (a - b).abs() / std::f64::consts::SQRT_2)
        .sum::<f64>()
        / n)
}
