use super::MtsDataset;
use crate::error::{Error, Result};

/// Replaces outliers (|z| > threshold, statistics pooled per channel over all
/// instances and steps) by linear interpolation between the nearest retained
/// neighbours of the same series. Shape is preserved.
pub fn zscore_filter(dataset: &MtsDataset, threshold: f64) -> Result<MtsDataset> {
    zscore_filter_counted(dataset, threshold).map(|(d, _)| d)
}

/// Same as [`zscore_filter`], also returning the number of replaced samples.
pub fn zscore_filter_counted(dataset: &MtsDataset, threshold: f64) -> Result<(MtsDataset, usize)> {
    if !(threshold > 0.0) {
        return Err(Error::Config(format!(
            "z-score threshold must be positive, got {threshold}"
        )));
    }
    let mut out = dataset.clone();
    let n = dataset.n_instances();
    let mut replaced = 0;
    for c in 0..dataset.n_channels() {
        let count = (n * dataset.length()) as f64;
        let mean = (0..n)
            .flat_map(|i| dataset.series(i, c))
            .sum::<f64>()
            / count;
        let var = (0..n)
            .flat_map(|i| dataset.series(i, c))
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / count;
        let sd = var.sqrt();
        if sd == 0.0 {
            continue;
        }
        for i in 0..n {
            let series = out.series_mut(i, c);
            let flagged: Vec<bool> = series
                .iter()
                .map(|v| ((v - mean) / sd).abs() > threshold)
                .collect();
            replaced += interpolate_flagged(series, &flagged);
        }
    }
    Ok((out, replaced))
}

/// Returns the number of samples rewritten. Series with no retained sample are left alone.
fn interpolate_flagged(series: &mut [f64], flagged: &[bool]) -> usize {
    let kept: Vec<usize> = (0..series.len()).filter(|&t| !flagged[t]).collect();
    if kept.is_empty() || kept.len() == series.len() {
        return 0;
    }
    let mut count = 0;
    let mut k = 0;
    for t in 0..series.len() {
        if !flagged[t] {
            continue;
        }
        while k < kept.len() && kept[k] < t {
            k += 1;
        }
        let left = k.checked_sub(1).map(|j| kept[j]);
        let right = kept.get(k).copied();
        series[t] = match (left, right) {
            (Some(a), Some(b)) => {
                let w = (t - a) as f64 / (b - a) as f64;
                series[a] + w * (series[b] - series[a])
            }
            (Some(a), None) => series[a],
            (None, Some(b)) => series[b],
            (None, None) => unreachable!(),
        };
        count += 1;
    }
    count
}

/// Half-open `[start, end)` interval of an annotated event inside one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub instance: usize,
    pub start: usize,
    pub end: usize,
}

fn overlaps(a_start: usize, a_end: usize, b_start: usize, b_end: usize) -> bool {
    a_start < b_end && b_start < a_end
}

/// Cuts balanced labeled frames: label 1 windows centred on each event
/// (with `margin` padding when it fits), label 0 windows found by a
/// left-to-right scan that keep `margin` clearance from every event.
pub fn extract_event_windows(
    dataset: &MtsDataset,
    events: &[Event],
    window: usize,
    margin: usize,
) -> Result<MtsDataset> {
    if window == 0 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let len = dataset.length();
    for e in events {
        if e.instance >= dataset.n_instances() || e.start >= e.end || e.end > len {
            return Err(Error::Config(format!("event {e:?} is out of bounds")));
        }
    }
    if window > len {
        return Err(Error::Config(format!(
            "window {window} exceeds series length {len}"
        )));
    }

    let mut positives = Vec::new();
    for e in events {
        if let Some(start) = place_positive(e, window, margin, len) {
            positives.push((e.instance, start));
        }
    }

    let mut negatives = Vec::new();
    'instances: for inst in 0..dataset.n_instances() {
        let mut blocked: Vec<(usize, usize)> = events
            .iter()
            .filter(|e| e.instance == inst)
            .map(|e| (e.start.saturating_sub(margin), e.end + margin))
            .collect();
        blocked.sort_unstable();
        let mut s = 0;
        while s + window <= len {
            if negatives.len() >= positives.len() {
                break 'instances;
            }
            match blocked
                .iter()
                .filter(|&&(b0, b1)| overlaps(s, s + window, b0, b1))
                .map(|&(_, b1)| b1)
                .max()
            {
                Some(next) => s = next,
                None => {
                    negatives.push((inst, s));
                    s += window;
                }
            }
        }
    }

    let n = positives.len().min(negatives.len());
    if n == 0 {
        return Err(Error::Data(
            "no balanced frames could be extracted from the events".into(),
        ));
    }
    positives.truncate(n);
    negatives.truncate(n);

    let c = dataset.n_channels();
    let mut values = Vec::with_capacity(2 * n * c * window);
    let mut labels = Vec::with_capacity(2 * n);
    for (label, frames) in [(1u8, &positives), (0u8, &negatives)] {
        for &(inst, start) in frames {
            for ch in 0..c {
                values.extend_from_slice(&dataset.series(inst, ch)[start..start + window]);
            }
            labels.push(label);
        }
    }
    MtsDataset::new(2 * n, c, window, values, Some(labels))
}

/// Window start for a positive frame: centred on the event, clamped so the
/// margins fit; falls back to merely containing the event when they cannot.
fn place_positive(e: &Event, window: usize, margin: usize, len: usize) -> Option<usize> {
    let centre = (e.start + e.end) / 2;
    let ideal = centre.saturating_sub(window / 2);
    let range = |pad: usize| -> Option<(usize, usize)> {
        let lo = (e.end + pad).saturating_sub(window);
        let hi = e.start.checked_sub(pad)?.min(len - window);
        (lo <= hi).then_some((lo, hi))
    };
    range(margin)
        .or_else(|| range(0))
        .map(|(lo, hi)| ideal.clamp(lo, hi))
}

/// Greedy forward selection: repeatedly adds the channel whose inclusion
/// maximises `scorer`, breaking ties towards the lowest channel index.
pub fn forward_select_channels<F>(dataset: &MtsDataset, k: usize, mut scorer: F) -> Result<Vec<usize>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let c = dataset.n_channels();
    if k == 0 || k > c {
        return Err(Error::Config(format!(
            "cannot select {k} of {c} channels"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..c).filter(|ch| !chosen.contains(ch)) {
            let mut subset = chosen.clone();
            subset.push(cand);
            let score = scorer(&subset)?;
            if best.map_or(true, |(_, b)| score > b) {
                best = Some((cand, score));
            }
        }
        let (ch, _) = best.expect("at least one candidate remains");
        chosen.push(ch);
    }
    Ok(chosen)
}
