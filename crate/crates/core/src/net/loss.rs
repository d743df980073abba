//! Metric-learning and classification losses over embedding sets.

use crate::error::{Error, Result};
use crate::net::pool::EmbeddingSet;

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Batch-all triplet loss. Per strip, averages
/// max(0, d(a,p) - d(a,n) + margin) over every ordered triplet with
/// label(a) == label(p), a != p, label(n) != label(a); the per-strip means
/// are then averaged. Distances are Euclidean, accumulated in f64.
pub fn triplet_loss(set: &EmbeddingSet, margin: f64) -> Result<f64> {
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::InvalidParam(format!(
            "triplet margin must be finite and nonnegative, got {margin}"
        )));
    }
    let n = set.len();
    if set.labels.len() != n {
        return Err(Error::shape(
            "triplet_loss",
            format!("{} embeddings but {} labels", n, set.labels.len()),
        ));
    }
    let mut strip_sum = 0.0f64;
    let mut triplet_count = 0usize;
    for strip in 0..set.strips {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for a in 0..n {
            for p in 0..n {
                if p == a || set.labels[p] != set.labels[a] {
                    continue;
                }
                let d_ap = euclidean(&set.embeddings[a][strip], &set.embeddings[p][strip]);
                for neg in 0..n {
                    if set.labels[neg] == set.labels[a] {
                        continue;
                    }
                    let d_an = euclidean(&set.embeddings[a][strip], &set.embeddings[neg][strip]);
                    sum += (d_ap - d_an + margin).max(0.0);
                    count += 1;
                }
            }
        }
        if count > 0 {
            strip_sum += sum / count as f64;
        }
        triplet_count = count;
    }
    // the triplet structure is label-only, so every strip sees the same count
    if triplet_count == 0 {
        return Err(Error::NoValidTriplet);
    }
    Ok(strip_sum / set.strips as f64)
}

/// Mean over samples of -log softmax(logits)[label], computed with
/// max-subtraction so large logits cannot overflow the exponentials.
pub fn cross_entropy(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(Error::shape(
            "cross_entropy",
            format!("{} logit rows but {} labels", logits.len(), labels.len()),
        ));
    }
    if logits.is_empty() {
        return Err(Error::shape("cross_entropy", "empty batch"));
    }
    let classes = logits[0].len();
    if classes == 0 {
        return Err(Error::shape("cross_entropy", "zero classes"));
    }
    let mut total = 0.0f64;
    for (row, &label) in logits.iter().zip(labels) {
        if row.len() != classes {
            return Err(Error::shape(
                "cross_entropy",
                format!("ragged logits: row has {} entries, expected {classes}", row.len()),
            ));
        }
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidParam("non-finite logit".into()));
        }
        let log_sum: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += log_sum - (row[label] - max);
    }
    Ok(total / logits.len() as f64)
}
