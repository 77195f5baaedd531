//! Multiple-negatives ranking loss and its exact gradients.
//!
//! For a batch of `n` (anchor, positive) unit vectors with similarity
//! scale `s`, the loss is the mean over rows of a softmax cross-entropy
//! where row `i`'s logits are `s * <a_i, p_j>` for all `j` and the target
//! is `j = i`. Every other positive in the batch acts as a negative for
//! row `i`, so no explicit negative mining is needed.

use crate::index::EmbeddingVector;

use super::TrainError;

/// Gradients of the loss with respect to each anchor and positive vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MnrGradients {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
}

fn check(
    anchors: &[EmbeddingVector],
    positives: &[EmbeddingVector],
) -> Result<usize, TrainError> {
    if anchors.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if anchors.len() != positives.len() {
        return Err(TrainError::LengthMismatch(anchors.len(), positives.len()));
    }
    let dim = anchors[0].dim();
    for v in anchors.iter().chain(positives) {
        if v.dim() != dim {
            return Err(TrainError::DimMismatch(dim, v.dim()));
        }
    }
    Ok(dim)
}

/// Row-stabilized softmax terms shared by the loss and the gradients:
/// per-row log-sum-exp and the full similarity matrix.
fn forward(
    anchors: &[EmbeddingVector],
    positives: &[EmbeddingVector],
    scale: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = anchors.len();
    let mut sims = vec![vec![0.0; n]; n];
    for (i, a) in anchors.iter().enumerate() {
        for (j, p) in positives.iter().enumerate() {
            sims[i][j] = scale * crate::index::dense::dot(a.values(), p.values());
        }
    }
    let mut lse = Vec::with_capacity(n);
    for row in &sims {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
        lse.push(m + sum.ln());
    }
    (sims, lse)
}

/// Mean in-batch softmax cross-entropy. A batch of one is trivially
/// separable and scores exactly zero.
pub fn mnr_loss(
    anchors: &[EmbeddingVector],
    positives: &[EmbeddingVector],
    scale: f64,
) -> Result<f64, TrainError> {
    let _ = check(anchors, positives)?;
    let n = anchors.len();
    let (sims, lse) = forward(anchors, positives, scale);
    let mut total = 0.0;
    for i in 0..n {
        total += lse[i] - sims[i][i];
    }
    Ok(total / n as f64)
}

/// Exact gradients of [`mnr_loss`] with respect to the anchor and positive
/// vectors:
///
/// `dL/da_i = (s/n) * sum_j (softmax_ij - [i==j]) * p_j`
/// `dL/dp_j = (s/n) * sum_i (softmax_ij - [i==j]) * a_i`
pub fn mnr_gradient(
    anchors: &[EmbeddingVector],
    positives: &[EmbeddingVector],
    scale: f64,
) -> Result<MnrGradients, TrainError> {
    let dim = check(anchors, positives)?;
    let n = anchors.len();
    let (sims, lse) = forward(anchors, positives, scale);

    // softmax_ij minus the identity, shared by both gradient sums.
    let mut delta = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            delta[i][j] = (sims[i][j] - lse[i]).exp() - if i == j { 1.0 } else { 0.0 };
        }
    }

    let factor = scale / n as f64;
    let mut d_anchors = vec![vec![0.0; dim]; n];
    let mut d_positives = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..n {
            let w = factor * delta[i][j];
            let p = positives[j].values();
            let a = anchors[i].values();
            for c in 0..dim {
                d_anchors[i][c] += w * p[c];
                d_positives[j][c] += w * a[c];
            }
        }
    }
    Ok(MnrGradients { anchors: d_anchors, positives: d_positives })
}
