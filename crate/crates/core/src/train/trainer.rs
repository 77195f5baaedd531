//! SGD training loop for the linear adapter.
//!
//! Anchor and positive sides share one matrix `W`. Each step projects the
//! frozen unit embeddings through `W`, renormalizes, evaluates the ranking
//! loss, and backpropagates through the normalization:
//!
//! `dL/dy = (g - a * <a, g>) / |y|` for `a = y / |y|`,
//!
//! accumulating `dL/dW += dL/dy * x^T` for both sides of every pair.
//! All sources of randomness derive from the configured seed, and the
//! batch order is re-derived identically each epoch, so training is fully
//! reproducible and a zero learning rate yields a perfectly flat loss
//! history.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::index::dense::{dot, EmbeddingVector};
use crate::index::{embed, EmbeddingProvider};
use crate::retrieve::passage_representation;

use super::{
    mnr_gradient, mnr_loss, AdapterMatrix, TrainConfig, TrainError, TrainingPair,
};

/// Salt separating the shuffle stream from the init stream.
const SHUFFLE_SALT: u64 = 0x5eed_5a1f_0000_0001;

/// What training returns: the adapter and the mean batch loss per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub adapter: AdapterMatrix,
    pub loss_history: Vec<f64>,
}

/// Train an adapter on (question, positive passage) pairs.
///
/// Questions and passage representations are embedded once up front with
/// the unwrapped provider. `W` starts at identity plus uniform noise in
/// (-0.01, 0.01); updates are plain SGD, one step per batch. A trailing
/// batch of fewer than two pairs is skipped, since a single pair has no
/// in-batch negatives.
pub fn train_adapter(
    pairs: &[TrainingPair],
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if pairs.len() < config.batch_size {
        return Err(TrainError::TooFewPairs { need: config.batch_size, got: pairs.len() });
    }

    let questions: Vec<String> = pairs.iter().map(|p| p.question.clone()).collect();
    let mut representations = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let passage = corpus
            .passage(&pair.positive_passage_id)
            .ok_or_else(|| TrainError::UnknownPassage(pair.positive_passage_id.clone()))?;
        representations.push(passage_representation(passage));
    }

    let to_raw = |vs: Vec<EmbeddingVector>| -> Vec<Vec<f64>> {
        vs.into_iter().map(|v| v.values().to_vec()).collect()
    };
    let q_raw = to_raw(embed(provider, &questions)?);
    let p_raw = to_raw(embed(provider, &representations)?);
    let dim = provider.dim();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = vec![0.0f64; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let base = if r == c { 1.0 } else { 0.0 };
            w[r * dim + c] = base + init_rng.gen_range(-0.01..0.01);
        }
    }

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        // Deliberately identical order every epoch: derived from the seed
        // alone, so reruns and zero-rate diagnostic runs line up exactly.
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_SALT);
        order.shuffle(&mut shuffle_rng);

        let mut batch_losses = Vec::new();
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            if batch.len() < 2 {
                continue;
            }
            let (loss, grad) =
                batch_loss_and_grad(&w, dim, batch, &q_raw, &p_raw, config.scale)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: batch_no });
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= config.learning_rate * gi;
            }
            batch_losses.push(loss);
        }
        debug_assert!(!batch_losses.is_empty());
        history.push(batch_losses.iter().sum::<f64>() / batch_losses.len() as f64);
    }

    Ok(TrainOutcome { adapter: AdapterMatrix::new(dim, dim, w)?, loss_history: history })
}

/// Loss and full `dL/dW` for one batch under the current weights.
fn batch_loss_and_grad(
    w: &[f64],
    dim: usize,
    batch: &[usize],
    q_raw: &[Vec<f64>],
    p_raw: &[Vec<f64>],
    scale: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let project = |x: &[f64]| -> Result<(Vec<f64>, f64), TrainError> {
        let mut y = Vec::with_capacity(dim);
        for r in 0..dim {
            y.push(dot(&w[r * dim..(r + 1) * dim], x));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(TrainError::DegenerateProjection);
        }
        for v in &mut y {
            *v /= norm;
        }
        Ok((y, norm))
    };

    let mut anchors = Vec::with_capacity(batch.len());
    let mut positives = Vec::with_capacity(batch.len());
    let mut a_norms = Vec::with_capacity(batch.len());
    let mut p_norms = Vec::with_capacity(batch.len());
    for &i in batch {
        let (a, na) = project(&q_raw[i])?;
        anchors.push(EmbeddingVector::from_unit_unchecked(a));
        a_norms.push(na);
        let (p, np) = project(&p_raw[i])?;
        positives.push(EmbeddingVector::from_unit_unchecked(p));
        p_norms.push(np);
    }

    let loss = mnr_loss(&anchors, &positives, scale)?;
    let grads = mnr_gradient(&anchors, &positives, scale)?;

    let mut dw = vec![0.0f64; dim * dim];
    let mut add_side = |g: &[f64], unit: &[f64], norm: f64, input: &[f64]| {
        let proj = dot(unit, g);
        for r in 0..dim {
            let gy = (g[r] - unit[r] * proj) / norm;
            let row = &mut dw[r * dim..(r + 1) * dim];
            for (slot, x) in row.iter_mut().zip(input) {
                *slot += gy * x;
            }
        }
    };
    for (b, &i) in batch.iter().enumerate() {
        add_side(&grads.anchors[b], anchors[b].values(), a_norms[b], &q_raw[i]);
        add_side(&grads.positives[b], positives[b].values(), p_norms[b], &p_raw[i]);
    }
    Ok((loss, dw))
}
