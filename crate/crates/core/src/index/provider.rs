//! Embedding providers: where vectors come from.
//!
//! Two implementations ship: a seeded hashing embedder for fully offline,
//! reproducible runs, and an HTTP client for a real sentence-embedding
//! server. Callers go through [`embed`], which batches requests and
//! guarantees unit-length output regardless of provider.

use std::time::Duration;

use thiserror::Error;

use crate::corpus::tokenize::analysis_tokens;
use crate::hashing::{fnv1a64, fnv1a64_seeded};

use super::dense::EmbeddingVector;

/// Number of texts sent to a provider per request.
pub const EMBED_BATCH_SIZE: usize = 64;

/// Seed deriving the token-sign hash from the bucket hash.
const SIGN_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Network-level failure; safe to retry.
    #[error("transport: {0}")]
    Transport(String),
    /// The server answered but not in the expected shape; not retriable.
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("sent {sent} texts, received {received} vectors")]
    BatchShape { sent: usize, received: usize },
    #[error("vector {0} in batch is zero or non-finite")]
    Degenerate(usize),
}

/// Source of raw embedding vectors. Implementations need not normalize;
/// [`embed`] does.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

/// Embed any number of texts: chunks into batches of [`EMBED_BATCH_SIZE`],
/// validates shapes, and normalizes every vector to unit length.
pub fn embed(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
) -> Result<Vec<EmbeddingVector>, ProviderError> {
    let dim = provider.dim();
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EMBED_BATCH_SIZE) {
        let vectors = provider.embed_batch(chunk)?;
        if vectors.len() != chunk.len() {
            return Err(ProviderError::BatchShape {
                sent: chunk.len(),
                received: vectors.len(),
            });
        }
        for v in vectors {
            if v.len() != dim {
                return Err(ProviderError::Dimension { expected: dim, got: v.len() });
            }
            let position = out.len();
            out.push(
                EmbeddingVector::unit_from(v)
                    .map_err(|_| ProviderError::Degenerate(position))?,
            );
        }
    }
    Ok(out)
}

/// Deterministic bag-of-tokens embedder.
///
/// Each analysis token is FNV-1a hashed to a bucket and a sign; the text's
/// vector is the signed bucket histogram. Texts with no tokens, or whose
/// signed counts cancel exactly, map to the first basis vector so that
/// every text embeds successfully. Quality is far below a learned model,
/// but identical inputs give identical vectors on every platform, which is
/// what the offline pipeline and the test suite need.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    /// `dim` must be at least 8; collisions dominate below that.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 8, "embedding dimension must be >= 8, got {dim}");
        HashEmbedder { dim }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0f64; self.dim];
        for token in analysis_tokens(text) {
            let bytes = token.as_bytes();
            let bucket = (fnv1a64(bytes) % self.dim as u64) as usize;
            let sign = if fnv1a64_seeded(SIGN_SEED, bytes) & 1 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12 {
            v.fill(0.0);
            v[0] = 1.0;
        }
        v
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Client for an HTTP embedding server.
///
/// Sends `POST {endpoint}/embed` with `{"texts": [...]}` and expects
/// `{"dim": N, "vectors": [[...], ...]}` back.
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        HttpEmbedder {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            dim,
            agent,
        }
    }
}

#[derive(serde::Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingProvider for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let url = format!("{}/embed", self.endpoint);
        let body = serde_json::json!({ "texts": texts });
        let response = self.agent.post(&url).send_json(body).map_err(|e| match e {
            ureq::Error::Status(code, _) => {
                ProviderError::Protocol(format!("HTTP {code} from {url}"))
            }
            ureq::Error::Transport(t) => ProviderError::Transport(t.to_string()),
        })?;
        let parsed: EmbedResponse = response
            .into_json()
            .map_err(|e| ProviderError::Protocol(format!("invalid JSON from {url}: {e}")))?;
        if parsed.dim != self.dim {
            return Err(ProviderError::Dimension { expected: self.dim, got: parsed.dim });
        }
        Ok(parsed.vectors)
    }
}
