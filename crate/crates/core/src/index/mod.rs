//! Retrieval indexes: a BM25 inverted index and dense vector indexes fed
//! by pluggable embedding providers, plus binary persistence for both.

pub mod dense;
pub mod provider;
pub mod sparse;
pub mod storage;

use thiserror::Error;

pub use dense::{
    build_vector_index, cosine, dense_search, EmbeddingVector, IndexItem, IndexLevel,
    VectorEntry, VectorIndex,
};
pub use provider::{
    embed, EmbeddingProvider, HashEmbedder, HttpEmbedder, ProviderError, EMBED_BATCH_SIZE,
};
pub use sparse::{bm25_score, bm25_search, build_sparse_index, InvertedIndex, Posting};
pub use storage::{load_dense_index, load_sparse_index, save_dense_index, save_sparse_index};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file: {0}")]
    Format(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("unknown passage '{0}'")]
    UnknownPassage(String),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("non-finite vector component")]
    NonFinite,
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
}
