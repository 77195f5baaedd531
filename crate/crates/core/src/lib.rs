//! Retrieval engine and evaluation harness for hybrid text+table corpora.
//!
//! The crate is organised around the lifecycle of a retrieval experiment:
//!
//! - [`corpus`] — load, validate, split, aggregate, and enrich a corpus of
//!   technical-document passages and tables.
//! - [`index`] — sparse (BM25) and dense vector indexes over passage
//!   representations, with a pluggable embedding provider.
//! - [`retrieve`] — the three retriever methods (BM25, DPR, DHR) plus
//!   multi-vector table resolution.
//! - [`train`] — contrastive fine-tuning of a linear adapter over frozen
//!   provider embeddings using multiple-negatives ranking loss.
//! - [`eval`] — Top-K accuracy, MRR@K, similarity histograms, MCQ grading,
//!   and grounding analysis.
//! - [`rag`] — generative-reader orchestration: context assembly, MCQ
//!   prompting/parsing, and synthetic QA-pair generation.
//! - [`synth`] — deterministic synthetic corpora for tests and benchmarks.

pub mod corpus;
pub mod eval;
mod hashing;
pub mod index;
pub mod rag;
pub mod retrieve;
pub mod synth;
pub mod train;

pub use corpus::{Corpus, DocumentRecord, Passage, PassageKind, StatsReport, TableRecord};
pub use index::{EmbeddingProvider, EmbeddingVector, HashEmbedder, InvertedIndex, VectorIndex};
pub use retrieve::{RetrievalResult, Retriever, RetrieverMethod};
pub use train::{AdapterMatrix, TrainConfig, TrainingPair};
