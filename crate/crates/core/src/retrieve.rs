//! Retrieval methods over the indexes: sparse BM25, dense passage
//! retrieval (DPR), and dense hierarchical retrieval (DHR) that narrows to
//! the most promising documents before ranking their passages. Also the
//! retrieval-to-context bridge that swaps table proxy hits for full table
//! payloads, and the JSONL run log that every evaluation writes.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DocumentRecord, Passage, PassageKind};
use crate::index::{
    bm25_search, dense_search, embed, EmbeddingProvider, EmbeddingVector, IndexItem,
    IndexLevel, InvertedIndex, ProviderError, VectorIndex,
};
use crate::train::{apply_adapter, AdapterMatrix, TrainError};

/// Token separating the fields of a representation string.
pub const SEP: &str = "[SEP]";

/// Default number of documents DHR keeps after its first stage.
pub const DEFAULT_DHR_DOCS: usize = 5;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("adapter: {0}")]
    Adapter(#[from] TrainError),
    #[error("unknown passage '{0}' in results")]
    UnknownPassage(String),
    #[error("passage '{passage_id}' references missing table '{table_id}'")]
    DanglingTable {
        passage_id: String,
        table_id: String,
    },
    #[error("table proxy passage '{0}' has no table_id")]
    MissingTableId(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {msg}")]
    InvalidEntry { line: usize, msg: String },
}

/// One ranked hit. Ranks are 1-based and contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub rank: usize,
    pub passage_id: String,
    pub doc_id: String,
    pub score: f64,
}

/// The retrieval methods this crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverMethod {
    Bm25,
    Dpr,
    Dhr,
}

impl std::fmt::Display for RetrieverMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RetrieverMethod::Bm25 => "bm25",
            RetrieverMethod::Dpr => "dpr",
            RetrieverMethod::Dhr => "dhr",
        })
    }
}

impl FromStr for RetrieverMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bm25" => Ok(RetrieverMethod::Bm25),
            "dpr" => Ok(RetrieverMethod::Dpr),
            "dhr" => Ok(RetrieverMethod::Dhr),
            other => Err(format!("unknown retriever method '{other}' (expected bm25, dpr, or dhr)")),
        }
    }
}

/// Text embedded for a document: title, abstract, and the section outline,
/// separator-joined.
pub fn document_representation(doc: &DocumentRecord) -> String {
    let mut parts = vec![doc.title.clone(), doc.abstract_text.clone()];
    parts.extend(
        doc.section_titles
            .iter()
            .map(|s| format!("{} {}", s.number, s.title)),
    );
    parts.join(&format!(" {SEP} "))
}

/// Text embedded for a passage: its section path, then its text. Table
/// proxies embed only the caption or summary they carry, never the table
/// payload.
pub fn passage_representation(passage: &Passage) -> String {
    let mut parts: Vec<&str> = passage.section_path.iter().map(String::as_str).collect();
    parts.push(&passage.text);
    parts.join(&format!(" {SEP} "))
}

/// One dense-index entry per passage, in corpus order.
pub fn passage_index_items(corpus: &Corpus) -> Vec<IndexItem> {
    corpus
        .passages
        .iter()
        .map(|p| IndexItem {
            id: p.passage_id.clone(),
            doc_id: p.doc_id.clone(),
            text: passage_representation(p),
        })
        .collect()
}

/// One dense-index entry per document, in id order; the entry id doubles
/// as the doc id so document hits can gate passage search.
pub fn document_index_items(corpus: &Corpus) -> Vec<IndexItem> {
    corpus
        .documents
        .values()
        .map(|d| IndexItem {
            id: d.doc_id.clone(),
            doc_id: d.doc_id.clone(),
            text: document_representation(d),
        })
        .collect()
}

/// Embed a question and optionally pass it through a trained adapter.
fn embed_query(
    question: &str,
    provider: &dyn EmbeddingProvider,
    adapter: Option<&AdapterMatrix>,
) -> Result<EmbeddingVector, RetrieveError> {
    let mut vectors = embed(provider, std::slice::from_ref(&question.to_string()))?;
    let q = vectors.pop().expect("embed returns one vector per text");
    match adapter {
        Some(a) => Ok(apply_adapter(a, &q)?),
        None => Ok(q),
    }
}

/// Dense passage retrieval: embed the question, rank all passages.
pub fn dpr_retrieve(
    question: &str,
    passage_index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    k: usize,
    adapter: Option<&AdapterMatrix>,
) -> Result<Vec<RetrievalResult>, RetrieveError> {
    assert_eq!(passage_index.level, IndexLevel::Passage);
    let q = embed_query(question, provider, adapter)?;
    Ok(dense_search(passage_index, &q, k, None))
}

/// Dense hierarchical retrieval: pick the top `d` documents by document
/// representation similarity, then rank only their passages. The final
/// ordering uses passage scores alone; document scores only gate which
/// passages compete. The question is embedded once for both stages.
pub fn dhr_retrieve(
    question: &str,
    doc_index: &VectorIndex,
    passage_index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    k: usize,
    d: usize,
    adapter: Option<&AdapterMatrix>,
) -> Result<Vec<RetrievalResult>, RetrieveError> {
    assert_eq!(doc_index.level, IndexLevel::Document);
    assert_eq!(passage_index.level, IndexLevel::Passage);
    assert!(d >= 1, "d must be at least 1");
    let q = embed_query(question, provider, adapter)?;
    let docs = dense_search(doc_index, &q, d, None);
    let allowed: BTreeSet<String> = docs.into_iter().map(|r| r.doc_id).collect();
    Ok(dense_search(passage_index, &q, k, Some(&allowed)))
}

/// A retrieved context unit ready for prompt assembly. Table proxy hits
/// are resolved to the full table Markdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextItem {
    /// The passage whose rank earned this item its place.
    pub source_passage_id: String,
    pub doc_id: String,
    pub section_path: Vec<String>,
    pub content: String,
    pub is_table: bool,
}

/// Map ranked results to context items, in rank order.
///
/// Text hits keep their passage text. Caption and summary hits are
/// replaced by their table's Markdown; when several hits point at the same
/// table, only the highest-ranked one survives, so a table never appears
/// twice in a prompt.
pub fn resolve_tables(
    results: &[RetrievalResult],
    corpus: &Corpus,
) -> Result<Vec<ContextItem>, RetrieveError> {
    let mut seen_tables: BTreeSet<String> = BTreeSet::new();
    let mut items = Vec::with_capacity(results.len());
    for r in results {
        let passage = corpus
            .passage(&r.passage_id)
            .ok_or_else(|| RetrieveError::UnknownPassage(r.passage_id.clone()))?;
        match passage.kind {
            PassageKind::Text => items.push(ContextItem {
                source_passage_id: r.passage_id.clone(),
                doc_id: passage.doc_id.clone(),
                section_path: passage.section_path.clone(),
                content: passage.text.clone(),
                is_table: false,
            }),
            PassageKind::TableCaption | PassageKind::TableSummary => {
                let table_id = passage
                    .table_id
                    .as_ref()
                    .ok_or_else(|| RetrieveError::MissingTableId(r.passage_id.clone()))?;
                if !seen_tables.insert(table_id.clone()) {
                    continue;
                }
                let table = corpus.table(table_id).ok_or_else(|| {
                    RetrieveError::DanglingTable {
                        passage_id: r.passage_id.clone(),
                        table_id: table_id.clone(),
                    }
                })?;
                items.push(ContextItem {
                    source_passage_id: r.passage_id.clone(),
                    doc_id: table.doc_id.clone(),
                    section_path: table.section_path.clone(),
                    content: table.markdown.clone(),
                    is_table: true,
                });
            }
        }
    }
    Ok(items)
}

/// A configured retriever bundling method, indexes, and parameters.
pub struct Retriever<'a> {
    backend: Backend<'a>,
    k: usize,
}

enum Backend<'a> {
    Sparse {
        index: &'a InvertedIndex,
    },
    Dense {
        passages: &'a VectorIndex,
        provider: &'a dyn EmbeddingProvider,
        adapter: Option<&'a AdapterMatrix>,
    },
    Hierarchical {
        documents: &'a VectorIndex,
        passages: &'a VectorIndex,
        provider: &'a dyn EmbeddingProvider,
        adapter: Option<&'a AdapterMatrix>,
        d: usize,
    },
}

impl<'a> Retriever<'a> {
    pub fn bm25(index: &'a InvertedIndex, k: usize) -> Self {
        assert!(k >= 1);
        Retriever { backend: Backend::Sparse { index }, k }
    }

    pub fn dpr(
        passages: &'a VectorIndex,
        provider: &'a dyn EmbeddingProvider,
        k: usize,
        adapter: Option<&'a AdapterMatrix>,
    ) -> Self {
        assert!(k >= 1);
        Retriever { backend: Backend::Dense { passages, provider, adapter }, k }
    }

    pub fn dhr(
        documents: &'a VectorIndex,
        passages: &'a VectorIndex,
        provider: &'a dyn EmbeddingProvider,
        k: usize,
        d: usize,
        adapter: Option<&'a AdapterMatrix>,
    ) -> Self {
        assert!(k >= 1 && d >= 1);
        Retriever {
            backend: Backend::Hierarchical { documents, passages, provider, adapter, d },
            k,
        }
    }

    pub fn method(&self) -> RetrieverMethod {
        match self.backend {
            Backend::Sparse { .. } => RetrieverMethod::Bm25,
            Backend::Dense { .. } => RetrieverMethod::Dpr,
            Backend::Hierarchical { .. } => RetrieverMethod::Dhr,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Document cut for DHR; absent for the flat methods.
    pub fn d(&self) -> Option<usize> {
        match self.backend {
            Backend::Hierarchical { d, .. } => Some(d),
            _ => None,
        }
    }

    /// Retrieve at the configured depth.
    pub fn retrieve(&self, question: &str) -> Result<Vec<RetrievalResult>, RetrieveError> {
        self.retrieve_k(question, self.k)
    }

    /// Retrieve at an explicit depth.
    pub fn retrieve_k(
        &self,
        question: &str,
        k: usize,
    ) -> Result<Vec<RetrievalResult>, RetrieveError> {
        match &self.backend {
            Backend::Sparse { index } => Ok(bm25_search(index, question, k)),
            Backend::Dense { passages, provider, adapter } => {
                dpr_retrieve(question, passages, *provider, k, *adapter)
            }
            Backend::Hierarchical { documents, passages, provider, adapter, d } => {
                dhr_retrieve(question, documents, passages, *provider, k, *d, *adapter)
            }
        }
    }

    /// Build the run-log entry for one query answered at depth `k`.
    pub fn log_entry(
        &self,
        query_id: impl Into<String>,
        k: usize,
        results: Vec<RetrievalResult>,
    ) -> RunLogEntry {
        RunLogEntry {
            query_id: query_id.into(),
            method: self.method(),
            k,
            d: self.d(),
            results,
        }
    }
}

/// One line of the retrieval run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub query_id: String,
    pub method: RetrieverMethod,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub results: Vec<RetrievalResult>,
}

/// Write run-log entries as JSONL, in order.
pub fn write_run_log(entries: &[RunLogEntry], path: impl AsRef<Path>) -> Result<(), RetrieveError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for e in entries {
        let json = serde_json::to_string(e).map_err(|source| RetrieveError::Parse {
            line: 0,
            source,
        })?;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a run log back, checking that ranks are 1-based and contiguous.
pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<RunLogEntry>, RetrieveError> {
    let file = File::open(path.as_ref())?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: RunLogEntry = serde_json::from_str(&line)
            .map_err(|source| RetrieveError::Parse { line: line_no, source })?;
        for (i, r) in entry.results.iter().enumerate() {
            if r.rank != i + 1 {
                return Err(RetrieveError::InvalidEntry {
                    line: line_no,
                    msg: format!(
                        "query '{}': rank {} at position {}",
                        entry.query_id,
                        r.rank,
                        i + 1
                    ),
                });
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}
