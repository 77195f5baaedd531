//! Hybrid corpus model: documents, passages, tables, and the ingestion
//! pipeline (tokenize, split, aggregate, summarize) that produces them.
//!
//! A corpus mixes free-text passages with tables. Tables are never chunked;
//! they are indexed through proxy passages (caption and generated summary)
//! that resolve back to the full Markdown payload at retrieval time.

pub mod aggregate;
mod jsonl;
pub mod split;
pub mod summarize;
pub mod tokenize;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::aggregate_short;
pub use jsonl::{load_corpus, load_corpus_raw, save_corpus, write_corpus};
pub use split::{jaccard_similarity, split_paragraph, SplitOutcome};
pub use summarize::{summarize_table, TableSummary};
pub use tokenize::{analysis_tokens, count_tokens, tokenize};

/// Maximum token count for a text passage.
pub const PASSAGE_TOKEN_LIMIT: usize = 512;

/// Default minimum size below which adjacent same-section passages are
/// candidates for aggregation.
pub const DEFAULT_MIN_TOKENS: usize = 64;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("{0}")]
    Integrity(String),
}

/// One source document: identity, scope text, and its section outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub release: String,
    #[serde(rename = "sections")]
    pub section_titles: Vec<SectionTitle>,
}

/// An entry in a document's section outline, in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionTitle {
    pub number: String,
    pub title: String,
    pub depth: u32,
}

/// What a passage carries: prose, or a proxy for a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageKind {
    Text,
    TableCaption,
    TableSummary,
}

/// The unit of retrieval. Table proxies (`table_id` set) carry the caption
/// or summary text; the table payload itself lives in [`TableRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub section_path: Vec<String>,
    pub kind: PassageKind,
    pub text: String,
    pub table_id: Option<String>,
    /// Computed from `text`, never read from file.
    #[serde(skip)]
    pub token_count: usize,
}

impl Passage {
    pub fn new(
        passage_id: impl Into<String>,
        doc_id: impl Into<String>,
        section_path: Vec<String>,
        kind: PassageKind,
        text: impl Into<String>,
        table_id: Option<String>,
    ) -> Self {
        let text = text.into();
        let token_count = count_tokens(&text);
        Passage {
            passage_id: passage_id.into(),
            doc_id: doc_id.into(),
            section_path,
            kind,
            text,
            table_id,
            token_count,
        }
    }

    /// Convenience constructor for a plain text passage.
    pub fn text_passage(
        passage_id: impl Into<String>,
        doc_id: impl Into<String>,
        section_path: Vec<String>,
        text: impl Into<String>,
    ) -> Self {
        Self::new(passage_id, doc_id, section_path, PassageKind::Text, text, None)
    }

    /// Recompute `token_count` after mutating `text`.
    pub fn recount(&mut self) {
        self.token_count = count_tokens(&self.text);
    }
}

/// Full table payload, resolved from caption/summary proxy hits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub table_id: String,
    pub doc_id: String,
    pub section_path: Vec<String>,
    pub caption: String,
    pub markdown: String,
    pub summary: String,
    /// Tokens of `markdown`; computed, never read from file.
    #[serde(skip)]
    pub token_count: usize,
}

impl TableRecord {
    pub fn recount(&mut self) {
        self.token_count = count_tokens(&self.markdown);
    }
}

/// An in-memory corpus. Immutable once built; rebuild to mutate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: BTreeMap<String, DocumentRecord>,
    pub passages: Vec<Passage>,
    pub tables: BTreeMap<String, TableRecord>,
}

impl Corpus {
    /// Look up a passage by id (linear scan; corpora are small enough).
    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passages.iter().find(|p| p.passage_id == passage_id)
    }

    pub fn table(&self, table_id: &str) -> Option<&TableRecord> {
        self.tables.get(table_id)
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.documents.get(doc_id)
    }

    /// Check every type invariant. `strict` additionally enforces the text
    /// token limit and that each table is referenced by a caption passage,
    /// which raw pre-ingestion corpora may not satisfy yet.
    pub fn validate(&self, strict: bool) -> Result<(), CorpusError> {
        for (id, doc) in &self.documents {
            if id.is_empty() {
                return Err(CorpusError::Integrity("empty doc_id".into()));
            }
            if id != &doc.doc_id {
                return Err(CorpusError::Integrity(format!(
                    "document map key '{id}' does not match doc_id '{}'",
                    doc.doc_id
                )));
            }
            for s in &doc.section_titles {
                if s.depth < 1 {
                    return Err(CorpusError::Integrity(format!(
                        "document '{id}': section '{}' has depth {} (must be >= 1)",
                        s.number, s.depth
                    )));
                }
            }
        }

        let mut seen = BTreeSet::new();
        let mut captioned: BTreeSet<&str> = BTreeSet::new();
        for p in &self.passages {
            if !seen.insert(p.passage_id.as_str()) {
                return Err(CorpusError::Integrity(format!(
                    "duplicate passage_id '{}'",
                    p.passage_id
                )));
            }
            if !self.documents.contains_key(&p.doc_id) {
                return Err(CorpusError::Integrity(format!(
                    "passage '{}' references unknown doc_id '{}'",
                    p.passage_id, p.doc_id
                )));
            }
            match (p.kind, &p.table_id) {
                (PassageKind::Text, Some(_)) => {
                    return Err(CorpusError::Integrity(format!(
                        "text passage '{}' must not carry a table_id",
                        p.passage_id
                    )));
                }
                (PassageKind::Text, None) => {
                    if p.token_count == 0 {
                        return Err(CorpusError::Integrity(format!(
                            "text passage '{}' is empty",
                            p.passage_id
                        )));
                    }
                    if strict && p.token_count > PASSAGE_TOKEN_LIMIT {
                        return Err(CorpusError::Integrity(format!(
                            "text passage '{}' has {} tokens (limit {})",
                            p.passage_id, p.token_count, PASSAGE_TOKEN_LIMIT
                        )));
                    }
                }
                (_, None) => {
                    return Err(CorpusError::Integrity(format!(
                        "{:?} passage '{}' is missing its table_id",
                        p.kind, p.passage_id
                    )));
                }
                (kind, Some(tid)) => {
                    if !self.tables.contains_key(tid) {
                        return Err(CorpusError::Integrity(format!(
                            "passage '{}' references unknown table_id '{tid}'",
                            p.passage_id
                        )));
                    }
                    if kind == PassageKind::TableCaption {
                        captioned.insert(tid.as_str());
                    }
                }
            }
        }

        for (id, t) in &self.tables {
            if id != &t.table_id {
                return Err(CorpusError::Integrity(format!(
                    "table map key '{id}' does not match table_id '{}'",
                    t.table_id
                )));
            }
            if !self.documents.contains_key(&t.doc_id) {
                return Err(CorpusError::Integrity(format!(
                    "table '{id}' references unknown doc_id '{}'",
                    t.doc_id
                )));
            }
            if t.markdown.is_empty() || !t.markdown.trim_start().starts_with('|') {
                return Err(CorpusError::Integrity(format!(
                    "table '{id}': markdown must be non-empty and start with '|'"
                )));
            }
            if strict && !captioned.contains(id.as_str()) {
                return Err(CorpusError::Integrity(format!(
                    "table '{id}' has no caption passage referencing it"
                )));
            }
        }
        Ok(())
    }
}

/// Corpus-level summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub n_documents: usize,
    pub n_passages: usize,
    pub n_tables: usize,
    pub tables_per_document_mean: Option<f64>,
    pub mean_tokens_text_passage: Option<f64>,
    pub mean_tokens_table: Option<f64>,
    pub per_release_document_counts: BTreeMap<String, usize>,
}

/// Compute exact counts and arithmetic means; means over empty populations
/// are reported absent rather than zero.
pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let n_documents = corpus.documents.len();
    let n_passages = corpus.passages.len();
    let n_tables = corpus.tables.len();

    let text_counts: Vec<usize> = corpus
        .passages
        .iter()
        .filter(|p| p.kind == PassageKind::Text)
        .map(|p| p.token_count)
        .collect();
    let table_counts: Vec<usize> = corpus.tables.values().map(|t| t.token_count).collect();

    let mean = |v: &[usize]| -> Option<f64> {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<usize>() as f64 / v.len() as f64)
        }
    };

    let mut per_release = BTreeMap::new();
    for doc in corpus.documents.values() {
        *per_release.entry(doc.release.clone()).or_insert(0usize) += 1;
    }

    StatsReport {
        n_documents,
        n_passages,
        n_tables,
        tables_per_document_mean: if n_documents == 0 {
            None
        } else {
            Some(n_tables as f64 / n_documents as f64)
        },
        mean_tokens_text_passage: mean(&text_counts),
        mean_tokens_table: mean(&table_counts),
        per_release_document_counts: per_release,
    }
}

impl std::fmt::Display for StatsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "documents: {}", self.n_documents)?;
        writeln!(f, "passages:  {}", self.n_passages)?;
        writeln!(f, "tables:    {}", self.n_tables)?;
        match self.tables_per_document_mean {
            Some(m) => writeln!(f, "tables per document (mean): {m:.2}")?,
            None => writeln!(f, "tables per document (mean): -")?,
        }
        match self.mean_tokens_text_passage {
            Some(m) => writeln!(f, "mean tokens per text passage: {m:.2}")?,
            None => writeln!(f, "mean tokens per text passage: -")?,
        }
        match self.mean_tokens_table {
            Some(m) => writeln!(f, "mean tokens per table: {m:.2}")?,
            None => writeln!(f, "mean tokens per table: -")?,
        }
        for (release, n) in &self.per_release_document_counts {
            writeln!(f, "release {release}: {n} documents")?;
        }
        Ok(())
    }
}
