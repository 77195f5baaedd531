//! Question answering on top of retrieval: LLM clients, context assembly,
//! multiple-choice orchestration, and QA-pair generation.

pub mod context;
pub mod llm;
pub mod qagen;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{answer_mcq, assemble_context, build_mcq_prompt, parse_mcq_answer};
pub use llm::{HttpLlm, LlmClient, LlmError, MockLlm};
pub use qagen::{filter_qa_pairs, generate_qa_pairs};

#[derive(Debug, Error)]
pub enum RagError {
    #[error("llm: {0}")]
    Llm(#[from] LlmError),
    #[error("no option letter found in {0:?}")]
    UnparseableAnswer(String),
    #[error("retrieval: {0}")]
    Retrieve(#[from] crate::retrieve::RetrieveError),
    #[error("line {line}: {msg}")]
    InvalidItem { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("passage '{passage_id}' references unknown table '{table_id}'")]
    DanglingTable {
        passage_id: String,
        table_id: String,
    },
}

/// Question difficulty grade. Orders easy < intermediate < hard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Intermediate,
    Hard,
}

impl std::fmt::Display for Difficulty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Intermediate => "intermediate",
            Difficulty::Hard => "hard",
        })
    }
}

/// Which evaluation split a QA pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaSplit {
    Train,
    Test,
}

/// A question with its gold source passage, used for retriever training
/// and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub question_id: String,
    pub question: String,
    pub answer: String,
    pub passage_id: String,
    pub split: QaSplit,
}

/// A multiple-choice item. `gold_passage_id` links the item back to the
/// passage that grounds the correct answer, when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub item_id: String,
    pub difficulty: Difficulty,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_passage_id: Option<String>,
}

/// Read QA pairs from JSONL, rejecting duplicates and empty questions.
pub fn read_qa_pairs(path: impl AsRef<Path>) -> Result<Vec<QAPair>, RagError> {
    let file = File::open(path.as_ref())?;
    let mut seen = std::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: QAPair = serde_json::from_str(&line)
            .map_err(|source| RagError::Parse { line: line_no, source })?;
        if pair.question.trim().is_empty() {
            return Err(RagError::InvalidItem {
                line: line_no,
                msg: format!("question '{}' is empty", pair.question_id),
            });
        }
        if !seen.insert(pair.question_id.clone()) {
            return Err(RagError::InvalidItem {
                line: line_no,
                msg: format!("duplicate question_id '{}'", pair.question_id),
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Write QA pairs as JSONL in input order.
pub fn write_qa_pairs(pairs: &[QAPair], path: impl AsRef<Path>) -> Result<(), RagError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for pair in pairs {
        serde_json::to_writer(&mut w, pair).map_err(|source| RagError::Parse {
            line: 0,
            source,
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Write MCQ items as JSONL in input order.
pub fn write_mcq_items(items: &[McqItem], path: impl AsRef<Path>) -> Result<(), RagError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| RagError::Parse {
            line: 0,
            source,
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read MCQ items from JSONL. Each item must offer two to five options and
/// an in-range answer index.
pub fn read_mcq_items(path: impl AsRef<Path>) -> Result<Vec<McqItem>, RagError> {
    let file = File::open(path.as_ref())?;
    let mut seen = std::collections::BTreeSet::new();
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: McqItem = serde_json::from_str(&line)
            .map_err(|source| RagError::Parse { line: line_no, source })?;
        if item.options.len() < 2 || item.options.len() > 5 {
            return Err(RagError::InvalidItem {
                line: line_no,
                msg: format!(
                    "item '{}' has {} options (need 2..=5)",
                    item.item_id,
                    item.options.len()
                ),
            });
        }
        if item.answer_index >= item.options.len() {
            return Err(RagError::InvalidItem {
                line: line_no,
                msg: format!(
                    "item '{}' answer_index {} out of range for {} options",
                    item.item_id,
                    item.answer_index,
                    item.options.len()
                ),
            });
        }
        if !seen.insert(item.item_id.clone()) {
            return Err(RagError::InvalidItem {
                line: line_no,
                msg: format!("duplicate item_id '{}'", item.item_id),
            });
        }
        items.push(item);
    }
    Ok(items)
}
