//! Evaluation protocol: gold-rank extraction, top-K accuracy and MRR,
//! per-difficulty breakdowns, MCQ grading, grounding analysis, and a
//! question/gold-passage similarity histogram.
//!
//! All metrics are exact arithmetic over explicit outcome lists; there is
//! no sampling anywhere, so every number is reproducible bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Passage;
use crate::index::{cosine, embed, EmbeddingProvider, ProviderError};
use crate::rag::{Difficulty, McqItem};
use crate::retrieve::passage_representation;
use crate::train::{apply_adapter, AdapterMatrix, TrainError};

/// The ranks reported in every retrieval report.
pub const REPORT_KS: [usize; 4] = [1, 3, 5, 10];

/// Rank cut used for MRR, per-difficulty metrics, and grounding.
pub const REPORT_DEPTH: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no queries to evaluate")]
    Empty,
    #[error("duplicate retrieved id '{0}'")]
    DuplicateRetrieved(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("bins must be at least 2, got {0}")]
    InvalidBins(usize),
    #[error("{0} questions vs {1} gold passages")]
    LengthMismatch(usize, usize),
    #[error("items without predictions: {0}")]
    MissingPredictions(String),
    #[error("duplicate predictions for: {0}")]
    DuplicatePredictions(String),
    #[error("predictions for unknown items: {0}")]
    UnknownPredictions(String),
    #[error("query ids do not line up: {0}")]
    IdMismatch(String),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
    #[error("adapter: {0}")]
    Adapter(#[from] TrainError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Position of the gold passage in a ranking: `Some(rank)` with 1-based
/// rank, or `None` when the gold id was not retrieved at all. The ranking
/// must not contain duplicates.
pub fn rank_of_gold(retrieved: &[String], gold: &str) -> Result<Option<usize>, EvalError> {
    let mut seen = BTreeSet::new();
    for id in retrieved {
        if !seen.insert(id.as_str()) {
            return Err(EvalError::DuplicateRetrieved(id.clone()));
        }
    }
    Ok(retrieved.iter().position(|id| id == gold).map(|p| p + 1))
}

/// One evaluated query: what was retrieved and where the gold landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutcome {
    pub query_id: String,
    pub gold_passage_id: String,
    pub retrieved: Vec<String>,
    pub rank: Option<usize>,
}

impl RankOutcome {
    pub fn new(
        query_id: impl Into<String>,
        gold_passage_id: impl Into<String>,
        retrieved: Vec<String>,
    ) -> Result<Self, EvalError> {
        let gold_passage_id = gold_passage_id.into();
        let rank = rank_of_gold(&retrieved, &gold_passage_id)?;
        Ok(RankOutcome { query_id: query_id.into(), gold_passage_id, retrieved, rank })
    }
}

/// Fraction of queries whose gold passage ranks within the top `k`.
pub fn topk_accuracy(outcomes: &[RankOutcome], k: usize) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    if outcomes.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = outcomes.iter().filter(|o| o.rank.is_some_and(|r| r <= k)).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Mean reciprocal rank, counting zero for queries whose gold passage
/// ranks beyond `k` or is absent.
pub fn mrr_at_k(outcomes: &[RankOutcome], k: usize) -> Result<f64, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    if outcomes.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for o in outcomes {
        if let Some(r) = o.rank {
            if r <= k {
                total += 1.0 / r as f64;
            }
        }
    }
    Ok(total / outcomes.len() as f64)
}

/// Accuracy and MRR at [`REPORT_DEPTH`] for one subset of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyMetrics {
    pub accuracy: f64,
    pub mrr: f64,
}

/// The standard retrieval report: accuracy at 1/3/5/10, MRR at 10, query
/// count, and an optional per-difficulty breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: BTreeMap<u32, f64>,
    #[serde(rename = "mrr@10")]
    pub mrr_at_10: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_difficulty: Option<BTreeMap<Difficulty, DifficultyMetrics>>,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[RankOutcome]) -> Result<Self, EvalError> {
        let mut acc = BTreeMap::new();
        for k in REPORT_KS {
            acc.insert(k as u32, topk_accuracy(outcomes, k)?);
        }
        Ok(EvalReport {
            acc,
            mrr_at_10: mrr_at_k(outcomes, REPORT_DEPTH)?,
            n: outcomes.len(),
            per_difficulty: None,
        })
    }

    /// Like [`EvalReport::from_outcomes`], plus accuracy and MRR at rank
    /// 10 per difficulty. Every query id must have a difficulty; grades
    /// with no queries are simply absent from the breakdown.
    pub fn with_difficulty(
        outcomes: &[RankOutcome],
        difficulty_of: &BTreeMap<String, Difficulty>,
    ) -> Result<Self, EvalError> {
        let missing: Vec<&str> = outcomes
            .iter()
            .filter(|o| !difficulty_of.contains_key(&o.query_id))
            .map(|o| o.query_id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(EvalError::IdMismatch(format!(
                "no difficulty for: {}",
                missing.join(", ")
            )));
        }
        let mut report = Self::from_outcomes(outcomes)?;
        let mut grouped: BTreeMap<Difficulty, Vec<RankOutcome>> = BTreeMap::new();
        for o in outcomes {
            grouped.entry(difficulty_of[&o.query_id]).or_default().push(o.clone());
        }
        let mut per = BTreeMap::new();
        for (difficulty, subset) in grouped {
            per.insert(
                difficulty,
                DifficultyMetrics {
                    accuracy: topk_accuracy(&subset, REPORT_DEPTH)?,
                    mrr: mrr_at_k(&subset, REPORT_DEPTH)?,
                },
            );
        }
        report.per_difficulty = Some(per);
        Ok(report)
    }

    /// Write the report as pretty-printed JSON. Output bytes depend only
    /// on the report contents.
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut w, self).expect("report serialization cannot fail");
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// MCQ grading summary. `overall` and the per-difficulty values are
/// fractions of items answered correctly; unparseable answers count as
/// wrong and are also tallied separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqGrades {
    pub overall: f64,
    pub per_difficulty: BTreeMap<Difficulty, f64>,
    pub n_items: usize,
    pub n_unparseable: usize,
}

impl McqGrades {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut w, self).expect("grades serialization cannot fail");
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Grade predictions against items. Predictions are (item id, chosen
/// option index), with `None` for answers no option letter could be
/// parsed from; there must be exactly one prediction per item.
pub fn grade_mcq(
    predictions: &[(String, Option<usize>)],
    items: &[McqItem],
) -> Result<McqGrades, EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_id: BTreeMap<&str, Option<usize>> = BTreeMap::new();
    let mut dups = Vec::new();
    for (id, choice) in predictions {
        if by_id.insert(id.as_str(), *choice).is_some() {
            dups.push(id.as_str());
        }
    }
    if !dups.is_empty() {
        return Err(EvalError::DuplicatePredictions(dups.join(", ")));
    }
    let item_ids: BTreeSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    let unknown: Vec<&str> =
        by_id.keys().filter(|id| !item_ids.contains(**id)).copied().collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPredictions(unknown.join(", ")));
    }
    let missing: Vec<&str> =
        item_ids.iter().filter(|id| !by_id.contains_key(**id)).copied().collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing.join(", ")));
    }

    let mut n_correct = 0usize;
    let mut n_unparseable = 0usize;
    let mut per_counts: BTreeMap<Difficulty, (usize, usize)> = BTreeMap::new();
    for item in items {
        let choice = by_id[item.item_id.as_str()];
        let correct = choice == Some(item.answer_index);
        if choice.is_none() {
            n_unparseable += 1;
        }
        if correct {
            n_correct += 1;
        }
        let slot = per_counts.entry(item.difficulty).or_insert((0, 0));
        slot.1 += 1;
        if correct {
            slot.0 += 1;
        }
    }
    Ok(McqGrades {
        overall: n_correct as f64 / items.len() as f64,
        per_difficulty: per_counts
            .into_iter()
            .map(|(d, (c, n))| (d, c as f64 / n as f64))
            .collect(),
        n_items: items.len(),
        n_unparseable,
    })
}

/// Cross-tabulation of answer correctness against retrieval grounding.
/// A query is grounded when its gold passage ranked within the cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingReport {
    pub correct_grounded: usize,
    pub correct_ungrounded: usize,
    pub incorrect_grounded: usize,
    pub incorrect_ungrounded: usize,
}

impl GroundingReport {
    pub fn total(&self) -> usize {
        self.correct_grounded
            + self.correct_ungrounded
            + self.incorrect_grounded
            + self.incorrect_ungrounded
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        serde_json::to_writer_pretty(&mut w, self).expect("report serialization cannot fail");
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Build the correctness-versus-grounding contingency table. The
/// correctness list and the outcomes must cover exactly the same ids.
pub fn grounding_report(
    correctness: &[(String, bool)],
    outcomes: &[RankOutcome],
    k: usize,
) -> Result<GroundingReport, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidK);
    }
    let mut rank_of: BTreeMap<&str, Option<usize>> = BTreeMap::new();
    for o in outcomes {
        if rank_of.insert(o.query_id.as_str(), o.rank).is_some() {
            return Err(EvalError::IdMismatch(format!("duplicate outcome '{}'", o.query_id)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut report = GroundingReport {
        correct_grounded: 0,
        correct_ungrounded: 0,
        incorrect_grounded: 0,
        incorrect_ungrounded: 0,
    };
    for (id, correct) in correctness {
        if !seen.insert(id.as_str()) {
            return Err(EvalError::IdMismatch(format!("duplicate correctness entry '{id}'")));
        }
        let Some(rank) = rank_of.get(id.as_str()) else {
            return Err(EvalError::IdMismatch(format!("no retrieval outcome for '{id}'")));
        };
        let grounded = rank.is_some_and(|r| r <= k);
        match (correct, grounded) {
            (true, true) => report.correct_grounded += 1,
            (true, false) => report.correct_ungrounded += 1,
            (false, true) => report.incorrect_grounded += 1,
            (false, false) => report.incorrect_ungrounded += 1,
        }
    }
    if seen.len() != rank_of.len() {
        let extra: Vec<&str> =
            rank_of.keys().filter(|id| !seen.contains(**id)).copied().collect();
        return Err(EvalError::IdMismatch(format!(
            "outcomes without correctness entries: {}",
            extra.join(", ")
        )));
    }
    Ok(report)
}

/// Histogram of question-to-gold-passage cosine similarities over
/// uniform bins spanning [-1, 1], with the exact mean kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityHistogram {
    pub label: String,
    pub bins: usize,
    pub counts: Vec<u64>,
    pub n: usize,
    pub mean: f64,
}

impl SimilarityHistogram {
    pub fn bin_start(&self, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / self.bins as f64
    }

    /// Write `bin_start,bin_end,count` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<(), EvalError> {
        writeln!(w, "bin_start,bin_end,count")?;
        for (i, count) in self.counts.iter().enumerate() {
            writeln!(w, "{:.6},{:.6},{count}", self.bin_start(i), self.bin_start(i + 1))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Embed each question and its gold passage's representation (applying
/// `adapter` to both sides when given) and histogram the cosines.
/// Similarity 1.0 lands in the final bin.
pub fn similarity_distribution(
    questions: &[String],
    gold_passages: &[&Passage],
    provider: &dyn EmbeddingProvider,
    adapter: Option<&AdapterMatrix>,
    bins: usize,
    label: &str,
) -> Result<SimilarityHistogram, EvalError> {
    if bins < 2 {
        return Err(EvalError::InvalidBins(bins));
    }
    if questions.len() != gold_passages.len() {
        return Err(EvalError::LengthMismatch(questions.len(), gold_passages.len()));
    }
    if questions.is_empty() {
        return Err(EvalError::Empty);
    }

    let reps: Vec<String> =
        gold_passages.iter().map(|p| passage_representation(p)).collect();
    let mut q_vecs = embed(provider, questions)?;
    let mut p_vecs = embed(provider, &reps)?;
    if let Some(a) = adapter {
        for v in q_vecs.iter_mut().chain(p_vecs.iter_mut()) {
            *v = apply_adapter(a, v)?;
        }
    }

    let mut counts = vec![0u64; bins];
    let mut total = 0.0;
    for (q, p) in q_vecs.iter().zip(&p_vecs) {
        let s = cosine(q, p).expect("matched dimensions by construction");
        total += s;
        let bin = (((s + 1.0) / 2.0) * bins as f64).floor() as usize;
        counts[bin.min(bins - 1)] += 1;
    }
    Ok(SimilarityHistogram {
        label: label.to_string(),
        bins,
        counts,
        n: questions.len(),
        mean: total / questions.len() as f64,
    })
}
