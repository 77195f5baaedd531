//! Inverted index with Okapi BM25 scoring.
//!
//! Terms are the analysis tokens of the raw passage text (lowercased, with
//! punctuation-only tokens dropped). Scoring uses the standard smoothed
//! IDF, which is never negative.

use std::collections::BTreeMap;

use crate::corpus::tokenize::analysis_tokens;
use crate::corpus::Passage;
use crate::retrieve::RetrievalResult;

use super::IndexError;

/// One posting: a passage containing the term, with its term frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub passage_id: String,
    pub tf: u32,
}

/// Inverted index over a passage collection.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub k1: f64,
    pub b: f64,
    /// Term to postings, each postings list sorted by passage id.
    pub postings: BTreeMap<String, Vec<Posting>>,
    /// Analysis-token count per passage (zero is allowed).
    pub passage_lengths: BTreeMap<String, usize>,
    /// Owning document per passage.
    pub doc_of: BTreeMap<String, String>,
    pub n_passages: usize,
    /// Mean passage length, always recomputed from `passage_lengths` in
    /// ascending id order so that built and reloaded indexes agree bit for
    /// bit.
    pub avg_length: f64,
}

pub(crate) fn mean_length(passage_lengths: &BTreeMap<String, usize>) -> f64 {
    let mut total = 0.0;
    for len in passage_lengths.values() {
        total += *len as f64;
    }
    total / passage_lengths.len() as f64
}

/// Build an index over `passages` with BM25 parameters `k1 > 0` and
/// `b` in [0, 1]. Passage ids must be unique and the list non-empty.
pub fn build_sparse_index(passages: &[Passage], k1: f64, b: f64) -> InvertedIndex {
    assert!(!passages.is_empty(), "cannot index an empty passage list");
    assert!(k1 > 0.0, "k1 must be positive, got {k1}");
    assert!((0.0..=1.0).contains(&b), "b must be in [0, 1], got {b}");

    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut passage_lengths = BTreeMap::new();
    let mut doc_of = BTreeMap::new();

    for p in passages {
        let tokens = analysis_tokens(&p.text);
        let prev = passage_lengths.insert(p.passage_id.clone(), tokens.len());
        assert!(prev.is_none(), "duplicate passage_id '{}'", p.passage_id);
        doc_of.insert(p.passage_id.clone(), p.doc_id.clone());

        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings
                .entry(term)
                .or_default()
                .push(Posting { passage_id: p.passage_id.clone(), tf: count });
        }
    }
    for list in postings.values_mut() {
        list.sort_unstable_by(|a, b| a.passage_id.cmp(&b.passage_id));
    }

    let avg_length = mean_length(&passage_lengths);
    InvertedIndex {
        k1,
        b,
        postings,
        passage_lengths,
        doc_of,
        n_passages: passages.len(),
        avg_length,
    }
}

/// Smoothed IDF; strictly positive even for terms in every passage.
fn idf(n_passages: usize, df: usize) -> f64 {
    let n = n_passages as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// BM25 score of one passage against pre-tokenized query terms. Duplicate
/// query terms contribute once per occurrence. Terms absent from the index
/// contribute zero.
pub fn bm25_score(
    index: &InvertedIndex,
    query_terms: &[String],
    passage_id: &str,
) -> Result<f64, IndexError> {
    let len = *index
        .passage_lengths
        .get(passage_id)
        .ok_or_else(|| IndexError::UnknownPassage(passage_id.to_string()))? as f64;

    let mut score = 0.0;
    for term in query_terms {
        let Some(list) = index.postings.get(term) else {
            continue;
        };
        let Ok(pos) = list.binary_search_by(|p| p.passage_id.as_str().cmp(passage_id)) else {
            continue;
        };
        let tf = f64::from(list[pos].tf);
        let norm = tf + index.k1 * (1.0 - index.b + index.b * len / index.avg_length);
        score += idf(index.n_passages, list.len()) * tf * (index.k1 + 1.0) / norm;
    }
    Ok(score)
}

/// Top-`k` BM25 search. The query is analyzed with the same tokenizer used
/// at build time. Only passages with a nonzero score are returned, ordered
/// by descending score with ties broken by ascending passage id.
pub fn bm25_search(index: &InvertedIndex, query: &str, k: usize) -> Vec<RetrievalResult> {
    let terms = analysis_tokens(query);
    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for term in &terms {
        let Some(list) = index.postings.get(term) else {
            continue;
        };
        let w = idf(index.n_passages, list.len());
        for posting in list {
            let len = index.passage_lengths[&posting.passage_id] as f64;
            let tf = f64::from(posting.tf);
            let norm = tf + index.k1 * (1.0 - index.b + index.b * len / index.avg_length);
            *scores.entry(posting.passage_id.as_str()).or_insert(0.0) +=
                w * tf * (index.k1 + 1.0) / norm;
        }
    }

    let mut candidates: Vec<(&str, f64)> = scores.into_iter().collect();
    candidates.sort_unstable_by(|(ida, sa), (idb, sb)| {
        sb.total_cmp(sa).then_with(|| ida.cmp(idb))
    });
    candidates.truncate(k);
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| RetrievalResult {
            rank: i + 1,
            passage_id: id.to_string(),
            doc_id: index.doc_of[id].clone(),
            score,
        })
        .collect()
}
