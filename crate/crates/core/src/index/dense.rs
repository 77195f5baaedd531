//! Unit-length embedding vectors, dense indexes over them, and exhaustive
//! cosine search.

use std::collections::BTreeSet;

use crate::retrieve::RetrievalResult;

use super::{EmbeddingProvider, IndexError};

/// A unit-length embedding. Construction normalizes, so cosine similarity
/// between two of these is a plain dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalize `values` to unit length. Zero and non-finite inputs are
    /// rejected rather than silently patched; providers that can produce
    /// degenerate vectors must map them to something embeddable first.
    pub fn unit_from(values: Vec<f64>) -> Result<Self, IndexError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(IndexError::ZeroVector);
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(EmbeddingVector { values })
    }

    /// The `axis`-th standard basis vector.
    pub fn basis(dim: usize, axis: usize) -> Self {
        assert!(axis < dim);
        let mut values = vec![0.0; dim];
        values[axis] = 1.0;
        EmbeddingVector { values }
    }

    /// Wrap values that are already unit length (checked only in debug).
    pub(crate) fn from_unit_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(
            (values.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-6,
            "from_unit_unchecked called with a non-unit vector"
        );
        EmbeddingVector { values }
    }

    /// Wrap arbitrary values with no checks. Only for tests that probe
    /// loss functions off the unit sphere.
    #[cfg(test)]
    pub(crate) fn from_raw_for_tests(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Cosine similarity. Both vectors are unit length by construction, so
/// this is their dot product; dimensions must match.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, IndexError> {
    if a.dim() != b.dim() {
        return Err(IndexError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(dot(&a.values, &b.values))
}

/// Whether an index holds passage vectors or document vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexLevel {
    Passage,
    Document,
}

/// One indexed vector. For document-level indexes, `passage_id` equals
/// `doc_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorEntry {
    pub passage_id: String,
    pub doc_id: String,
    pub vector: EmbeddingVector,
}

/// Dense index: entries in insertion order, searched exhaustively.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    pub level: IndexLevel,
    pub dim: usize,
    pub entries: Vec<VectorEntry>,
}

/// Something to index: an id, its owning document, and the text to embed.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexItem {
    pub id: String,
    pub doc_id: String,
    pub text: String,
}

impl IndexItem {
    pub fn new(
        id: impl Into<String>,
        doc_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        IndexItem { id: id.into(), doc_id: doc_id.into(), text: text.into() }
    }
}

/// Embed every item (batched) and assemble an index in item order.
pub fn build_vector_index(
    items: &[IndexItem],
    provider: &dyn EmbeddingProvider,
    level: IndexLevel,
) -> Result<VectorIndex, IndexError> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(IndexError::DuplicateId(item.id.clone()));
        }
    }
    let texts: Vec<String> = items.iter().map(|i| i.text.clone()).collect();
    let vectors = super::provider::embed(provider, &texts)?;
    let entries = items
        .iter()
        .zip(vectors)
        .map(|(item, vector)| VectorEntry {
            passage_id: item.id.clone(),
            doc_id: item.doc_id.clone(),
            vector,
        })
        .collect();
    Ok(VectorIndex { level, dim: provider.dim(), entries })
}

/// Exhaustive top-`k` cosine search.
///
/// Ordering is total: descending score, then ascending id, so results are
/// reproducible even with tied scores. With `doc_filter` set, only entries
/// whose `doc_id` is in the set compete; an empty filter matches nothing.
pub fn dense_search(
    index: &VectorIndex,
    query: &EmbeddingVector,
    k: usize,
    doc_filter: Option<&BTreeSet<String>>,
) -> Vec<RetrievalResult> {
    assert_eq!(
        query.dim(),
        index.dim,
        "query dimension {} does not match index dimension {}",
        query.dim(),
        index.dim
    );
    let mut candidates: Vec<(f64, &VectorEntry)> = index
        .entries
        .iter()
        .filter(|e| doc_filter.map_or(true, |f| f.contains(&e.doc_id)))
        .map(|e| (dot(query.values(), e.vector.values()), e))
        .collect();
    candidates.sort_unstable_by(|(sa, ea), (sb, eb)| {
        sb.total_cmp(sa).then_with(|| ea.passage_id.cmp(&eb.passage_id))
    });
    candidates.truncate(k);
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (score, e))| RetrievalResult {
            rank: i + 1,
            passage_id: e.passage_id.clone(),
            doc_id: e.doc_id.clone(),
            score,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::HashEmbedder;
    use super::*;

    fn unit(values: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::unit_from(values).unwrap()
    }

    fn index_of(vectors: Vec<(&str, &str, Vec<f64>)>) -> VectorIndex {
        let dim = vectors[0].2.len();
        VectorIndex {
            level: IndexLevel::Passage,
            dim,
            entries: vectors
                .into_iter()
                .map(|(id, doc, v)| VectorEntry {
                    passage_id: id.into(),
                    doc_id: doc.into(),
                    vector: unit(v),
                })
                .collect(),
        }
    }

    #[test]
    fn normalization_and_cosine() {
        let a = unit(vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((a.values()[0] - 0.6).abs() < 1e-12);
        assert!((a.values()[1] - 0.8).abs() < 1e-12);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = EmbeddingVector::basis(8, 2);
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn zero_and_nan_vectors_are_rejected() {
        assert!(matches!(
            EmbeddingVector::unit_from(vec![0.0; 8]),
            Err(IndexError::ZeroVector)
        ));
        assert!(matches!(
            EmbeddingVector::unit_from(vec![f64::NAN; 8]),
            Err(IndexError::NonFinite)
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = EmbeddingVector::basis(8, 0);
        let b = EmbeddingVector::basis(16, 0);
        assert!(matches!(cosine(&a, &b), Err(IndexError::DimMismatch(8, 16))));
    }

    #[test]
    fn search_ranks_by_descending_score() {
        let idx = index_of(vec![
            ("p1", "d1", vec![1.0, 0.0, 0.0, 0.0]),
            ("p2", "d1", vec![1.0, 1.0, 0.0, 0.0]),
            ("p3", "d2", vec![0.0, 1.0, 0.0, 0.0]),
        ]);
        let q = unit(vec![1.0, 0.2, 0.0, 0.0]);
        let hits = dense_search(&idx, &q, 3, None);
        assert_eq!(
            hits.iter().map(|h| h.passage_id.as_str()).collect::<Vec<_>>(),
            vec!["p1", "p2", "p3"]
        );
        assert_eq!(hits[0].rank, 1);
        assert!(hits[0].score > hits[1].score && hits[1].score > hits[2].score);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let idx = index_of(vec![
            ("pz", "d1", vec![1.0, 0.0]),
            ("pa", "d1", vec![1.0, 0.0]),
            ("pm", "d1", vec![1.0, 0.0]),
        ]);
        // dim 2 is fine here: the index is built by hand, not by a provider.
        let q = unit(vec![1.0, 0.0]);
        let hits = dense_search(&idx, &q, 3, None);
        assert_eq!(
            hits.iter().map(|h| h.passage_id.as_str()).collect::<Vec<_>>(),
            vec!["pa", "pm", "pz"]
        );
    }

    #[test]
    fn doc_filter_restricts_and_empty_filter_matches_nothing() {
        let idx = index_of(vec![
            ("p1", "d1", vec![1.0, 0.0]),
            ("p2", "d2", vec![1.0, 0.0]),
        ]);
        let q = unit(vec![1.0, 0.0]);
        let only_d2: BTreeSet<String> = ["d2".to_string()].into();
        let hits = dense_search(&idx, &q, 5, Some(&only_d2));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].passage_id, "p2");
        assert_eq!(hits[0].rank, 1);

        let empty = BTreeSet::new();
        assert!(dense_search(&idx, &q, 5, Some(&empty)).is_empty());
    }

    #[test]
    fn k_larger_than_index_returns_everything() {
        let idx = index_of(vec![("p1", "d1", vec![1.0, 0.0])]);
        let q = unit(vec![0.0, 1.0]);
        let hits = dense_search(&idx, &q, 10, None);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].score, 0.0);
    }

    #[test]
    fn build_rejects_duplicate_ids() {
        let provider = HashEmbedder::new(16);
        let items = vec![
            IndexItem::new("p1", "d1", "alpha"),
            IndexItem::new("p1", "d1", "beta"),
        ];
        assert!(matches!(
            build_vector_index(&items, &provider, IndexLevel::Passage),
            Err(IndexError::DuplicateId(id)) if id == "p1"
        ));
    }

    #[test]
    fn build_preserves_item_order() {
        let provider = HashEmbedder::new(16);
        let items = vec![
            IndexItem::new("z", "d1", "zulu text"),
            IndexItem::new("a", "d1", "alpha text"),
        ];
        let idx = build_vector_index(&items, &provider, IndexLevel::Passage).unwrap();
        assert_eq!(idx.entries[0].passage_id, "z");
        assert_eq!(idx.entries[1].passage_id, "a");
        assert_eq!(idx.dim, 16);
    }
}
