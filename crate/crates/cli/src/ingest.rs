//! Corpus normalization: split overlong text passages into sentence-aligned
//! chunks, merge runs of short neighbors, fill in missing table summaries,
//! and materialize the caption/summary proxy passages tables are retrieved
//! through.
//!
//! The pipeline is a fixed point: feeding its own output back through
//! produces an identical corpus, so re-running `ingest` on normalized data
//! is a byte-level no-op.

use std::collections::BTreeSet;

use tdpr_core::corpus::{
    aggregate_short, jaccard_similarity, split_paragraph, summarize_table, DEFAULT_MIN_TOKENS,
    PASSAGE_TOKEN_LIMIT,
};
use tdpr_core::rag::LlmClient;
use tdpr_core::{Corpus, Passage, PassageKind};

/// Normalize a raw corpus into retrieval-ready form.
///
/// Text passages over [`PASSAGE_TOKEN_LIMIT`] tokens are split; the first
/// chunk keeps the original id and later chunks get `/s1`, `/s2`, …
/// suffixes, so ids in unsplit passages survive round trips. Tables whose
/// summary is blank are summarized with `llm` (falling back to the
/// deterministic rule on failure), and any table without its `#caption` /
/// `#summary` proxy passage has one appended, in table-id order.
pub fn normalize_corpus(raw: Corpus, llm: &dyn LlmClient) -> Corpus {
    let Corpus {
        documents,
        passages,
        mut tables,
    } = raw;

    let mut split_out: Vec<Passage> = Vec::with_capacity(passages.len());
    for p in passages {
        if p.kind != PassageKind::Text || p.token_count <= PASSAGE_TOKEN_LIMIT {
            split_out.push(p);
            continue;
        }
        let outcome = split_paragraph(&p.text, PASSAGE_TOKEN_LIMIT, jaccard_similarity);
        for warning in &outcome.warnings {
            log::warn!("splitting passage '{}': {warning}", p.passage_id);
        }
        for (j, chunk) in outcome.chunks.into_iter().enumerate() {
            let id = if j == 0 {
                p.passage_id.clone()
            } else {
                format!("{}/s{j}", p.passage_id)
            };
            split_out.push(Passage::text_passage(
                id,
                p.doc_id.clone(),
                p.section_path.clone(),
                chunk,
            ));
        }
    }

    let mut passages = aggregate_short(split_out, DEFAULT_MIN_TOKENS, PASSAGE_TOKEN_LIMIT);

    for table in tables.values_mut() {
        if table.summary.trim().is_empty() {
            let summary = summarize_table(table, llm);
            if summary.fallback_used {
                log::warn!(
                    "table '{}': summary generation fell back to the header rule",
                    table.table_id
                );
            }
            table.summary = summary.text;
        }
    }

    let present: BTreeSet<String> = passages.iter().map(|p| p.passage_id.clone()).collect();
    for table in tables.values() {
        let caption_id = format!("{}#caption", table.table_id);
        if !present.contains(&caption_id) {
            passages.push(Passage::new(
                caption_id,
                table.doc_id.clone(),
                table.section_path.clone(),
                PassageKind::TableCaption,
                table.caption.clone(),
                Some(table.table_id.clone()),
            ));
        }
        let summary_id = format!("{}#summary", table.table_id);
        if !present.contains(&summary_id) {
            passages.push(Passage::new(
                summary_id,
                table.doc_id.clone(),
                table.section_path.clone(),
                PassageKind::TableSummary,
                table.summary.clone(),
                Some(table.table_id.clone()),
            ));
        }
    }

    Corpus {
        documents,
        passages,
        tables,
    }
}
