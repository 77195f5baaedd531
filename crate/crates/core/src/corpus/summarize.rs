//! One-sentence table summaries for indexing.
//!
//! Tables embed poorly as raw Markdown, so each table gets a short natural
//! language summary that is indexed in its place. Summaries come from an
//! LLM when one is available; otherwise a deterministic rule built from the
//! caption and header row stands in, and the table is flagged so operators
//! can regenerate it later.

use crate::rag::llm::LlmClient;

use super::TableRecord;

/// First line of every summarization prompt; also how the offline mock
/// recognizes these requests.
pub const SUMMARY_PROMPT_HEADER: &str =
    "Summarize the following table in one sentence for retrieval indexing.";

/// Upper bound passed to the generator; summaries are one sentence.
const SUMMARY_MAX_TOKENS: usize = 256;

/// A generated summary plus whether the deterministic fallback had to be
/// used because the client failed or returned nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSummary {
    pub text: String,
    pub fallback_used: bool,
}

/// Build the full summarization prompt for one table.
pub fn build_summary_prompt(table: &TableRecord) -> String {
    format!(
        "{SUMMARY_PROMPT_HEADER}\nCaption: {}\nTable:\n{}",
        table.caption, table.markdown
    )
}

/// Cells of one Markdown table row: split on `|`, trimmed, empties dropped.
pub fn header_cells_of_line(line: &str) -> Vec<String> {
    line.split('|')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_string)
        .collect()
}

/// Cells of the table's header (first) row.
pub fn header_cells(markdown: &str) -> Vec<String> {
    header_cells_of_line(markdown.lines().next().unwrap_or(""))
}

/// The deterministic summary rule: caption, an em dash, and the header
/// columns. With an empty caption the text starts at the dash.
pub fn summary_rule_text(caption: &str, cells: &[String]) -> String {
    let columns = cells.join(", ");
    if caption.is_empty() {
        format!("— columns: {columns}")
    } else {
        format!("{caption} — columns: {columns}")
    }
}

/// Rule-based summary for a table, used as the generation fallback.
pub fn fallback_summary(table: &TableRecord) -> String {
    summary_rule_text(&table.caption, &header_cells(&table.markdown))
}

/// Summarize one table. Generation errors and blank responses both fall
/// back to the deterministic rule and set `fallback_used`.
pub fn summarize_table(table: &TableRecord, llm: &dyn LlmClient) -> TableSummary {
    let prompt = build_summary_prompt(table);
    match llm.generate(&prompt, SUMMARY_MAX_TOKENS) {
        Ok(text) if !text.trim().is_empty() => TableSummary {
            text: text.trim().to_string(),
            fallback_used: false,
        },
        Ok(_) => TableSummary {
            text: fallback_summary(table),
            fallback_used: true,
        },
        Err(err) => {
            log::warn!(
                "summary generation failed for table '{}': {err}; using fallback",
                table.table_id
            );
            TableSummary {
                text: fallback_summary(table),
                fallback_used: true,
            }
        }
    }
}
