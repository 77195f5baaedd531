//! Context assembly and multiple-choice prompting.
//!
//! Retrieved items become one prompt context block each, in rank order,
//! under a greedy token budget; tables travel as raw Markdown and are
//! never cut mid-table. Prompts are byte-deterministic so the whole
//! answer path can be replayed exactly.

use crate::corpus::tokenize::count_tokens;
use crate::corpus::Corpus;
use crate::retrieve::{resolve_tables, ContextItem, Retriever, RunLogEntry};

use super::llm::LlmClient;
use super::{McqItem, RagError};

/// First line of every multiple-choice prompt.
pub const MCQ_PROMPT_HEADER: &str =
    "Answer the multiple-choice question using the context below.";

/// First line of every free-form answer prompt.
pub const ANSWER_PROMPT_HEADER: &str = "Answer the question using only the context below.";

/// Closing directive of the multiple-choice prompt; answer parsing
/// relies on the model honoring it.
pub const MCQ_DIRECTIVE: &str = "Answer with the letter only.";

/// Default token budget for assembled context.
pub const DEFAULT_CONTEXT_BUDGET: usize = 2048;

/// Completion budgets: a letter for MCQ, a short free-form answer.
pub const MCQ_MAX_TOKENS: usize = 16;
pub const ANSWER_MAX_TOKENS: usize = 256;

const LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

fn block_of(item: &ContextItem) -> String {
    if item.section_path.is_empty() {
        format!("[[{}]]\n{}", item.doc_id, item.content)
    } else {
        format!("[[{} § {}]]\n{}", item.doc_id, item.section_path.join(" / "), item.content)
    }
}

/// Concatenate items in rank order under a greedy token budget.
///
/// Each item becomes a `[[doc_id § section path]]` header plus its
/// content (full Markdown for tables), blocks separated by blank lines.
/// Accumulation stops at the first item that would push the total past
/// `max_tokens`; the sole exception is an oversized first item, which is
/// included whole with a warning so the context is never empty when
/// anything was retrieved.
pub fn assemble_context(items: &[ContextItem], max_tokens: usize) -> String {
    assert!(max_tokens >= 128, "context budget must be at least 128 tokens");
    let mut blocks: Vec<String> = Vec::new();
    let mut total = 0usize;
    for (i, item) in items.iter().enumerate() {
        let block = block_of(item);
        let cost = count_tokens(&block);
        if i == 0 {
            if cost > max_tokens {
                log::warn!(
                    "context item '{}' alone costs {cost} tokens (budget {max_tokens}); \
                     including it whole",
                    item.source_passage_id
                );
            }
            total = cost;
            blocks.push(block);
            continue;
        }
        if total + cost > max_tokens {
            break;
        }
        total += cost;
        blocks.push(block);
    }
    blocks.join("\n\n")
}

/// Render the fixed multiple-choice template. Same inputs, same bytes.
pub fn build_mcq_prompt(item: &McqItem, context: &str) -> String {
    let mut prompt = format!(
        "{MCQ_PROMPT_HEADER}\n\nContext:\n{context}\n\nQuestion: {}\n",
        item.question
    );
    for (i, option) in item.options.iter().enumerate() {
        prompt.push(LETTERS[i]);
        prompt.push_str(". ");
        prompt.push_str(option);
        prompt.push('\n');
    }
    prompt.push_str(MCQ_DIRECTIVE);
    prompt
}

/// Render the free-form answer template. Same inputs, same bytes.
pub fn build_answer_prompt(question: &str, context: &str) -> String {
    format!(
        "{ANSWER_PROMPT_HEADER}\n\nContext:\n{context}\n\nQuestion: {question}\n\
         Answer in one or two sentences."
    )
}

/// Extract the chosen option from model text: the first standalone
/// letter (case-insensitive, non-alphanumeric on both sides) that maps
/// to a valid 0-based option index.
pub fn parse_mcq_answer(llm_text: &str, n_options: usize) -> Result<usize, RagError> {
    assert!((2..=5).contains(&n_options), "option count out of range");
    let chars: Vec<char> = llm_text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        let upper = c.to_ascii_uppercase();
        let Some(index) = LETTERS.iter().position(|l| *l == upper) else {
            continue;
        };
        if index >= n_options {
            continue;
        }
        let left_ok = i == 0 || !chars[i - 1].is_alphanumeric();
        let right_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if left_ok && right_ok {
            return Ok(index);
        }
    }
    Err(RagError::UnparseableAnswer(llm_text.to_string()))
}

/// Retrieve, assemble, prompt, and parse one multiple-choice item.
///
/// Always returns the retrieval run-log entry so grounding analysis can
/// proceed even when generation or parsing fails; the first slot carries
/// the predicted option index or the error that prevented one.
pub fn answer_mcq(
    item: &McqItem,
    retriever: &Retriever<'_>,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    k: usize,
    context_budget: usize,
) -> (Result<usize, RagError>, RunLogEntry) {
    assert!(k >= 1);
    let results = match retriever.retrieve_k(&item.question, k) {
        Ok(results) => results,
        Err(e) => return (Err(e.into()), retriever.log_entry(&item.item_id, k, Vec::new())),
    };
    let entry = retriever.log_entry(&item.item_id, k, results.clone());
    let prediction = (|| {
        let items = resolve_tables(&results, corpus)?;
        let context = assemble_context(&items, context_budget);
        let prompt = build_mcq_prompt(item, &context);
        let text = llm.generate(&prompt, MCQ_MAX_TOKENS)?;
        parse_mcq_answer(&text, item.options.len())
    })();
    (prediction, entry)
}

/// Retrieve, assemble, prompt, and return a free-form answer.
pub fn answer_question(
    question_id: &str,
    question: &str,
    retriever: &Retriever<'_>,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    k: usize,
    context_budget: usize,
) -> (Result<String, RagError>, RunLogEntry) {
    assert!(k >= 1);
    let results = match retriever.retrieve_k(question, k) {
        Ok(results) => results,
        Err(e) => return (Err(e.into()), retriever.log_entry(question_id, k, Vec::new())),
    };
    let entry = retriever.log_entry(question_id, k, results.clone());
    let answer = (|| {
        let items = resolve_tables(&results, corpus)?;
        let context = assemble_context(&items, context_budget);
        let prompt = build_answer_prompt(question, &context);
        Ok(llm.generate(&prompt, ANSWER_MAX_TOKENS)?)
    })();
    (answer, entry)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use crate::corpus::{Passage, TableRecord};
    use crate::index::build_sparse_index;
    use crate::rag::llm::{LlmError, MockLlm};
    use crate::rag::Difficulty;

    use super::*;

    fn item(doc: &str, path: &[&str], content: &str, table: bool) -> ContextItem {
        ContextItem {
            source_passage_id: format!("{doc}#src"),
            doc_id: doc.into(),
            section_path: path.iter().map(|s| s.to_string()).collect(),
            content: content.into(),
            is_table: table,
        }
    }

    #[test]
    fn small_items_appear_in_rank_order() {
        let items = vec![
            item("DOC-A", &["5", "5.1"], "first passage text", false),
            item("DOC-B", &[], "second passage text", false),
        ];
        let ctx = assemble_context(&items, 1024);
        assert_eq!(
            ctx,
            "[[DOC-A § 5 / 5.1]]\nfirst passage text\n\n[[DOC-B]]\nsecond passage text"
        );
    }

    #[test]
    fn greedy_budget_drops_the_tail() {
        let small = item("D", &["1"], "tiny", false);
        let big = item("D", &["2"], &"word ".repeat(200), false);
        let ctx = assemble_context(&[small.clone(), big.clone()], 128);
        assert!(ctx.contains("tiny"));
        assert!(!ctx.contains("word word"));
        // Stop means stop: a later item that would fit again is not pulled
        // forward past the one that overflowed.
        let after = item("D", &["3"], "afterthought", false);
        let ctx = assemble_context(&[small, big, after], 128);
        assert!(!ctx.contains("afterthought"));
    }

    #[test]
    fn oversized_first_item_is_kept_whole() {
        let rows: String = (0..300).map(|i| format!("| r{i} | v{i} |\n")).collect();
        let table = item("D", &["9"], &rows, true);
        let ctx = assemble_context(&[table], 128);
        assert!(ctx.contains("| r299 | v299 |"));
        assert!(count_tokens(&ctx) > 128);
    }

    #[test]
    fn fitted_context_respects_the_budget() {
        let items: Vec<ContextItem> =
            (0..50).map(|i| item("D", &[], &format!("passage number {i} body"), false)).collect();
        let ctx = assemble_context(&items, 128);
        assert!(count_tokens(&ctx) <= 128, "{}", count_tokens(&ctx));
        assert!(ctx.starts_with("[[D]]\npassage number 0 body"));
    }

    #[test]
    fn empty_items_make_an_empty_context() {
        assert_eq!(assemble_context(&[], 512), "");
    }

    fn mcq(options: &[&str], answer: usize) -> McqItem {
        McqItem {
            item_id: "m1".into(),
            difficulty: Difficulty::Easy,
            question: "Which value is correct?".into(),
            options: options.iter().map(|s| s.to_string()).collect(),
            answer_index: answer,
            gold_passage_id: None,
        }
    }

    #[test]
    fn mcq_prompt_has_each_letter_once() {
        let prompt = build_mcq_prompt(&mcq(&["w", "x", "y", "z"], 0), "ctx line");
        for letter in ["\nA. w", "\nB. x", "\nC. y", "\nD. z"] {
            assert_eq!(prompt.matches(letter).count(), 1, "{letter}");
        }
        assert!(!prompt.contains("\nE. "));
        assert!(prompt.starts_with(MCQ_PROMPT_HEADER));
        assert!(prompt.ends_with(MCQ_DIRECTIVE));
        assert!(prompt.contains("Context:\nctx line\n"));
    }

    #[test]
    fn mcq_prompt_zero_shot_keeps_the_template() {
        let prompt = build_mcq_prompt(&mcq(&["w", "x"], 0), "");
        assert!(prompt.contains("Context:\n\n\nQuestion: "));
    }

    #[test]
    fn prompts_are_byte_deterministic_and_input_sensitive() {
        let a = build_mcq_prompt(&mcq(&["w", "x"], 0), "ctx");
        let b = build_mcq_prompt(&mcq(&["w", "x"], 0), "ctx");
        assert_eq!(a, b);
        let mut other = mcq(&["w", "x"], 0);
        other.question = "A different question?".into();
        assert_ne!(a, build_mcq_prompt(&other, "ctx"));
        assert_ne!(a, build_mcq_prompt(&mcq(&["w", "x"], 0), "other ctx"));
    }

    #[test]
    fn answer_parsing_accepts_standalone_letters_only() {
        assert_eq!(parse_mcq_answer("B", 4).unwrap(), 1);
        assert_eq!(parse_mcq_answer("The answer is (c).", 4).unwrap(), 2);
        assert_eq!(parse_mcq_answer("b)", 4).unwrap(), 1);
        assert_eq!(parse_mcq_answer("  A", 2).unwrap(), 0);
        assert_eq!(parse_mcq_answer("I pick option D, final.", 4).unwrap(), 3);
        assert!(matches!(parse_mcq_answer("E", 4), Err(RagError::UnparseableAnswer(_))));
        assert!(matches!(parse_mcq_answer("BA", 4), Err(RagError::UnparseableAnswer(_))));
        assert!(matches!(parse_mcq_answer("", 4), Err(RagError::UnparseableAnswer(_))));
        assert!(matches!(
            parse_mcq_answer("no letter here", 2),
            Err(RagError::UnparseableAnswer(_))
        ));
        // Range gates the scan, not just the first letter seen.
        assert_eq!(parse_mcq_answer("E or rather B", 4).unwrap(), 1);
    }

    fn tiny_corpus() -> Corpus {
        let passages = vec![
            Passage::text_passage(
                "p1",
                "DOC-A",
                vec!["3".into()],
                "The radio frame lasts ten milliseconds in total.",
            ),
            Passage::text_passage(
                "p2",
                "DOC-A",
                vec!["4".into()],
                "Beam management procedures are described elsewhere.",
            ),
            Passage::new(
                "t1#caption",
                "DOC-A",
                vec!["5".into()],
                crate::corpus::PassageKind::TableCaption,
                "Numerology parameters per subcarrier spacing.",
                Some("t1".into()),
            ),
        ];
        let mut table = TableRecord {
            table_id: "t1".into(),
            doc_id: "DOC-A".into(),
            section_path: vec!["5".into()],
            caption: "Numerology parameters per subcarrier spacing.".into(),
            markdown: "| mu | spacing |\n| 0 | 15 kHz |\n| 1 | 30 kHz |".into(),
            summary: "Numerology parameters per subcarrier spacing.".into(),
            token_count: 0,
        };
        table.recount();
        Corpus {
            documents: BTreeMap::new(),
            passages,
            tables: [("t1".to_string(), table)].into(),
        }
    }

    #[test]
    fn answer_mcq_end_to_end_with_mock() {
        let corpus = tiny_corpus();
        let index = build_sparse_index(&corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 3);
        let item = McqItem {
            item_id: "m1".into(),
            difficulty: Difficulty::Easy,
            question: "How long does the radio frame last?".into(),
            options: vec!["five seconds".into(), "ten milliseconds".into(), "one hour".into()],
            answer_index: 1,
            gold_passage_id: Some("p1".into()),
        };
        let mock = MockLlm::new();
        let (prediction, entry) = answer_mcq(&item, &retriever, &corpus, &mock, 3, 512);
        assert_eq!(prediction.unwrap(), 1);
        assert_eq!(entry.query_id, "m1");
        assert!(!entry.results.is_empty());
        assert_eq!(entry.results[0].passage_id, "p1");
    }

    #[test]
    fn no_results_takes_the_zero_shot_path() {
        let corpus = tiny_corpus();
        let index = build_sparse_index(&corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 3);
        let item = mcq(&["alpha", "beta"], 0);
        let mut zero_shot = item.clone();
        zero_shot.question = "zzz qqq xxx".into();
        let mock = MockLlm::new();
        let (prediction, entry) = answer_mcq(&zero_shot, &retriever, &corpus, &mock, 3, 512);
        assert!(entry.results.is_empty());
        // Mock answers "A" when nothing overlaps.
        assert_eq!(prediction.unwrap(), 0);
    }

    struct FailLlm;
    impl LlmClient for FailLlm {
        fn generate(&self, _prompt: &str, _max_tokens: usize) -> Result<String, LlmError> {
            Err(LlmError::Transport("connection refused".into()))
        }
    }

    #[test]
    fn llm_failure_still_yields_the_run_log_entry() {
        let corpus = tiny_corpus();
        let index = build_sparse_index(&corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 2);
        let item = McqItem {
            item_id: "m9".into(),
            difficulty: Difficulty::Hard,
            question: "How long does the radio frame last?".into(),
            options: vec!["x".into(), "y".into()],
            answer_index: 0,
            gold_passage_id: None,
        };
        let (prediction, entry) = answer_mcq(&item, &retriever, &corpus, &FailLlm, 2, 512);
        assert!(matches!(prediction, Err(RagError::Llm(LlmError::Transport(_)))));
        assert_eq!(entry.query_id, "m9");
        assert!(!entry.results.is_empty());
    }

    #[test]
    fn table_hits_surface_markdown_in_the_prompt() {
        let corpus = tiny_corpus();
        let index = build_sparse_index(&corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 3);
        let results = retriever.retrieve("numerology subcarrier spacing parameters").unwrap();
        let items = resolve_tables(&results, &corpus).unwrap();
        let ctx = assemble_context(&items, 512);
        assert!(ctx.contains("| 1 | 30 kHz |"));
    }

    #[test]
    fn answer_question_echoes_context_via_mock() {
        let corpus = tiny_corpus();
        let index = build_sparse_index(&corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 2);
        let mock = MockLlm::new();
        let (answer, entry) = answer_question(
            "q1",
            "How long does the radio frame last?",
            &retriever,
            &corpus,
            &mock,
            2,
            512,
        );
        assert_eq!(answer.unwrap(), "The radio frame lasts ten milliseconds in total.");
        assert_eq!(entry.results[0].passage_id, "p1");
    }
}
