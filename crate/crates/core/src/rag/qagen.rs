//! Synthetic QA-pair generation from passages via the LLM client, plus
//! the mechanical post-filter.
//!
//! The generation prompt is a versioned asset compiled into the binary,
//! so regenerating a training set with the same model and corpus yields
//! the same prompts byte for byte.

use std::collections::BTreeSet;

use crate::corpus::tokenize::{analysis_tokens, count_tokens};
use crate::corpus::{Corpus, Passage};

use super::llm::LlmClient;
use super::{QAPair, QaSplit, RagError};

/// The versioned question-generation prompt template. `{max_q}` and
/// `{passage}` are substituted at build time.
pub const QA_PROMPT_TEMPLATE: &str = include_str!("../../assets/qa_generation_prompt.txt");

/// Leading bytes of the template; clients key template recognition and
/// the pair-count parse on this prefix.
pub const QA_PROMPT_PREFIX: &str = "Generate up to ";

/// Completion budget for a batch of generated pairs.
pub const QA_GEN_MAX_TOKENS: usize = 512;

/// Render the generation prompt for one passage. Passages that proxy a
/// table get the full table Markdown appended, so questions can target
/// cell contents.
pub fn build_qa_prompt(
    passage: &Passage,
    corpus: &Corpus,
    max_q: usize,
) -> Result<String, RagError> {
    assert!((1..=5).contains(&max_q), "max_q must be between 1 and 5");
    let mut content = passage.text.clone();
    if let Some(table_id) = &passage.table_id {
        let table = corpus.table(table_id).ok_or_else(|| RagError::DanglingTable {
            passage_id: passage.passage_id.clone(),
            table_id: table_id.clone(),
        })?;
        content.push_str("\n\nTable (Markdown):\n");
        content.push_str(&table.markdown);
    }
    Ok(QA_PROMPT_TEMPLATE
        .replacen("{max_q}", &max_q.to_string(), 1)
        .replacen("{passage}", &content, 1))
}

/// Parse numbered `N. Q: ... / A: ...` blocks out of model text.
/// Malformed blocks are skipped with a warning; order is preserved.
fn parse_qa_blocks(text: &str) -> Vec<(String, String)> {
    #[derive(PartialEq)]
    enum Part {
        Outside,
        Question,
        Answer,
    }

    fn block_start(line: &str) -> Option<&str> {
        let trimmed = line.trim_start();
        let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            return None;
        }
        let rest = &trimmed[digits..];
        rest.strip_prefix(['.', ')']).map(str::trim_start)
    }

    let mut pairs = Vec::new();
    let mut question = String::new();
    let mut answer = String::new();
    let mut part = Part::Outside;

    let mut finalize = |question: &mut String, answer: &mut String, part: &mut Part| {
        if *part != Part::Outside {
            let q = question.trim();
            let a = answer.trim();
            if !q.is_empty() && !a.is_empty() {
                pairs.push((q.to_string(), a.to_string()));
            } else {
                log::warn!("skipping malformed QA block (question {q:?})");
            }
        }
        question.clear();
        answer.clear();
        *part = Part::Outside;
    };

    for line in text.lines() {
        if let Some(rest) = block_start(line) {
            finalize(&mut question, &mut answer, &mut part);
            match rest.strip_prefix("Q:") {
                Some(q) => {
                    question.push_str(q.trim());
                    part = Part::Question;
                }
                None => log::warn!("skipping numbered block without a question: {line:?}"),
            }
            continue;
        }
        let trimmed = line.trim();
        match part {
            Part::Question => {
                if let Some(a) = trimmed.strip_prefix("A:") {
                    answer.push_str(a.trim());
                    part = Part::Answer;
                } else if !trimmed.is_empty() {
                    question.push(' ');
                    question.push_str(trimmed);
                }
            }
            Part::Answer => {
                if !trimmed.is_empty() {
                    answer.push(' ');
                    answer.push_str(trimmed);
                }
            }
            Part::Outside => {}
        }
    }
    finalize(&mut question, &mut answer, &mut part);
    pairs
}

/// Generate up to `max_q` QA pairs grounded in one passage.
///
/// Pair ids are `{passage_id}#q{n}` with `n` counting accepted pairs
/// from 1, and every pair is stamped with the source passage id and the
/// train split.
pub fn generate_qa_pairs(
    passage: &Passage,
    corpus: &Corpus,
    llm: &dyn LlmClient,
    max_q: usize,
) -> Result<Vec<QAPair>, RagError> {
    let prompt = build_qa_prompt(passage, corpus, max_q)?;
    let text = llm.generate(&prompt, QA_GEN_MAX_TOKENS)?;
    Ok(parse_qa_blocks(&text)
        .into_iter()
        .take(max_q)
        .enumerate()
        .map(|(i, (question, answer))| QAPair {
            question_id: format!("{}#q{}", passage.passage_id, i + 1),
            question,
            answer,
            passage_id: passage.passage_id.clone(),
            split: QaSplit::Train,
        })
        .collect())
}

/// Drop pairs failing the mechanical quality rules: questions shorter
/// than 5 or longer than 64 tokens, case-folded duplicate questions
/// (first survivor wins), and answers sharing no content token with
/// their source passage (table Markdown counts as passage content for
/// table proxies). Pairs whose passage id no longer resolves are also
/// dropped.
pub fn filter_qa_pairs(pairs: &[QAPair], corpus: &Corpus) -> Vec<QAPair> {
    let mut seen_questions: BTreeSet<String> = BTreeSet::new();
    let mut kept = Vec::new();
    for pair in pairs {
        let Some(passage) = corpus.passage(&pair.passage_id) else {
            log::warn!("dropping '{}': unknown passage '{}'", pair.question_id, pair.passage_id);
            continue;
        };
        let question_tokens = count_tokens(&pair.question);
        if !(5..=64).contains(&question_tokens) {
            log::warn!(
                "dropping '{}': question has {question_tokens} tokens",
                pair.question_id
            );
            continue;
        }
        let mut source = passage.text.clone();
        if let Some(table) = passage.table_id.as_ref().and_then(|id| corpus.table(id)) {
            source.push('\n');
            source.push_str(&table.markdown);
        }
        let source_tokens: BTreeSet<String> = analysis_tokens(&source).into_iter().collect();
        let overlap = analysis_tokens(&pair.answer)
            .into_iter()
            .any(|t| source_tokens.contains(&t));
        if !overlap {
            log::warn!("dropping '{}': answer shares no token with passage", pair.question_id);
            continue;
        }
        let folded = pair.question.to_lowercase();
        if !seen_questions.insert(folded) {
            log::warn!("dropping '{}': duplicate question", pair.question_id);
            continue;
        }
        kept.push(pair.clone());
    }
    kept
}
