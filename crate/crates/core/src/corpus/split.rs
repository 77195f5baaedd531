//! Token-budget paragraph splitter with similarity-guided split points.
//!
//! Overlong paragraphs are divided at sentence boundaries. When a sentence
//! group exceeds the budget, the split point is the adjacent sentence pair
//! with the lowest similarity inside the overfull window, so that the cut
//! lands where the text changes topic.

use super::tokenize::{analysis_tokens, count_tokens, is_punct};

/// Output of [`split_paragraph`]: the chunks plus any degenerate-input
/// warnings (a single sentence longer than the whole budget).
#[derive(Debug, Clone, Default)]
pub struct SplitOutcome {
    pub chunks: Vec<String>,
    pub warnings: Vec<String>,
}

/// A sentence span inside the paragraph, with its token count.
struct Sentence {
    start: usize,
    end: usize,
    tokens: usize,
}

/// Split `paragraph` into sentence spans.
///
/// A boundary is a '.', '?', '!', or ';' followed by whitespace, except on
/// lines that form Markdown table rows (first non-space char '|'), which are
/// never split internally.
pub fn split_sentences(paragraph: &str) -> Vec<(usize, usize)> {
    let bytes = paragraph.as_bytes();
    let mut spans = Vec::new();
    let mut sent_start: Option<usize> = None;
    let mut in_table_row = false;
    let mut at_line_start = true;

    let mut iter = paragraph.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c == '\n' {
            at_line_start = true;
            in_table_row = false;
            continue;
        }
        if at_line_start && !c.is_whitespace() {
            in_table_row = c == '|';
            at_line_start = false;
        }
        if c.is_whitespace() {
            continue;
        }
        if sent_start.is_none() {
            sent_start = Some(i);
        }
        if matches!(c, '.' | '?' | '!' | ';') && !in_table_row {
            let next_is_ws = match iter.peek() {
                Some((_, nc)) => nc.is_whitespace(),
                None => true,
            };
            if next_is_ws {
                let end = i + c.len_utf8();
                spans.push((sent_start.take().unwrap(), end));
            }
        }
    }
    if let Some(start) = sent_start {
        // Trailing sentence without terminal punctuation.
        let mut end = bytes.len();
        while end > start && paragraph[..end].ends_with(char::is_whitespace) {
            end -= paragraph[..end].chars().next_back().unwrap().len_utf8();
        }
        if end > start {
            spans.push((start, end));
        }
    }
    spans
}

/// Split a paragraph into chunks of at most `limit` tokens.
///
/// Splits happen only at sentence boundaries; within a chunk the original
/// bytes are preserved. The concatenated token sequence of all chunks equals
/// the paragraph's token sequence. A single sentence that alone exceeds the
/// budget is hard-split at the limit and reported in `warnings`.
///
/// `similarity` scores adjacent sentence pairs; lower means a better place
/// to cut. Ties pick the earliest boundary.
pub fn split_paragraph<F>(paragraph: &str, limit: usize, similarity: F) -> SplitOutcome
where
    F: Fn(&str, &str) -> f64,
{
    assert!(limit >= 16, "split limit must be at least 16 tokens");
    let sentences: Vec<Sentence> = split_sentences(paragraph)
        .into_iter()
        .map(|(start, end)| Sentence {
            start,
            end,
            tokens: count_tokens(&paragraph[start..end]),
        })
        .collect();

    let mut out = SplitOutcome::default();
    if sentences.is_empty() {
        return out;
    }
    split_window(paragraph, &sentences, limit, &similarity, &mut out);
    out
}

fn split_window<F>(
    paragraph: &str,
    window: &[Sentence],
    limit: usize,
    similarity: &F,
    out: &mut SplitOutcome,
) where
    F: Fn(&str, &str) -> f64,
{
    let total: usize = window.iter().map(|s| s.tokens).sum();
    if total <= limit {
        let start = window.first().unwrap().start;
        let end = window.last().unwrap().end;
        out.chunks.push(paragraph[start..end].to_string());
        return;
    }
    if window.len() == 1 {
        let s = &window[0];
        out.warnings.push(format!(
            "sentence of {} tokens exceeds the {}-token limit; hard-splitting",
            s.tokens, limit
        ));
        hard_split(&paragraph[s.start..s.end], limit, &mut out.chunks);
        return;
    }
    // Pick the adjacent pair with minimal similarity inside this window.
    let mut best = 0usize;
    let mut best_sim = f64::INFINITY;
    for i in 0..window.len() - 1 {
        let a = &paragraph[window[i].start..window[i].end];
        let b = &paragraph[window[i + 1].start..window[i + 1].end];
        let sim = similarity(a, b);
        if sim < best_sim {
            best_sim = sim;
            best = i;
        }
    }
    split_window(paragraph, &window[..=best], limit, similarity, out);
    split_window(paragraph, &window[best + 1..], limit, similarity, out);
}

/// Hard-split one overlong sentence into chunks of at most `limit` tokens,
/// packing whole words greedily. A word whose own token count exceeds the
/// budget (a long punctuation run) is exploded at punctuation boundaries,
/// which preserves the token sequence because each edge punctuation char is
/// its own token.
fn hard_split(sentence: &str, limit: usize, chunks: &mut Vec<String>) {
    let mut current = String::new();
    let mut current_tokens = 0usize;

    let push_atom = |atom: &str, chunks: &mut Vec<String>, current: &mut String, current_tokens: &mut usize| {
        let cost = count_tokens(atom);
        if *current_tokens + cost > limit && !current.is_empty() {
            chunks.push(std::mem::take(current));
            *current_tokens = 0;
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(atom);
        *current_tokens += cost;
    };

    for word in sentence.split_whitespace() {
        if count_tokens(word) <= limit {
            push_atom(word, chunks, &mut current, &mut current_tokens);
        } else {
            for atom in explode_word(word) {
                push_atom(&atom, chunks, &mut current, &mut current_tokens);
            }
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
}

/// Break a word into its token-level pieces: each leading/trailing
/// punctuation char on its own, the core as one piece.
fn explode_word(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && is_punct(chars[start]) {
        start += 1;
    }
    while end > start && is_punct(chars[end - 1]) {
        end -= 1;
    }
    let mut atoms = Vec::new();
    for &c in &chars[..start] {
        atoms.push(c.to_string());
    }
    if start < end {
        atoms.push(chars[start..end].iter().collect());
    }
    for &c in &chars[end..] {
        atoms.push(c.to_string());
    }
    atoms
}

/// Token-overlap Jaccard similarity between two sentences, used as the
/// offline split-point heuristic when no embedding provider is configured.
pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    use std::collections::BTreeSet;
    let sa: BTreeSet<String> = analysis_tokens(a).into_iter().collect();
    let sb: BTreeSet<String> = analysis_tokens(b).into_iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::tokenize;

    fn flat_tokens(chunks: &[String]) -> Vec<String> {
        chunks.iter().flat_map(|c| tokenize(c)).collect()
    }

    #[test]
    fn sentence_segmentation_basic() {
        let spans = split_sentences("First one. Second one? Third");
        let text = "First one. Second one? Third";
        let sentences: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(sentences, vec!["First one.", "Second one?", "Third"]);
    }

    #[test]
    fn no_split_inside_table_rows() {
        let text = "| a. b | c. d |\n| 1. 2 | 3. 4 |";
        let spans = split_sentences(text);
        assert_eq!(spans.len(), 1, "table rows must stay whole: {spans:?}");
    }

    #[test]
    fn under_limit_is_identity() {
        let para = "Short sentence one. Short sentence  two."; // double space kept
        let out = split_paragraph(para, 512, jaccard_similarity);
        assert_eq!(out.chunks, vec![para.to_string()]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn overlong_paragraph_splits_under_limit() {
        // ~1030 tokens across many sentences, limit 512 -> at least 3 chunks.
        let sentence = |i: usize| format!("Sentence {i} has exactly seven word tokens here.");
        let para: String = (0..129).map(sentence).collect::<Vec<_>>().join(" ");
        assert!(count_tokens(&para) > 1024);
        let out = split_paragraph(&para, 512, jaccard_similarity);
        assert!(out.chunks.len() >= 3);
        for c in &out.chunks {
            assert!(count_tokens(c) <= 512);
        }
        assert_eq!(flat_tokens(&out.chunks), tokenize(&para));
    }

    #[test]
    fn minimal_similarity_boundary_is_chosen() {
        // Four sentences; the custom similarity makes (s2, s3) strictly
        // minimal. Enumerating the three possible boundaries confirms the
        // splitter picks the minimal-similarity one.
        let s = [
            "alpha alpha alpha alpha alpha alpha.",
            "beta beta beta beta beta beta.",
            "gamma gamma gamma gamma gamma gamma.",
            "delta delta delta delta delta delta.",
        ];
        let para = s.join(" ");
        let sim = |a: &str, b: &str| -> f64 {
            if a.starts_with("beta") && b.starts_with("gamma") {
                0.05
            } else {
                0.9
            }
        };
        // Oracle: among all adjacent pairs, (s2, s3) has minimal similarity.
        let pairs = [(0, 1), (1, 2), (2, 3)];
        let min_pair = pairs
            .iter()
            .min_by(|x, y| sim(s[x.0], s[x.1]).partial_cmp(&sim(s[y.0], s[y.1])).unwrap())
            .unwrap();
        assert_eq!(*min_pair, (1, 2));

        let limit = 16; // total 28 tokens, each half 14 <= 16
        let out = split_paragraph(&para, limit, sim);
        assert_eq!(out.chunks.len(), 2);
        assert!(out.chunks[0].ends_with("beta."));
        assert!(out.chunks[1].starts_with("gamma"));
    }

    #[test]
    fn giant_sentence_hard_splits_with_warning() {
        let sentence = format!("{} end.", "token ".repeat(50).trim());
        let out = split_paragraph(&sentence, 16, |_, _| 1.0);
        assert!(!out.warnings.is_empty());
        for c in &out.chunks {
            assert!(count_tokens(c) <= 16);
        }
        assert_eq!(flat_tokens(&out.chunks), tokenize(&sentence));
    }

    #[test]
    fn punctuation_run_word_is_exploded_losslessly() {
        let word = format!("({}start", "!".repeat(40));
        let para = format!("{word} tail words here.");
        let out = split_paragraph(&para, 16, jaccard_similarity);
        for c in &out.chunks {
            assert!(count_tokens(c) <= 16, "chunk too long: {c:?}");
        }
        assert_eq!(flat_tokens(&out.chunks), tokenize(&para));
    }

    #[test]
    fn jaccard_edge_cases() {
        assert_eq!(jaccard_similarity("", ""), 1.0);
        assert_eq!(jaccard_similarity("a b", ""), 0.0);
        assert_eq!(jaccard_similarity("a b", "a b"), 1.0);
        assert!(jaccard_similarity("a b c d", "c d e f") > 0.0);
    }

    #[test]
    fn empty_paragraph_yields_no_chunks() {
        let out = split_paragraph("   ", 512, jaccard_similarity);
        assert!(out.chunks.is_empty());
    }
}
