//! Corpus tokenizer: lowercase, whitespace-split, edge punctuation split off.
//!
//! The token budget for passages (512) and every token count in the corpus
//! pipeline are defined in terms of this tokenizer. It is deterministic and
//! language-agnostic: no vocabulary, no model download.

/// A character that counts as punctuation for tokenization purposes.
///
/// Anything that is neither alphanumeric nor whitespace. This covers ASCII
/// punctuation as well as Unicode dashes, quotes, and symbols.
pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Tokenize text: lowercase, split on Unicode whitespace, then split off
/// leading/trailing punctuation characters as separate single-char tokens.
///
/// Interior punctuation stays attached ("3.5" and "don't" are one token each).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            out.push(c.to_string());
        }
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        for &c in &chars[end..] {
            out.push(c.to_string());
        }
    }
    out
}

/// Number of tokens in `text`. Zero only for empty/whitespace-only input.
pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

/// Analysis tokens for indexing and lexical overlap: the corpus tokens with
/// pure-punctuation tokens dropped.
pub fn analysis_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !t.chars().all(is_punct))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_has_zero_tokens() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("   \t\n "), 0);
    }

    #[test]
    fn whitespace_delimited_words() {
        assert_eq!(count_tokens("gNB transmits SSB"), 3);
        assert_eq!(tokenize("gNB transmits SSB"), vec!["gnb", "transmits", "ssb"]);
    }

    #[test]
    fn edge_punctuation_becomes_separate_tokens() {
        assert_eq!(tokenize("(hello),"), vec!["(", "hello", ")", ","]);
        assert_eq!(tokenize("end)."), vec!["end", ")", "."]);
    }

    #[test]
    fn interior_punctuation_stays_attached() {
        assert_eq!(tokenize("3.5 don't"), vec!["3.5", "don't"]);
    }

    #[test]
    fn pure_punctuation_word() {
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
    }

    #[test]
    fn analysis_drops_punctuation_tokens() {
        assert_eq!(analysis_tokens("the cat, sat."), vec!["the", "cat", "sat"]);
        assert!(analysis_tokens("...").is_empty());
    }

    #[test]
    fn deterministic() {
        let text = "The UE shall apply §7.2, Table 5-1 (NR).";
        assert_eq!(tokenize(text), tokenize(text));
    }
}
