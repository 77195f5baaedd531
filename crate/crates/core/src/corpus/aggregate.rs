//! Merging of undersized adjacent passages.
//!
//! Splitting long paragraphs fixes the upper bound on passage size; this
//! pass fixes the lower end. Runs of consecutive short text passages from
//! the same document section are concatenated so that retrieval units carry
//! enough context to embed meaningfully, without ever crossing a section
//! boundary or the hard token limit.

use super::{count_tokens, Passage, PassageKind};

/// Merge runs of short consecutive text passages that share a document and
/// section path.
///
/// The accumulator keeps absorbing the next passage while the joined text
/// stays within `limit` tokens and at least one side of the merge is still
/// under `min_tokens`. Non-text passages and section changes flush the
/// accumulator. A merged passage keeps the id of its first constituent and
/// joins texts with a single newline. Input order is preserved.
///
/// The output is a fixed point: running the pass again returns it unchanged.
pub fn aggregate_short(passages: Vec<Passage>, min_tokens: usize, limit: usize) -> Vec<Passage> {
    assert!(
        min_tokens < limit,
        "min_tokens ({min_tokens}) must be below the token limit ({limit})"
    );

    let mut out: Vec<Passage> = Vec::with_capacity(passages.len());
    let mut acc: Option<Passage> = None;

    for next in passages {
        if next.kind != PassageKind::Text {
            if let Some(a) = acc.take() {
                out.push(a);
            }
            out.push(next);
            continue;
        }
        match acc.take() {
            None => acc = Some(next),
            Some(mut cur) => {
                let same_place =
                    cur.doc_id == next.doc_id && cur.section_path == next.section_path;
                let either_short = cur.token_count < min_tokens || next.token_count < min_tokens;
                if same_place && either_short {
                    let joined = format!("{}\n{}", cur.text, next.text);
                    if count_tokens(&joined) <= limit {
                        cur.text = joined;
                        cur.recount();
                        acc = Some(cur);
                        continue;
                    }
                }
                out.push(cur);
                acc = Some(next);
            }
        }
    }
    if let Some(a) = acc.take() {
        out.push(a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(id: &str, section: &str, words: usize) -> Passage {
        let body = (0..words).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        Passage::text_passage(id, "D1", vec![section.to_string()], body)
    }

    #[test]
    fn merges_two_short_neighbours() {
        let before = vec![text("p1", "s", 20), text("p2", "s", 20)];
        let after = aggregate_short(before, 64, 512);
        assert_eq!(after.len(), 1);
        assert_eq!(after[0].passage_id, "p1");
        assert_eq!(after[0].token_count, 40);
        assert!(after[0].text.contains('\n'));
    }

    #[test]
    fn different_sections_never_merge() {
        let before = vec![text("p1", "s1", 20), text("p2", "s2", 20)];
        let after = aggregate_short(before.clone(), 64, 512);
        assert_eq!(after, before);
    }

    #[test]
    fn merge_is_skipped_when_limit_would_be_crossed() {
        let before = vec![text("p1", "s", 300), text("p2", "s", 250)];
        let after = aggregate_short(before.clone(), 400, 512);
        // Both are below min_tokens=400 but 300 + 250 + newline join > 512.
        assert_eq!(after, before);
    }

    #[test]
    fn two_long_passages_stay_apart() {
        let before = vec![text("p1", "s", 100), text("p2", "s", 100)];
        let after = aggregate_short(before.clone(), 64, 512);
        assert_eq!(after, before);
    }

    #[test]
    fn run_of_shorts_collapses_into_one() {
        let before = vec![
            text("p1", "s", 10),
            text("p2", "s", 10),
            text("p3", "s", 10),
            text("p4", "s", 10),
        ];
        let after = aggregate_short(before, 64, 512);
        assert_eq!(after.len(), 1);
        assert_eq!(after[0].token_count, 40);
        assert_eq!(after[0].passage_id, "p1");
    }

    #[test]
    fn table_proxy_flushes_the_accumulator() {
        let caption = Passage::new(
            "t1#caption",
            "D1",
            vec!["s".into()],
            PassageKind::TableCaption,
            "A table caption",
            Some("t1".into()),
        );
        let before = vec![text("p1", "s", 10), caption.clone(), text("p2", "s", 10)];
        let after = aggregate_short(before, 64, 512);
        assert_eq!(after.len(), 3);
        assert_eq!(after[1], caption);
    }

    #[test]
    fn aggregation_is_idempotent() {
        let before = vec![
            text("p1", "s", 10),
            text("p2", "s", 70),
            text("p3", "s", 10),
            text("p4", "other", 5),
            text("p5", "other", 200),
        ];
        let once = aggregate_short(before, 64, 512);
        let twice = aggregate_short(once.clone(), 64, 512);
        assert_eq!(once, twice);
    }

    #[test]
    fn token_counts_are_recomputed_exactly() {
        let before = vec![text("p1", "s", 33), text("p2", "s", 31)];
        let after = aggregate_short(before, 64, 512);
        assert_eq!(after[0].token_count, count_tokens(&after[0].text));
        assert_eq!(after[0].token_count, 64);
    }

    #[test]
    #[should_panic(expected = "min_tokens")]
    fn min_tokens_must_stay_below_limit() {
        aggregate_short(vec![], 512, 512);
    }
}
