//! Seeded synthetic fixtures: a corpus whose questions lexically overlap
//! their gold passages, with matching QA pairs and MCQ items.
//!
//! Every passage carries three globally unique signal tokens plus shared
//! noise vocabulary drawn from a seeded RNG, so sparse and dense
//! retrievers have real work to do: signals identify the gold passage,
//! noise makes everything else look plausible. The same seed always
//! produces the same fixture, byte for byte.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::summarize::fallback_summary;
use crate::corpus::{
    Corpus, DocumentRecord, Passage, PassageKind, SectionTitle, TableRecord,
};
use crate::rag::{Difficulty, McqItem, QAPair, QaSplit};

/// Shared noise vocabulary; small on purpose so passages collide on it.
const NOISE: [&str; 40] = [
    "system", "network", "frame", "channel", "signal", "control", "power", "data", "layer",
    "protocol", "bearer", "carrier", "spectrum", "antenna", "uplink", "downlink", "scheduling",
    "handover", "mobility", "session", "interface", "node", "gateway", "timer", "window",
    "offset", "margin", "budget", "capacity", "coverage", "latency", "throughput", "priority",
    "resource", "block", "symbol", "slot", "grid", "band", "mode",
];

/// Keeps raw-only passage noise independent of the clause passages.
const RAW_SALT: u64 = 0x7a3b_91c4_d02e_55f8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub passages_per_doc: usize,
    pub tables_per_doc: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_docs: 10, passages_per_doc: 20, tables_per_doc: 1, seed: 7 }
    }
}

impl SynthConfig {
    /// The 200-passage, table-free fixture used to measure the
    /// fine-tuning effect.
    pub fn fine_tune() -> Self {
        SynthConfig { tables_per_doc: 0, ..Self::default() }
    }

    fn n_passages(&self) -> usize {
        self.n_docs * self.passages_per_doc
    }
}

/// A complete synthetic evaluation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub train_pairs: Vec<QAPair>,
    pub eval_pairs: Vec<QAPair>,
    pub mcq_items: Vec<McqItem>,
}

fn sig(i: usize, role: char) -> String {
    format!("qx{i:03}{role}")
}

fn pick(rng: &mut ChaCha8Rng) -> &'static str {
    NOISE[rng.gen_range(0..NOISE.len())]
}

fn doc_id(d: usize) -> String {
    format!("SYN-{d:02}")
}

fn passage_id(d: usize, j: usize) -> String {
    format!("SYN-{d:02}#p{j:03}")
}

struct Parts {
    documents: BTreeMap<String, DocumentRecord>,
    passages: Vec<Passage>,
    tables: Vec<TableRecord>,
    train_pairs: Vec<QAPair>,
    eval_pairs: Vec<QAPair>,
    mcq_items: Vec<McqItem>,
}

fn build_parts(config: &SynthConfig) -> Parts {
    assert!(config.n_docs >= 1 && config.passages_per_doc >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_passages();

    let mut documents = BTreeMap::new();
    let mut passages = Vec::with_capacity(n);
    let mut tables = Vec::new();
    let mut train_pairs = Vec::with_capacity(n);
    let mut eval_pairs = Vec::with_capacity(n);
    let mut mcq_items = Vec::new();

    for d in 0..config.n_docs {
        let doc = doc_id(d);
        let mut section_titles: Vec<SectionTitle> = vec![
            SectionTitle { number: "1".into(), title: "Overview".into(), depth: 1 },
            SectionTitle { number: "2".into(), title: "Scope".into(), depth: 1 },
        ];
        for j in 0..config.passages_per_doc {
            section_titles.push(SectionTitle {
                number: format!("{}", j + 3),
                title: format!("Clause {}", j + 3),
                depth: 1,
            });
        }
        if config.tables_per_doc > 0 {
            section_titles.push(SectionTitle {
                number: format!("{}", config.passages_per_doc + 3),
                title: "Tables".into(),
                depth: 1,
            });
        }
        documents.insert(
            doc.clone(),
            DocumentRecord {
                doc_id: doc.clone(),
                title: format!("Synthetic radio specification volume {d:02}"),
                abstract_text: format!(
                    "Signalling and configuration rules for the qx-series parameters, \
                     volume {d:02}."
                ),
                release: format!("Rel-{}", 15 + d % 4),
                section_titles,
            },
        );

        for j in 0..config.passages_per_doc {
            let i = d * config.passages_per_doc + j;
            let (a, b, c) = (sig(i, 'a'), sig(i, 'b'), sig(i, 'c'));
            let text = format!(
                "The {a} parameter governs the {b} threshold during {c} operation. \
                 It applies to {} {} and {} procedures across the {} {} {} layer. \
                 Operators shall observe {} {} limits when the {} {} mode is active \
                 in {} {} deployments. Tuning {a} adjusts the {b} margin while {c} \
                 stays enabled.",
                pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng),
                pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng),
                pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng),
            );
            let pid = passage_id(d, j);
            passages.push(Passage::text_passage(
                pid.clone(),
                doc.clone(),
                vec![format!("{}", j + 3)],
                text,
            ));

            let train_question = format!(
                "How does the {a} parameter affect the {b} threshold when \
                 conditions change?",
            );
            train_pairs.push(QAPair {
                question_id: format!("{pid}#train"),
                question: train_question,
                answer: format!("The {a} parameter governs the {b} threshold."),
                passage_id: pid.clone(),
                split: QaSplit::Train,
            });

            let eval_question = format!(
                "How does the {a} setting affect the {b} threshold when \
                 conditions shift?",
            );
            eval_pairs.push(QAPair {
                question_id: format!("{pid}#test"),
                question: eval_question.clone(),
                answer: format!("The {b} threshold is set by {a}."),
                passage_id: pid.clone(),
                split: QaSplit::Test,
            });

            if j < 2 && n >= 8 {
                mcq_items.push(mcq_item(i, d, j, &eval_question, config));
            }
        }

        for t in 0..config.tables_per_doc {
            let base = d * config.passages_per_doc;
            let caption = format!(
                "Configuration limits for the {} parameter family.",
                sig(base, 'a')
            );
            let markdown = format!(
                "| parameter | limit |\n| {} | {} |\n| {} | {} |\n| {} | {} |",
                sig(base, 'a'),
                100 + d,
                sig((base + 1).min(n - 1), 'a'),
                200 + d,
                sig((base + 2).min(n - 1), 'a'),
                300 + d,
            );
            let mut table = TableRecord {
                table_id: format!("{doc}#tab{}", t + 1),
                doc_id: doc.clone(),
                section_path: vec![format!("{}", config.passages_per_doc + 3)],
                caption,
                markdown,
                summary: String::new(),
                token_count: 0,
            };
            table.recount();
            tables.push(table);
        }
    }

    Parts { documents, passages, tables, train_pairs, eval_pairs, mcq_items }
}

fn mcq_item(i: usize, d: usize, j: usize, question: &str, config: &SynthConfig) -> McqItem {
    let n = config.n_passages();
    let option_for = |k: usize| {
        format!("the {} threshold during {} operation", sig(k, 'b'), sig(k, 'c'))
    };
    let answer_index = i % 4;
    let mut distractors = [(i + 7) % n, (i + 29) % n, (i + 63) % n];
    debug_assert!(distractors.iter().all(|k| *k != i));
    distractors.sort_unstable();
    let mut options: Vec<String> = distractors.iter().map(|k| option_for(*k)).collect();
    options.insert(answer_index.min(options.len()), option_for(i));
    let difficulty = match i % 3 {
        0 => Difficulty::Easy,
        1 => Difficulty::Intermediate,
        _ => Difficulty::Hard,
    };
    McqItem {
        item_id: format!("mcq{i:03}"),
        difficulty,
        question: question.to_string(),
        options,
        answer_index,
        gold_passage_id: Some(passage_id(d, j)),
    }
}

/// Build the ready-to-index fixture: conforming corpus (tables summarized
/// and proxied), train/eval QA pairs, and MCQ items.
pub fn synthetic_fixture(config: &SynthConfig) -> SyntheticData {
    let parts = build_parts(config);
    let mut passages = parts.passages;
    let mut tables = BTreeMap::new();
    for mut table in parts.tables {
        table.summary = fallback_summary(&table);
        table.recount();
        passages.push(Passage::new(
            format!("{}#caption", table.table_id),
            table.doc_id.clone(),
            table.section_path.clone(),
            PassageKind::TableCaption,
            table.caption.clone(),
            Some(table.table_id.clone()),
        ));
        passages.push(Passage::new(
            format!("{}#summary", table.table_id),
            table.doc_id.clone(),
            table.section_path.clone(),
            PassageKind::TableSummary,
            table.summary.clone(),
            Some(table.table_id.clone()),
        ));
        tables.insert(table.table_id.clone(), table);
    }
    let corpus = Corpus { documents: parts.documents, passages, tables };
    corpus.validate(true).expect("generated fixture must be strictly valid");
    SyntheticData {
        corpus,
        train_pairs: parts.train_pairs,
        eval_pairs: parts.eval_pairs,
        mcq_items: parts.mcq_items,
    }
}

/// Build the pre-ingestion variant of the same fixture: identical clause
/// passages plus, per document, one overlong overview passage (must be
/// split) and two sub-minimum fragments in a shared section (must be
/// aggregated); tables arrive uncaptioned-in-passage-form and
/// unsummarized. QA pairs and MCQ items from [`synthetic_fixture`] keep
/// resolving after ingestion because clause passages sit in unique
/// sections and keep their ids.
pub fn raw_fixture(config: &SynthConfig) -> Corpus {
    let parts = build_parts(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ RAW_SALT);
    let mut passages = Vec::new();
    for d in 0..config.n_docs {
        let doc = doc_id(d);
        let mut overview = String::new();
        for s in 0..80 {
            overview.push_str(&format!(
                "Overview sentence {s} covers {} {} and {} {} behaviour. ",
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
            ));
        }
        passages.push(Passage::text_passage(
            format!("{doc}#intro"),
            doc.clone(),
            vec!["1".into()],
            overview.trim_end(),
        ));
        passages.push(Passage::text_passage(
            format!("{doc}#frag0"),
            doc.clone(),
            vec!["2".into()],
            format!("Scope note for volume {d:02}."),
        ));
        passages.push(Passage::text_passage(
            format!("{doc}#frag1"),
            doc.clone(),
            vec!["2".into()],
            format!("Applies to the {} {} layer.", pick(&mut rng), pick(&mut rng)),
        ));
        passages.extend(parts.passages.iter().filter(|p| p.doc_id == doc).cloned());
    }
    let tables: BTreeMap<String, TableRecord> =
        parts.tables.into_iter().map(|t| (t.table_id.clone(), t)).collect();
    let corpus = Corpus { documents: parts.documents, passages, tables };
    corpus.validate(false).expect("raw fixture must be structurally valid");
    corpus
}

/// `n` space-separated words drawn from a `vocab`-sized closed
/// vocabulary: handy for randomized oracle corpora.
pub fn random_words(rng: &mut ChaCha8Rng, vocab: usize, n: usize) -> String {
    assert!(vocab >= 1);
    let words: Vec<String> = (0..n).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
    words.join(" ")
}

/// A paragraph of `sentences` random sentences with mixed terminators,
/// for splitter stress tests.
pub fn random_paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    let mut out = String::new();
    for s in 0..sentences {
        let n = rng.gen_range(3..14);
        out.push_str(&random_words(rng, 600, n));
        out.push(match rng.gen_range(0..4) {
            0 => '?',
            1 => '!',
            2 => ';',
            _ => '.',
        });
        if s + 1 < sentences {
            out.push(' ');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use crate::corpus::{analysis_tokens, count_tokens, PASSAGE_TOKEN_LIMIT};
    use crate::index::build_sparse_index;
    use crate::retrieve::Retriever;

    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        let a = synthetic_fixture(&SynthConfig::default());
        let b = synthetic_fixture(&SynthConfig::default());
        assert_eq!(a, b);
        let c = synthetic_fixture(&SynthConfig { seed: 8, ..SynthConfig::default() });
        assert_ne!(a.corpus.passages[0].text, c.corpus.passages[0].text);
    }

    #[test]
    fn fine_tune_preset_has_exactly_200_text_passages() {
        let data = synthetic_fixture(&SynthConfig::fine_tune());
        assert_eq!(data.corpus.passages.len(), 200);
        assert!(data.corpus.tables.is_empty());
        assert_eq!(data.train_pairs.len(), 200);
        assert_eq!(data.eval_pairs.len(), 200);
        assert_eq!(data.mcq_items.len(), 20);
    }

    #[test]
    fn default_fixture_validates_strictly_with_tables() {
        let data = synthetic_fixture(&SynthConfig::default());
        assert_eq!(data.corpus.tables.len(), 10);
        // 200 clause passages + caption/summary proxies per table.
        assert_eq!(data.corpus.passages.len(), 220);
        data.corpus.validate(true).unwrap();
    }

    #[test]
    fn qa_pairs_resolve_and_overlap_their_gold_passages() {
        let data = synthetic_fixture(&SynthConfig::fine_tune());
        for pair in data.train_pairs.iter().chain(&data.eval_pairs) {
            let passage = data.corpus.passage(&pair.passage_id).expect("gold must resolve");
            let passage_tokens: std::collections::BTreeSet<String> =
                analysis_tokens(&passage.text).into_iter().collect();
            let shared = analysis_tokens(&pair.question)
                .into_iter()
                .filter(|t| passage_tokens.contains(t))
                .count();
            assert!(shared >= 2, "question {} barely overlaps gold", pair.question_id);
        }
    }

    #[test]
    fn mcq_items_are_well_formed() {
        let data = synthetic_fixture(&SynthConfig::default());
        for item in &data.mcq_items {
            assert_eq!(item.options.len(), 4);
            assert!(item.answer_index < item.options.len());
            let gold = item.gold_passage_id.as_ref().unwrap();
            assert!(data.corpus.passage(gold).is_some());
            // The correct option names the gold passage's signal tokens.
            let gold_text = &data.corpus.passage(gold).unwrap().text;
            let correct = &item.options[item.answer_index];
            let named: Vec<String> = analysis_tokens(correct)
                .into_iter()
                .filter(|t| t.starts_with("qx"))
                .collect();
            assert!(named.iter().all(|t| gold_text.contains(t)), "{item:?}");
        }
        let difficulties: std::collections::BTreeSet<Difficulty> =
            data.mcq_items.iter().map(|i| i.difficulty).collect();
        assert_eq!(difficulties.len(), 3);
    }

    #[test]
    fn raw_fixture_needs_ingestion() {
        let raw = raw_fixture(&SynthConfig::default());
        assert!(raw.validate(true).is_err());
        let overlong = raw.passages.iter().filter(|p| p.token_count > PASSAGE_TOKEN_LIMIT);
        assert_eq!(overlong.count(), 10);
        let tiny = raw
            .passages
            .iter()
            .filter(|p| p.passage_id.contains("#frag") && p.token_count < 64)
            .count();
        assert_eq!(tiny, 20);
        assert!(raw.tables.values().all(|t| t.summary.is_empty()));
        // Clause passages are identical to the built fixture's, ids included.
        let built = synthetic_fixture(&SynthConfig::default());
        for p in built.corpus.passages.iter().filter(|p| p.kind == PassageKind::Text) {
            assert_eq!(raw.passage(&p.passage_id), Some(p));
        }
    }

    #[test]
    fn bm25_finds_gold_for_most_eval_questions() {
        let data = synthetic_fixture(&SynthConfig::fine_tune());
        let index = build_sparse_index(&data.corpus.passages, 1.2, 0.75);
        let retriever = Retriever::bm25(&index, 1);
        let hits = data
            .eval_pairs
            .iter()
            .filter(|pair| {
                retriever
                    .retrieve(&pair.question)
                    .unwrap()
                    .first()
                    .is_some_and(|r| r.passage_id == pair.passage_id)
            })
            .count();
        assert!(hits >= 100, "only {hits}/200 gold passages at rank 1");
    }

    #[test]
    fn helper_text_generators_are_seed_stable() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_words(&mut r1, 50, 12), random_words(&mut r2, 50, 12));
        assert_eq!(random_paragraph(&mut r1, 9), random_paragraph(&mut r2, 9));
        let paragraph = random_paragraph(&mut r1, 9);
        assert!(count_tokens(&paragraph) > 9);
    }
}
