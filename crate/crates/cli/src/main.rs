//! `tdpr` — one binary for the full retrieval-experiment lifecycle:
//! corpus ingestion, index building, ad-hoc search, retriever evaluation,
//! adapter training, and retrieval-augmented multiple-choice evaluation.
//!
//! Configuration comes from an optional TOML file (`--config`, or the
//! `TDPR_CONFIG` environment variable) with every key overridable by a
//! flag. Exit codes: 0 on success, 1 for data or processing failures,
//! 2 for usage and configuration errors.

mod config;
mod ingest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};

use tdpr_core::corpus::{corpus_stats, load_corpus, load_corpus_raw, save_corpus};
use tdpr_core::eval::{grade_mcq, grounding_report, EvalReport, RankOutcome, REPORT_DEPTH};
use tdpr_core::index::{
    build_sparse_index, build_vector_index, load_dense_index, load_sparse_index,
    save_dense_index, save_sparse_index, HttpEmbedder, IndexLevel, VectorIndex,
};
use tdpr_core::rag::context::{answer_question, MCQ_MAX_TOKENS};
use tdpr_core::rag::{
    answer_mcq, build_mcq_prompt, filter_qa_pairs, generate_qa_pairs, parse_mcq_answer,
    read_mcq_items, read_qa_pairs, write_qa_pairs, Difficulty, HttpLlm, LlmClient, MockLlm,
    QaSplit,
};
use tdpr_core::retrieve::{document_index_items, passage_index_items, write_run_log, RunLogEntry};
use tdpr_core::train::{load_adapter, save_adapter, train_adapter, AdaptedProvider, AdapterMatrix};
use tdpr_core::{
    EmbeddingProvider, HashEmbedder, PassageKind, RetrievalResult, Retriever, RetrieverMethod,
    TrainingPair,
};

use config::{LlmKind, Overrides, ProviderKind, RunConfig};

/// Okapi parameters baked into the sparse index at build time.
const BM25_K1: f64 = 1.2;
const BM25_B: f64 = 0.75;

#[derive(Parser)]
#[command(name = "tdpr", version, about = "Retrieval and QA over hybrid text+table corpora")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "TDPR_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw corpus and write the retrieval-ready JSONL.
    Ingest {
        /// Raw corpus JSONL.
        input: PathBuf,
        /// Directory for the normalized corpus.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Build the sparse index and both dense indexes.
    Index {
        /// Output directory; defaults to the configured index_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one query through the configured retriever.
    Search {
        question: String,
    },
    /// Evaluate the configured retriever on the test split of a QA file.
    EvalRetriever {
        /// QA pairs JSONL.
        qa: PathBuf,
        /// Directory for report.json and run_log.jsonl.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train the embedding adapter on the train split of a QA file.
    TrainAdapter {
        /// QA pairs JSONL.
        qa: PathBuf,
        /// Directory for adapter.bin and loss_history.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Answer a multiple-choice file with retrieval-augmented prompts.
    EvalQa {
        /// MCQ items JSONL.
        mcq: PathBuf,
        /// Directory for the reports and run log.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Prompt without retrieved context.
        #[arg(long)]
        zero_shot: bool,
    },
    /// Generate and filter synthetic QA pairs from corpus passages.
    GenQa {
        /// Directory for qa_pairs.jsonl.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Questions requested per passage (1-5).
        #[arg(long, default_value_t = 3)]
        max_q: usize,
        /// Restrict generation to these documents (repeatable).
        #[arg(long)]
        doc: Vec<String>,
    },
    /// Retrieve for a question and answer it in one step.
    Ask {
        question: String,
    },
}

/// Failure modes mapped to process exit codes.
enum Failure {
    /// Bad input data or a processing error: exit 1.
    Data(anyhow::Error),
    /// Bad flags or configuration: exit 2.
    Usage(anyhow::Error),
}

fn data(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(err.into())
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let run_config = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c.apply(&cli.overrides),
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command, &run_config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command, config: &RunConfig) -> Result<(), Failure> {
    match command {
        Command::Ingest { input, out } => run_ingest(config, &input, &out),
        Command::Index { out } => run_index(config, out.as_deref()),
        Command::Search { question } => run_search(config, &question),
        Command::EvalRetriever { qa, out } => run_eval_retriever(config, &qa, &out),
        Command::TrainAdapter { qa, out } => run_train_adapter(config, &qa, &out),
        Command::EvalQa { mcq, out, zero_shot } => run_eval_qa(config, &mcq, &out, zero_shot),
        Command::GenQa { out, max_q, doc } => run_gen_qa(config, &out, max_q, &doc),
        Command::Ask { question } => run_ask(config, &question),
    }
}

fn sparse_path(dir: &Path) -> PathBuf {
    dir.join("corpus.sparse.idx")
}

fn passages_path(dir: &Path) -> PathBuf {
    dir.join("passages.dense.idx")
}

fn documents_path(dir: &Path) -> PathBuf {
    dir.join("documents.dense.idx")
}

fn make_provider(config: &RunConfig) -> Result<Box<dyn EmbeddingProvider>, Failure> {
    if config.provider.dim < 8 {
        return Err(usage(format!(
            "provider.dim must be at least 8, got {}",
            config.provider.dim
        )));
    }
    match config.provider.kind {
        ProviderKind::Hash => Ok(Box::new(HashEmbedder::new(config.provider.dim))),
        ProviderKind::Http => {
            if config.provider.endpoint.is_empty() {
                return Err(usage("provider.endpoint is required for the http provider"));
            }
            Ok(Box::new(HttpEmbedder::new(
                config.provider.endpoint.as_str(),
                config.provider.dim,
            )))
        }
    }
}

fn make_llm(config: &RunConfig) -> Result<Box<dyn LlmClient>, Failure> {
    match config.llm.kind {
        LlmKind::Mock => Ok(Box::new(MockLlm::new())),
        LlmKind::Http => {
            if config.llm.endpoint.is_empty() {
                return Err(usage("llm.endpoint is required for the http backend"));
            }
            Ok(Box::new(HttpLlm::new(config.llm.endpoint.as_str())))
        }
    }
}

fn load_configured_adapter(config: &RunConfig) -> Result<Option<AdapterMatrix>, Failure> {
    match config.adapter_path() {
        None => Ok(None),
        Some(p) => load_adapter(p).map(Some).map_err(data),
    }
}

fn parse_method(config: &RunConfig) -> Result<RetrieverMethod, Failure> {
    config.retriever.method.parse().map_err(usage)
}

fn check_dim(provider: &dyn EmbeddingProvider, index: &VectorIndex) -> Result<(), Failure> {
    if provider.dim() != index.dim {
        return Err(data(anyhow!(
            "provider dimension {} does not match index dimension {}; \
             rebuild the index or adjust --dim/--adapter",
            provider.dim(),
            index.dim
        )));
    }
    Ok(())
}

/// Assemble the configured retriever over freshly loaded indexes and hand
/// it to `f`. Indexes stay on the stack of this frame, which keeps the
/// retriever's borrows simple.
fn with_retriever<T>(
    config: &RunConfig,
    f: impl FnOnce(&Retriever<'_>) -> Result<T, Failure>,
) -> Result<T, Failure> {
    let method = parse_method(config)?;
    let k = config.retriever.k;
    if k < 1 {
        return Err(usage("k must be at least 1"));
    }
    let dir = &config.index_dir;
    match method {
        RetrieverMethod::Bm25 => {
            let sparse = load_sparse_index(sparse_path(dir)).map_err(data)?;
            f(&Retriever::bm25(&sparse, k))
        }
        RetrieverMethod::Dpr => {
            let passages = load_dense_index(passages_path(dir)).map_err(data)?;
            let base = make_provider(config)?;
            let adapter = load_configured_adapter(config)?;
            let adapted;
            let provider: &dyn EmbeddingProvider = match &adapter {
                Some(a) => {
                    adapted = AdaptedProvider::new(base.as_ref(), a).map_err(data)?;
                    &adapted
                }
                None => base.as_ref(),
            };
            check_dim(provider, &passages)?;
            f(&Retriever::dpr(&passages, provider, k, None))
        }
        RetrieverMethod::Dhr => {
            let d = config.retriever.d;
            if d < 1 {
                return Err(usage("d must be at least 1 for dhr"));
            }
            let documents = load_dense_index(documents_path(dir)).map_err(data)?;
            let passages = load_dense_index(passages_path(dir)).map_err(data)?;
            let base = make_provider(config)?;
            let adapter = load_configured_adapter(config)?;
            let adapted;
            let provider: &dyn EmbeddingProvider = match &adapter {
                Some(a) => {
                    adapted = AdaptedProvider::new(base.as_ref(), a).map_err(data)?;
                    &adapted
                }
                None => base.as_ref(),
            };
            check_dim(provider, &documents)?;
            check_dim(provider, &passages)?;
            f(&Retriever::dhr(&documents, &passages, provider, k, d, None))
        }
    }
}

fn print_results(results: &[RetrievalResult]) {
    if results.is_empty() {
        println!("(no results)");
        return;
    }
    println!("{:>4}  {:<40}  {:<16}  score", "rank", "passage_id", "doc_id");
    for r in results {
        println!("{:>4}  {:<40}  {:<16}  {:.6}", r.rank, r.passage_id, r.doc_id, r.score);
    }
}

fn run_ingest(config: &RunConfig, input: &Path, out: &Path) -> Result<(), Failure> {
    let raw = load_corpus_raw(input).map_err(data)?;
    let llm = make_llm(config)?;
    let normalized = ingest::normalize_corpus(raw, llm.as_ref());
    normalized.validate(true).map_err(data)?;
    fs::create_dir_all(out).map_err(data)?;
    let corpus_out = out.join("corpus.jsonl");
    save_corpus(&normalized, &corpus_out).map_err(data)?;
    log::info!("wrote {}", corpus_out.display());
    let stats = corpus_stats(&normalized);
    println!("{}", serde_json::to_string_pretty(&stats).map_err(data)?);
    Ok(())
}

fn run_index(config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let corpus = load_corpus(&config.corpus_path).map_err(data)?;
    let dir = out.unwrap_or(&config.index_dir);
    fs::create_dir_all(dir).map_err(data)?;

    let sparse = build_sparse_index(&corpus.passages, BM25_K1, BM25_B);
    save_sparse_index(&sparse, sparse_path(dir)).map_err(data)?;

    let base = make_provider(config)?;
    let adapter = load_configured_adapter(config)?;
    let adapted;
    let provider: &dyn EmbeddingProvider = match &adapter {
        Some(a) => {
            adapted = AdaptedProvider::new(base.as_ref(), a).map_err(data)?;
            &adapted
        }
        None => base.as_ref(),
    };
    let passage_index =
        build_vector_index(&passage_index_items(&corpus), provider, IndexLevel::Passage)
            .map_err(data)?;
    save_dense_index(&passage_index, passages_path(dir)).map_err(data)?;
    let document_index =
        build_vector_index(&document_index_items(&corpus), provider, IndexLevel::Document)
            .map_err(data)?;
    save_dense_index(&document_index, documents_path(dir)).map_err(data)?;

    println!(
        "indexed {} passages and {} documents into {}",
        passage_index.entries.len(),
        document_index.entries.len(),
        dir.display()
    );
    Ok(())
}

fn run_search(config: &RunConfig, question: &str) -> Result<(), Failure> {
    with_retriever(config, |retriever| {
        let results = retriever.retrieve(question).map_err(data)?;
        print_results(&results);
        Ok(())
    })
}

fn run_eval_retriever(config: &RunConfig, qa: &Path, out: &Path) -> Result<(), Failure> {
    let pairs = read_qa_pairs(qa).map_err(data)?;
    let test: Vec<_> = pairs.iter().filter(|p| p.split == QaSplit::Test).collect();
    if test.is_empty() {
        return Err(data(anyhow!("no test-split pairs in '{}'", qa.display())));
    }
    // Retrieve deep enough for every reported cutoff even when the
    // configured k is smaller.
    let k_eff = config.retriever.k.max(REPORT_DEPTH);
    with_retriever(config, |retriever| {
        let mut outcomes = Vec::with_capacity(test.len());
        let mut entries = Vec::with_capacity(test.len());
        for pair in &test {
            let results = retriever.retrieve_k(&pair.question, k_eff).map_err(data)?;
            let entry = retriever.log_entry(&pair.question_id, k_eff, results);
            let retrieved: Vec<String> =
                entry.results.iter().map(|r| r.passage_id.clone()).collect();
            outcomes.push(
                RankOutcome::new(&pair.question_id, &pair.passage_id, retrieved).map_err(data)?,
            );
            entries.push(entry);
        }
        let report = EvalReport::from_outcomes(&outcomes).map_err(data)?;
        fs::create_dir_all(out).map_err(data)?;
        report.write_json(out.join("report.json")).map_err(data)?;
        write_run_log(&entries, out.join("run_log.jsonl")).map_err(data)?;
        println!("{}", serde_json::to_string_pretty(&report).map_err(data)?);
        Ok(())
    })
}

fn run_train_adapter(config: &RunConfig, qa: &Path, out: &Path) -> Result<(), Failure> {
    let train_config = config.train_config();
    // The trainer itself accepts a zero learning rate for diagnostics; as
    // a user-facing command that would silently train nothing, so reject.
    if train_config.learning_rate <= 0.0 {
        return Err(usage("learning_rate must be positive"));
    }
    train_config.validate().map_err(usage)?;

    let pairs = read_qa_pairs(qa).map_err(data)?;
    let train: Vec<TrainingPair> = pairs
        .iter()
        .filter(|p| p.split == QaSplit::Train)
        .map(TrainingPair::from)
        .collect();
    if train.is_empty() {
        return Err(data(anyhow!("no train-split pairs in '{}'", qa.display())));
    }
    let corpus = load_corpus(&config.corpus_path).map_err(data)?;
    let provider = make_provider(config)?;
    let outcome = train_adapter(&train, &corpus, provider.as_ref(), &train_config).map_err(data)?;

    fs::create_dir_all(out).map_err(data)?;
    save_adapter(&outcome.adapter, out.join("adapter.bin")).map_err(data)?;
    let mut csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in outcome.loss_history.iter().enumerate() {
        csv.push_str(&format!("{},{loss}\n", epoch + 1));
    }
    fs::write(out.join("loss_history.csv"), csv).map_err(data)?;
    println!(
        "trained on {} pairs for {} epochs; mean loss {} -> {}",
        train.len(),
        train_config.epochs,
        outcome.loss_history.first().unwrap_or(&f64::NAN),
        outcome.loss_history.last().unwrap_or(&f64::NAN),
    );
    Ok(())
}

/// Per-item artifacts of one MCQ pass, independent of how the answer was
/// produced.
struct McqRun {
    predictions: Vec<(String, Option<usize>)>,
    entries: Vec<RunLogEntry>,
}

fn run_eval_qa(config: &RunConfig, mcq: &Path, out: &Path, zero_shot: bool) -> Result<(), Failure> {
    let items = read_mcq_items(mcq).map_err(data)?;
    if items.is_empty() {
        return Err(data(anyhow!("no items in '{}'", mcq.display())));
    }
    let llm = make_llm(config)?;
    let k = config.retriever.k;
    if k < 1 {
        return Err(usage("k must be at least 1"));
    }

    let run = if zero_shot {
        let method = parse_method(config)?;
        let mut predictions = Vec::with_capacity(items.len());
        let mut entries = Vec::with_capacity(items.len());
        for item in &items {
            let prompt = build_mcq_prompt(item, "");
            let prediction = llm
                .generate(&prompt, MCQ_MAX_TOKENS)
                .map_err(Into::into)
                .and_then(|text| parse_mcq_answer(&text, item.options.len()));
            if let Err(err) = &prediction {
                log::warn!("item '{}': {err}", item.item_id);
            }
            predictions.push((item.item_id.clone(), prediction.ok()));
            // Logged with k = 0 and no results: nothing was retrieved.
            entries.push(RunLogEntry {
                query_id: item.item_id.clone(),
                method,
                k: 0,
                d: None,
                results: Vec::new(),
            });
        }
        McqRun { predictions, entries }
    } else {
        let corpus = load_corpus(&config.corpus_path).map_err(data)?;
        with_retriever(config, |retriever| {
            let mut predictions = Vec::with_capacity(items.len());
            let mut entries = Vec::with_capacity(items.len());
            for item in &items {
                let (prediction, entry) =
                    answer_mcq(item, retriever, &corpus, llm.as_ref(), k, config.context_budget);
                if let Err(err) = &prediction {
                    log::warn!("item '{}': {err}", item.item_id);
                }
                predictions.push((item.item_id.clone(), prediction.ok()));
                entries.push(entry);
            }
            Ok(McqRun { predictions, entries })
        })?
    };

    fs::create_dir_all(out).map_err(data)?;
    let grades = grade_mcq(&run.predictions, &items).map_err(data)?;
    grades.write_json(out.join("qa_report.json")).map_err(data)?;
    write_run_log(&run.entries, out.join("run_log.jsonl")).map_err(data)?;

    // Retrieval quality and grounding need gold passage links; items
    // without one are excluded from those two reports only.
    let mut outcomes = Vec::new();
    let mut correctness = Vec::new();
    let mut difficulty_of: BTreeMap<String, Difficulty> = BTreeMap::new();
    for (item, entry) in items.iter().zip(&run.entries) {
        let Some(gold) = &item.gold_passage_id else {
            log::warn!(
                "item '{}' has no gold_passage_id; skipping it in the retrieval \
                 and grounding reports",
                item.item_id
            );
            continue;
        };
        let retrieved: Vec<String> = entry.results.iter().map(|r| r.passage_id.clone()).collect();
        outcomes.push(RankOutcome::new(&item.item_id, gold, retrieved).map_err(data)?);
        let predicted = run
            .predictions
            .iter()
            .find(|(id, _)| id == &item.item_id)
            .and_then(|(_, p)| *p);
        correctness.push((item.item_id.clone(), predicted == Some(item.answer_index)));
        difficulty_of.insert(item.item_id.clone(), item.difficulty);
    }
    if outcomes.is_empty() {
        log::warn!("no items carry gold_passage_id; retrieval and grounding reports skipped");
    } else {
        let retrieval = EvalReport::with_difficulty(&outcomes, &difficulty_of).map_err(data)?;
        retrieval.write_json(out.join("retrieval_report.json")).map_err(data)?;
        let grounding = grounding_report(&correctness, &outcomes, k).map_err(data)?;
        grounding.write_json(out.join("grounding.json")).map_err(data)?;
        println!(
            "answered {} items: accuracy {:.3} ({} unparseable); grounded-correct {}, \
             ungrounded-correct {}",
            grades.n_items,
            grades.overall,
            grades.n_unparseable,
            grounding.correct_grounded,
            grounding.correct_ungrounded,
        );
        return Ok(());
    }
    println!(
        "answered {} items: accuracy {:.3} ({} unparseable)",
        grades.n_items, grades.overall, grades.n_unparseable
    );
    Ok(())
}

fn run_gen_qa(config: &RunConfig, out: &Path, max_q: usize, docs: &[String]) -> Result<(), Failure> {
    if !(1..=5).contains(&max_q) {
        return Err(usage(format!("max_q must be between 1 and 5, got {max_q}")));
    }
    let corpus = load_corpus(&config.corpus_path).map_err(data)?;
    for doc_id in docs {
        if corpus.document(doc_id).is_none() {
            return Err(data(anyhow!("unknown document '{doc_id}'")));
        }
    }
    let llm = make_llm(config)?;
    let mut generated = Vec::new();
    for passage in &corpus.passages {
        // Summary proxies duplicate their table's caption proxy as a
        // generation source, so only the caption side is used.
        if passage.kind == PassageKind::TableSummary {
            continue;
        }
        if !docs.is_empty() && !docs.iter().any(|d| d == &passage.doc_id) {
            continue;
        }
        generated.extend(generate_qa_pairs(passage, &corpus, llm.as_ref(), max_q).map_err(data)?);
    }
    let kept = filter_qa_pairs(&generated, &corpus);
    fs::create_dir_all(out).map_err(data)?;
    write_qa_pairs(&kept, out.join("qa_pairs.jsonl")).map_err(data)?;
    println!("generated {} candidate pairs, kept {}", generated.len(), kept.len());
    Ok(())
}

fn run_ask(config: &RunConfig, question: &str) -> Result<(), Failure> {
    let corpus = load_corpus(&config.corpus_path).map_err(data)?;
    let llm = make_llm(config)?;
    with_retriever(config, |retriever| {
        let (answer, entry) = answer_question(
            "ask",
            question,
            retriever,
            &corpus,
            llm.as_ref(),
            config.retriever.k,
            config.context_budget,
        );
        print_results(&entry.results);
        println!();
        println!("{}", answer.map_err(data)?);
        Ok(())
    })
}
