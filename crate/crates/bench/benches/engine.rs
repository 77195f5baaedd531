//! Hot-path benchmarks: sparse and dense search, feature-hash embedding,
//! the contrastive gradient, and paragraph splitting. Every input is
//! deterministic, so numbers are comparable across runs and machines.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tdpr_core::corpus::{jaccard_similarity, split_paragraph};
use tdpr_core::index::{
    bm25_search, build_sparse_index, build_vector_index, dense_search, embed, IndexItem,
    IndexLevel,
};
use tdpr_core::synth::{random_paragraph, synthetic_fixture, SynthConfig};
use tdpr_core::train::mnr_gradient;
use tdpr_core::HashEmbedder;

fn bench_bm25(c: &mut Criterion) {
    let data = synthetic_fixture(&SynthConfig::default());
    let index = build_sparse_index(&data.corpus.passages, 1.2, 0.75);
    let queries: Vec<&str> = data
        .eval_pairs
        .iter()
        .take(16)
        .map(|p| p.question.as_str())
        .collect();
    c.bench_function("bm25_search/16q_k10", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(bm25_search(&index, q, 10));
            }
        })
    });
}

fn bench_dense(c: &mut Criterion) {
    let provider = HashEmbedder::new(256);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let items: Vec<IndexItem> = (0..1000)
        .map(|i| {
            IndexItem::new(
                format!("p{i:04}"),
                format!("D{:02}", i / 100),
                random_paragraph(&mut rng, 3),
            )
        })
        .collect();
    let index = build_vector_index(&items, &provider, IndexLevel::Passage).unwrap();
    let query = embed(&provider, &["threshold configuration parameter behaviour".into()])
        .unwrap()
        .remove(0);
    c.bench_function("dense_search/n1000_d256_k10", |b| {
        b.iter(|| black_box(dense_search(&index, &query, 10, None)))
    });
}

fn bench_embed(c: &mut Criterion) {
    let provider = HashEmbedder::new(256);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let texts: Vec<String> = (0..64).map(|_| random_paragraph(&mut rng, 2)).collect();
    c.bench_function("hash_embed/batch64_d256", |b| {
        b.iter(|| black_box(embed(&provider, &texts).unwrap()))
    });
}

fn bench_mnr(c: &mut Criterion) {
    let provider = HashEmbedder::new(256);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let questions: Vec<String> = (0..16).map(|_| random_paragraph(&mut rng, 1)).collect();
    let passages: Vec<String> = (0..16).map(|_| random_paragraph(&mut rng, 3)).collect();
    let anchors = embed(&provider, &questions).unwrap();
    let positives = embed(&provider, &passages).unwrap();
    c.bench_function("mnr_gradient/n16_d256", |b| {
        b.iter(|| black_box(mnr_gradient(&anchors, &positives, 20.0).unwrap()))
    });
}

fn bench_split(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let paragraph = random_paragraph(&mut rng, 200);
    c.bench_function("split_paragraph/200_sentences_limit512", |b| {
        b.iter(|| black_box(split_paragraph(&paragraph, 512, jaccard_similarity)))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(30);
    targets = bench_bm25, bench_dense, bench_embed, bench_mnr, bench_split
}
criterion_main!(benches);
