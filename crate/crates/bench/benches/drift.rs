use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use emodrift_core::pipeline::aggregate;
use emodrift_core::{
    CoreEmotion, CoreMappingTable, Engine, LabelScores, RewriteRecord, Source, SourceRecord, Style,
    VadPrototypeTable,
};

fn source(i: usize) -> SourceRecord {
    let texts = [
        "I hate this",
        "so disgusting",
        "I am scared",
        "this is sad",
        "you idiot",
        "lol great",
    ];
    SourceRecord {
        id: format!("b{i}"),
        text: texts[i % texts.len()].to_string(),
        source: Source::Generic,
        harm_labels: BTreeSet::new(),
    }
}

fn bench_drift(c: &mut Criterion) {
    let table = VadPrototypeTable::default();
    c.bench_function("drift_matrix", |b| {
        b.iter(|| black_box(&table).drift_matrix())
    });
    c.bench_function("emotion_drift", |b| {
        b.iter(|| {
            CoreEmotion::ALL
                .iter()
                .map(|e| table.emotion_drift(black_box(*e), CoreEmotion::Happiness))
                .sum::<f64>()
        })
    });
}

fn bench_mapping(c: &mut Criterion) {
    let mapping = CoreMappingTable::default();
    let scores = LabelScores::from_named([
        ("neutral", 0.6),
        ("annoyance", 0.3),
        ("anger", 0.3),
        ("joy", 0.05),
    ])
    .unwrap();
    c.bench_function("resolve_core", |b| {
        b.iter(|| mapping.resolve_core(black_box(&scores)).unwrap())
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let rt = tokio::runtime::Builder::new_current_thread()
        .build()
        .unwrap();
    let engine = Engine::mock();
    let rec = source(0);
    c.bench_function("process_record_mock", |b| {
        b.iter(|| rt.block_on(engine.process_record(black_box(&rec))))
    });

    let records: Vec<RewriteRecord> = (0..1000)
        .map(|i| rt.block_on(engine.process_record(&source(i))))
        .collect();
    let table = VadPrototypeTable::default();
    c.bench_function("aggregate_1000", |b| {
        b.iter(|| aggregate(black_box(&records), Style::Humor, &table).unwrap())
    });
}

criterion_group!(benches, bench_drift, bench_mapping, bench_pipeline);
criterion_main!(benches);
