use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use macroviz_bench::{fixture, replay_dir};
use macroviz_core::charts::feasible_charts;
use macroviz_core::dataset::{parse_csv, profile_dataset};
use macroviz_core::datatype::classify_all;
use macroviz_core::knowledge::FunctionRetriever;
use macroviz_core::{Catalog, FunctionIndex, Pipeline, PipelineConfig, ScriptedProvider, VisualizeRequest};

fn profiling(c: &mut Criterion) {
    let bytes = fixture("superstore.csv");
    c.bench_function("parse_and_profile_superstore", |b| {
        b.iter(|| profile_dataset(&parse_csv(black_box(&bytes)).unwrap()))
    });
}

fn feasibility(c: &mut Criterion) {
    let catalog = Catalog::shipped();
    let data = parse_csv(&fixture("superstore.csv")).unwrap();
    let typed = classify_all(&profile_dataset(&data), &Default::default());
    let three: Vec<_> = ["category", "sales", "profit"]
        .iter()
        .map(|n| typed.iter().find(|t| t.name == *n).unwrap().clone())
        .collect();
    c.bench_function("feasible_charts_three_attributes", |b| {
        b.iter(|| feasible_charts(black_box(&three), &catalog).unwrap())
    });
}

fn retrieval(c: &mut Criterion) {
    let index = FunctionIndex::shipped();
    c.bench_function("top_k_15", |b| {
        b.iter(|| index.top_k(black_box("average profit per month for each category"), 15).len())
    });
}

fn replay_run(c: &mut Criterion) {
    let provider = Arc::new(ScriptedProvider::from_dir(&replay_dir()).unwrap());
    let mut config = PipelineConfig::default();
    config.trace.timing = false;
    let pipeline = Pipeline::new(config, provider).unwrap();
    let request = VisualizeRequest::new(fixture("cars.csv"), "What is the most affordable car?");
    c.bench_function("walkthrough_replay", |b| b.iter(|| pipeline.run(black_box(&request)).unwrap()));
}

criterion_group!(benches, profiling, feasibility, retrieval, replay_run);
criterion_main!(benches);
