use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pvf_core::metrics::{self, accurate_sum};
use pvf_core::miner;
use pvf_core::probe::{self, BaselineBackend, CollectOptions};
use pvf_core::{
    audit, BaselineKind, BaselineSpec, CategoryDistribution, ContextSet, CriterionConfig, NormOrder, SlotConvention,
    SlotOrder, StereotypeVector, UnbiasedReference, WeightedContexts, WordSchema, XDistribution,
};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn synthetic(groups: usize, contexts: usize) -> (WordSchema, ContextSet) {
    let schema = WordSchema {
        groups: (0..groups)
            .map(|g| pvf_core::schema::Group {
                id: format!("g{g:02}"),
                words: vec![format!("g{g:02}")],
                weight: None,
            })
            .collect(),
        categories: (0..2)
            .map(|c| pvf_core::schema::Category {
                id: format!("c{c}"),
                words: vec![format!("w{c}")],
            })
            .collect(),
        exclusions: Vec::new(),
    };
    let ctx = ContextSet {
        templates: (0..contexts)
            .map(|i| miner::ContextTemplate::new(format!("The [X] saw item {i} and [Y]"), 1).unwrap())
            .collect(),
        mode: SlotOrder::XThenY,
    };
    (schema, ctx)
}

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    let reference = UnbiasedReference::uniform(5).unwrap();
    for n in [100usize, 10_000] {
        let stereos: Vec<StereotypeVector> = (0..n)
            .map(|i| {
                let raw: Vec<f64> = (0..5).map(|y| ((i * 7 + y * 3) % 11 + 1) as f64).collect();
                let s: f64 = raw.iter().sum();
                let p = CategoryDistribution::new(raw.iter().map(|x| x / s).collect()).unwrap();
                metrics::stereotype(&p, &reference).unwrap()
            })
            .collect();
        let w = WeightedContexts::uniform(n).unwrap();
        for order in [NormOrder::Infinity, NormOrder::finite(2).unwrap()] {
            group.bench_with_input(BenchmarkId::new(order.to_string(), n), &n, |b, _| {
                b.iter(|| metrics::decompose(black_box(&stereos), &w, order).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_accurate_sum(c: &mut Criterion) {
    let v: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.5).collect();
    c.bench_function("accurate_sum/10000", |b| {
        b.iter(|| accurate_sum(black_box(&v).iter().copied()))
    });
}

fn bench_mine(c: &mut Criterion) {
    let schema = WordSchema::load(fixture("gender_schema.json")).unwrap();
    let docs = miner::read_corpus(fixture("gender_corpus.jsonl")).unwrap();
    c.bench_function("mine/gender_fixture", |b| {
        b.iter(|| miner::mine(black_box(&docs), &schema, SlotOrder::XThenY))
    });
}

fn bench_collect_and_audit(c: &mut Criterion) {
    let (schema, ctx) = synthetic(20, 1000);
    let spec = BaselineSpec::new(BaselineKind::RandomlyStereotyped, 20, 2, 1000).with_seed(1);
    let backend = BaselineBackend::new(spec, &schema).unwrap();
    let opts = CollectOptions::new(SlotConvention::Masked);
    c.bench_function("collect/baseline_20x1000", |b| {
        b.iter(|| probe::collect(&backend, &ctx, &schema, &opts).unwrap())
    });
    let tensor = probe::collect(&backend, &ctx, &schema, &opts).unwrap().tensor;
    let cfg = CriterionConfig::default();
    c.bench_function("audit/baseline_20x1000", |b| {
        b.iter(|| audit(black_box(&tensor), &schema, &ctx, &cfg, XDistribution::Uniform).unwrap())
    });
}

criterion_group!(
    benches,
    bench_decompose,
    bench_accurate_sum,
    bench_mine,
    bench_collect_and_audit
);
criterion_main!(benches);
