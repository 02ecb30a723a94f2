use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use litforage_bench::random_document;
use litforage_core::layout::{self, ManyBody};
use litforage_core::ForceConfig;

fn tick(c: &mut Criterion) {
    let cfg = ForceConfig::default();
    let mut group = c.benchmark_group("tick");
    for n in [100, 500, 2000] {
        let doc = random_document(n, 3, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &doc, |b, doc| {
            b.iter_batched(|| doc.clone(), |mut d| d.tick(&cfg).unwrap(), criterion::BatchSize::LargeInput)
        });
    }
    group.finish();
}

fn manybody(c: &mut Criterion) {
    let cfg = ForceConfig::default();
    let mut group = c.benchmark_group("manybody");
    for n in [200, 1000] {
        let mut doc = random_document(n, 3, 11);
        doc.run_layout(&cfg, 50).unwrap();
        group.bench_with_input(BenchmarkId::new("exact", n), &doc, |b, doc| {
            b.iter(|| layout::manybody_forces(&doc.layout, doc, &cfg, ManyBody::Exact).unwrap())
        });
        for theta in [0.0, 0.9] {
            group.bench_with_input(BenchmarkId::new(format!("barnes_hut_{theta}"), n), &doc, |b, doc| {
                b.iter(|| layout::manybody_forces(&doc.layout, doc, &cfg, ManyBody::BarnesHut { theta }).unwrap())
            });
        }
    }
    group.finish();
}

fn full_layout(c: &mut Criterion) {
    let cfg = ForceConfig::default();
    let doc = random_document(300, 3, 3);
    c.bench_function("layout_300_ticks_n300", |b| {
        b.iter_batched(|| doc.clone(), |mut d| d.run_layout(&cfg, 300).unwrap(), criterion::BatchSize::LargeInput)
    });
}

criterion_group!(benches, tick, manybody, full_layout);
criterion_main!(benches);
