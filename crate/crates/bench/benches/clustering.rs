use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use litforage_bench::random_document;
use litforage_core::InsightEngine;

fn cluster(c: &mut Criterion) {
    let mut group = c.benchmark_group("cluster");
    group.sample_size(20);
    for n in [50, 200] {
        let doc = random_document(n, 2, 5);
        group.bench_with_input(BenchmarkId::new("k4", n), &doc, |b, doc| {
            b.iter(|| InsightEngine::stub().cluster(doc, Some(4)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("auto", n), &doc, |b, doc| {
            b.iter(|| InsightEngine::stub().cluster(doc, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, cluster);
criterion_main!(benches);
