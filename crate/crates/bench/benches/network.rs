use agilesim_bench::ring_network;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn ring(c: &mut Criterion) {
    let mut g = c.benchmark_group("ring_network");
    g.sample_size(10);
    for bundles in [50, 200] {
        g.bench_with_input(BenchmarkId::from_parameter(bundles), &bundles, |b, &n| {
            b.iter(|| {
                let mut net = ring_network(8, n, 1800);
                net.run_until(0, 1800).unwrap();
                net.records().len()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, ring);
criterion_main!(benches);
