use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use harrop_bench::fixtures;
use std::hint::black_box;

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    for f in fixtures() {
        group.bench_with_input(BenchmarkId::new("interp", f.name), &f, |b, f| b.iter(|| black_box(f.interp())));
        group.bench_with_input(BenchmarkId::new("wam", f.name), &f, |b, f| b.iter(|| black_box(f.wam())));
    }
    group.finish();
}

fn compilation(c: &mut Criterion) {
    let mut group = c.benchmark_group("compile");
    for f in fixtures() {
        group.bench_with_input(BenchmarkId::from_parameter(f.name), &f, |b, f| b.iter(|| black_box(f.compile())));
    }
    group.finish();
}

criterion_group!(benches, engines, compilation);
criterion_main!(benches);
