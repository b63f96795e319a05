use cloudpg_bench::fixture_manifest;
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_build(c: &mut Criterion) {
    for name in ["bookinfo", "bookinfo-clean"] {
        let manifest = fixture_manifest(name);
        c.bench_function(&format!("build/{name}"), |b| {
            b.iter(|| cloudpg_core::build(&manifest).expect("fixture builds"))
        });
    }
}

criterion_group!(benches, bench_build);
criterion_main!(benches);
