use criterion::{criterion_group, criterion_main, Criterion};
use mast_bench::Fixture;
use mast_core::policy::select_action;
use mast_core::{ospa, OspaParams, PolicyKind, PolicyVariant, RngStream};

fn decision(c: &mut Criterion) {
    let fx = Fixture::new(15, 40, 1);
    let setup = fx.setup();
    let mut rng = RngStream::from_seed(3);
    let mut g = c.benchmark_group("decision");
    g.sample_size(10);
    for v in [PolicyVariant::Random, PolicyVariant::Renyi, PolicyVariant::DecsterTs1, PolicyVariant::DecsterTs2] {
        let policy = PolicyKind::new(v);
        g.bench_function(v.name(), |b| b.iter(|| select_action(&policy, &fx.phd, &setup, &mut rng).unwrap()));
    }
    g.finish();
}

fn metric(c: &mut Criterion) {
    let a = Fixture::new(15, 0, 4).truth;
    let b = Fixture::new(12, 0, 5).truth;
    let p = OspaParams::default();
    c.bench_function("ospa_15_vs_12", |bch| bch.iter(|| ospa(&a, &b, &p)));
}

criterion_group!(benches, decision, metric);
criterion_main!(benches);
