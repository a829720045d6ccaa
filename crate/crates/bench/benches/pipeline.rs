use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use scforge_core::equivalence::check_random;
use scforge_core::fuzz::{random_network_source, FuzzLimits};
use scforge_core::parser::check_source;
use scforge_core::verify::{check_invariant, parse_properties, VerifyOptions};
use scforge_core::{fixtures, parse_network, transform_all, write_uppaal_xml, ExportOptions};

fn parse(c: &mut Criterion) {
    c.bench_function("parse cardiac", |b| b.iter(|| parse_network(black_box(fixtures::CARDIAC)).unwrap()));
}

fn transform(c: &mut Criterion) {
    let net = parse_network(fixtures::CARDIAC).unwrap();
    c.bench_function("transform cardiac", |b| b.iter(|| transform_all(black_box(&net)).unwrap()));
}

fn equivalence(c: &mut Criterion) {
    let net = parse_network(fixtures::FIG2).unwrap();
    let (ta, map) = transform_all(&net).unwrap();
    c.bench_function("equiv fig2 100x50", |b| b.iter(|| check_random(&net, &ta, &map, 100, 50, 1).unwrap()));

    let limits = FuzzLimits::default();
    c.bench_function("equiv fuzz network 10x30", |b| {
        let mut seed = 0;
        b.iter_batched(
            || {
                seed += 1;
                let (net, _) = check_source(&random_network_source(seed, &limits)).unwrap();
                let (ta, map) = transform_all(&net).unwrap();
                (net, ta, map, seed)
            },
            |(net, ta, map, seed)| check_random(&net, &ta, &map, 10, 30, seed).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn verify(c: &mut Criterion) {
    let props = parse_properties(fixtures::CARDIAC_PROPS).unwrap();
    let net = parse_network(fixtures::CARDIAC_MUTATED).unwrap();
    let mut g = c.benchmark_group("verify");
    g.sample_size(20);
    g.bench_function("P2 mutated, 25 cycles", |b| b.iter(|| check_invariant(&net, &props[1], VerifyOptions::new(25)).unwrap()));
    g.bench_function("P1 mutated, 25 cycles", |b| b.iter(|| check_invariant(&net, &props[0], VerifyOptions::new(25)).unwrap()));
    g.finish();
}

fn export(c: &mut Criterion) {
    let net = parse_network(fixtures::CARDIAC).unwrap();
    let (ta, _) = transform_all(&net).unwrap();
    c.bench_function("export cardiac", |b| b.iter(|| write_uppaal_xml(black_box(&ta), ExportOptions::default()).unwrap()));
}

criterion_group!(benches, parse, transform, equivalence, verify, export);
criterion_main!(benches);
