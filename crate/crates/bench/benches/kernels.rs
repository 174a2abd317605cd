use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqfnlab_bench::{cantor, cascade, comb};
use sqfnlab_core::tree::haar;
use sqfnlab_core::*;

fn transport(c: &mut Criterion) {
    let mut g = c.benchmark_group("w1_supported");
    for n in [64, 1024, 16384] {
        let (a, b) = (comb(n), Measure::lebesgue());
        g.bench_with_input(BenchmarkId::new("comb_vs_lebesgue", n), &n, |bench, _| {
            bench.iter(|| w1_supported(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn alpha_numbers(c: &mut Criterion) {
    let (mu, nu) = (cascade(0.7, 16), Measure::lebesgue());
    c.bench_function("alpha_level_8_sweep", |bench| {
        bench.iter(|| {
            (0..256)
                .map(|k| alpha(&mu, &nu, &DyadicInterval::standard(8, k).unit_interval()))
                .sum::<f64>()
        })
    });
}

fn forests(c: &mut Criterion) {
    let (mu, nu) = (cantor(14), Measure::lebesgue());
    c.bench_function("stopping_forest_cantor_depth_10", |bench| {
        bench.iter(|| stopping_forest(&mu, &nu, 0.05, 10, StopMode::Interval).unwrap())
    });
    let mu = cascade(0.6, 14);
    let tree = Tree::full(&mu, &nu, DyadicInterval::ROOT, 10).unwrap();
    c.bench_function("haar_full_tree_depth_10", |bench| bench.iter(|| haar(&mu, &nu, &tree).unwrap()));
}

fn profiles(c: &mut Criterion) {
    let (mu, nu) = (cascade(0.7, 16), Measure::lebesgue());
    let points = sample_points(&mu, 16, 32, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let sys = DyadicSystem::standard();
    c.bench_function("dyadic_profile_32_points_depth_10", |bench| {
        bench.iter(|| dyadic_square_profile(&mu, &nu, &sys, &points, 10).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = transport, alpha_numbers, forests, profiles
}
criterion_main!(benches);
