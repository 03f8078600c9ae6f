use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gblab_core::inverse::{Method, U2Options};
use gblab_core::{
    cauchy_form, dft, inverse_u2_local, regular_pmf, BohrSet, FrequencySet, GroupFunction, Mode,
    PrimeGroup, Rational,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_real(p: u64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p).map(|_| rng.gen()).collect()
}

fn bench_dft(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft");
    for p in [101u64, 1009, 10007] {
        let g = PrimeGroup::new(p).unwrap();
        let f = GroupFunction::from_real(g, &random_real(p, 1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p), &f, |b, f| {
            b.iter(|| dft(black_box(f)))
        });
    }
    group.finish();
}

fn bench_cauchy(c: &mut Criterion) {
    let mut group = c.benchmark_group("cauchy_form");
    for p in [101u64, 1009] {
        let g = PrimeGroup::new(p).unwrap();
        let f = random_real(p, 2);
        group.bench_with_input(BenchmarkId::from_parameter(p), &f, |b, f| {
            b.iter(|| cauchy_form(black_box(f), g).unwrap())
        });
    }
    group.finish();
}

fn bench_regular_pmf(c: &mut Criterion) {
    let mut group = c.benchmark_group("regular_pmf");
    for (p, s) in [
        (1009u64, vec![1i64]),
        (1009, vec![1, 31]),
        (10007, vec![1, 100]),
    ] {
        let g = PrimeGroup::new(p).unwrap();
        let b = BohrSet::new(FrequencySet::new(g, &s).unwrap(), Rational::new(1, 4)).unwrap();
        let id = format!("p{p}_d{}", s.len());
        group.bench_with_input(BenchmarkId::from_parameter(id), &b, |bch, b| {
            bch.iter(|| regular_pmf(black_box(b)).unwrap())
        });
    }
    group.finish();
}

fn bench_inverse_u2(c: &mut Criterion) {
    let mut group = c.benchmark_group("inverse_u2");
    group.sample_size(10);
    for (p, method) in [
        (401u64, Method::Fft),
        (401, Method::Exhaustive),
        (4001, Method::Fft),
    ] {
        let g = PrimeGroup::new(p).unwrap();
        let f = GroupFunction::quadratic_phase(g, 0, 7);
        let s = FrequencySet::new(g, &[1]).unwrap();
        let opts = U2Options {
            separation: 0.25,
            method,
            mode: Mode::default(),
        };
        let id = format!("p{p}_{method:?}").to_lowercase();
        group.bench_function(id, |b| {
            b.iter(|| {
                inverse_u2_local(
                    &f,
                    &s,
                    Rational::new(2, 5),
                    Rational::new(3, 250),
                    0.1,
                    &opts,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(
    kernels,
    bench_dft,
    bench_cauchy,
    bench_regular_pmf,
    bench_inverse_u2
);
criterion_main!(kernels);
