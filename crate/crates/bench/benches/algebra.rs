use cascade_bench::{sample_fn, sample_modes};
use cascade_core::flatfn::{antiderivative_values, sup_norm, QuadratureOptions};
use cascade_core::spectral::{nonlinearity, norm};
use cascade_core::{Grid, NonlinearitySpec, NormSpace, TimeMode};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("flatfn_mul");
    for n in [4, 16, 64] {
        let (a, b) = (sample_fn(n), sample_fn(n).conj());
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| bench.iter(|| black_box(a.mul(&b))));
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let f = sample_fn(32);
    let grid = Grid::default();
    c.bench_function("flatfn_eval_32", |b| b.iter(|| black_box(f.eval(black_box(0.37)))));
    c.bench_function("flatfn_derivative_32", |b| b.iter(|| black_box(f.derivative())));
    c.bench_function("sup_norm_32", |b| b.iter(|| black_box(sup_norm(&f, &grid))));
    let ts: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
    let opts = QuadratureOptions::default();
    c.bench_function("antiderivative_32x17", |b| b.iter(|| black_box(antiderivative_values(&f, &ts, &opts).unwrap())));
}

fn spectral(c: &mut Criterion) {
    let spec = NonlinearitySpec::cubic(1.0);
    let mut g = c.benchmark_group("cubic_nonlinearity");
    for modes in [4, 8, 16] {
        let v = sample_modes(modes);
        g.bench_with_input(BenchmarkId::from_parameter(modes), &v, |b, v| b.iter(|| black_box(nonlinearity(v, &spec))));
    }
    g.finish();
    let v = sample_modes(16);
    let grid = Grid::default();
    c.bench_function("norm_cminus1_16_modes", |b| {
        b.iter(|| black_box(norm(&v, &NormSpace::l2s(-1.0, TimeMode::Cminus1), &grid).unwrap()))
    });
}

criterion_group!(benches, products, evaluation, spectral);
criterion_main!(benches);
