use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use omori_bench::ensemble_curves;
use omori_core::omori::{ensemble_fit, fit_omori, EnsembleMethod, FitRange, Side};
use omori_core::synth::{simulate_omori, OmoriProcessSpec};

fn fitting(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_omori");
    for horizon in [104u32, 285, 1274] {
        let curve = ensemble_curves(1, 0.24, 500.0, horizon).remove(0);
        let range = FitRange::new(1, horizon as usize).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(horizon), &curve, |b, curve| {
            b.iter(|| fit_omori(black_box(curve), range, 1).unwrap())
        });
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let curves = ensemble_curves(100, 0.24, 10.0, 104);
    let range = FitRange::new(1, 104).unwrap();
    let mut g = c.benchmark_group("ensemble_fit");
    for method in [EnsembleMethod::Individual, EnsembleMethod::Portfolio, EnsembleMethod::Partial(5)] {
        g.bench_function(method.label(), |b| {
            b.iter(|| ensemble_fit(black_box(&curves), method, range, 7).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_omori");
    for omega in [-0.2, 0.0, 0.5] {
        let spec = OmoriProcessSpec::with_expected_count(omega, 500.0, 285, Side::After, 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(omega), &spec, |b, spec| {
            b.iter(|| simulate_omori(black_box(spec)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fitting, ensembles, simulation);
criterion_main!(benches);
