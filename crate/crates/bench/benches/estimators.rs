use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use framebound::estimators::{bounds, eval_point, GridSpec, Truncation};
use framebound::gti::{gabor_system, nadic_counterexample, wavelet_system, Dilations, Modulation};
use framebound::oracle::{discretize, optimal_bounds};
use framebound::{builtin, Builtin, LatticeR, Mat};
use std::hint::black_box;

fn meyer(j: i32) -> framebound::gti::SystemSpec {
    let m = builtin(Builtin::Meyer).unwrap();
    wavelet_system(vec![m.clone(), m.phase(&[0.5]).unwrap()], Dilations::Powers { a: Mat::diag(&[2.0]), j_min: -j, j_max: j }, LatticeR::integer(1), false).unwrap()
}

fn point_eval(c: &mut Criterion) {
    let sys = meyer(6);
    let trunc = Truncation::default();
    c.bench_function("eval_point/meyer_pair", |b| b.iter(|| eval_point(&sys, black_box(&[0.73]), &trunc).unwrap()));
}

fn grid_bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("bounds");
    g.sample_size(10);
    let trunc = Truncation::default();
    for res in [64, 256] {
        let sys = meyer(6);
        g.bench_with_input(BenchmarkId::new("meyer_pair", res), &res, |b, &res| b.iter(|| bounds(&sys, &GridSpec::new(res), &trunc).unwrap()));
    }
    let (nadic, _, _) = nadic_counterexample(2, 12).unwrap();
    g.bench_function("nadic2", |b| b.iter(|| bounds(&nadic, &GridSpec::new(64), &trunc).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    let gauss = builtin(Builtin::Gaussian { sigma: 1.0, dim: 1, decay_eps: 1e-16 }).unwrap();
    let half = || LatticeR::from_rows(&[vec![0.5]]).unwrap();
    let sys = gabor_system(vec![gauss], half(), Modulation::Lattice(half())).unwrap();
    g.bench_function("gabor_gauss", |b| b.iter(|| optimal_bounds(&discretize(&sys, 512, 32.0).unwrap()).unwrap()));
    let sys = meyer(6);
    g.bench_function("meyer_pair", |b| b.iter(|| optimal_bounds(&discretize(&sys, 1024, 32.0).unwrap()).unwrap()));
    g.finish();
}

criterion_group!(benches, point_eval, grid_bounds, oracle);
criterion_main!(benches);
