use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dualloop::decomp::decompose;
use dualloop::gaussian::{ideal_output, simulate, LossModel};
use dualloop::homodyne::{estimate_covariance, sample_basis_set, BasisSet};
use dualloop::loopcompiler::{compile, timeline_to_unitary, FinalPhaseMode};
use dualloop::metrics::gaussian_fidelity;
use dualloop::presets::preset_timeline;
use dualloop_bench::{fixture_plan, fixture_unitary};

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for n in [3, 8, 16] {
        let u = fixture_unitary(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| b.iter(|| decompose(black_box(u)).unwrap()));
    }
    group.finish();
}

fn compilation(c: &mut Criterion) {
    let mut group = c.benchmark_group("compile_and_verify");
    for n in [3, 8, 16] {
        let plan = fixture_plan(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &plan, |b, plan| {
            b.iter(|| {
                timeline_to_unitary(&compile(black_box(plan), FinalPhaseMode::MeasurementBasis).unwrap()).unwrap()
            })
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let lm = LossModel::default();
    for n in [3, 8] {
        let t = compile(&fixture_plan(n), FinalPhaseMode::MeasurementBasis).unwrap();
        let inputs = lm.default_inputs(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| simulate(black_box(t), &inputs, &lm).unwrap())
        });
    }
    group.finish();
}

fn fidelity(c: &mut Criterion) {
    let lm = LossModel::default();
    let n = 8;
    let inputs = lm.default_inputs(n);
    let t = compile(&fixture_plan(n), FinalPhaseMode::MeasurementBasis).unwrap();
    let lossy = simulate(&t, &inputs, &lm).unwrap();
    let ideal = ideal_output(&fixture_unitary(n), &inputs).unwrap();
    c.bench_function("gaussian_fidelity/8", |b| {
        b.iter(|| gaussian_fidelity(black_box(&lossy), black_box(&ideal)).unwrap())
    });
}

fn estimation(c: &mut Criterion) {
    let (t, _) = preset_timeline("op3i").unwrap();
    let lm = LossModel::default();
    let g = simulate(&t, &lm.default_inputs(3), &lm).unwrap();
    let set = BasisSet::standard(3).unwrap();
    c.bench_function("sample_and_estimate/5000", |b| {
        b.iter(|| estimate_covariance(&sample_basis_set(&g, &set, 5000, black_box(1)).unwrap()).unwrap())
    });
}

criterion_group!(benches, decomposition, compilation, simulation, fidelity, estimation);
criterion_main!(benches);
