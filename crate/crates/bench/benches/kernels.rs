use criterion::{black_box, criterion_group, criterion_main, Criterion};

use iswap_vqa_core::ansatz::{build_bell_ansatz, build_ghz_ansatz, run_ansatz};
use iswap_vqa_core::calib::{chevron_map, ChevronModel};
use iswap_vqa_core::chsh::{chsh_sweep, ChshConfig};
use iswap_vqa_core::gates::iswap_like;
use iswap_vqa_core::measure::tomography_settings;
use iswap_vqa_core::qcore::{ghz_state, BellState};
use iswap_vqa_core::seed::rng;
use iswap_vqa_core::tomo::{fit_iswap_like, reconstruct_state, unitary_to_process, FitOptions, TomographyOptions};
use iswap_vqa_core::vqa::{bell_problem, ghz_problem};
use iswap_vqa_core::{ISwapLikeParams, MeasurementPipeline, ParamVector, StateVector};

fn evolution(c: &mut Criterion) {
    let e = ISwapLikeParams::fitted_device();
    let bell = build_bell_ansatz(e).unwrap();
    let ghz = build_ghz_ansatz(e, e).unwrap();
    let pb = ParamVector::random(bell.n_params(), &mut rng(1));
    let pg = ParamVector::random(ghz.n_params(), &mut rng(2));
    let z2 = StateVector::zero(2).unwrap();
    let z3 = StateVector::zero(3).unwrap();
    c.bench_function("run_ansatz/bell", |b| b.iter(|| run_ansatz(&bell, black_box(&pb), &z2).unwrap()));
    c.bench_function("run_ansatz/ghz", |b| b.iter(|| run_ansatz(&ghz, black_box(&pg), &z3).unwrap()));
}

fn gradients(c: &mut Criterion) {
    let e = ISwapLikeParams::ideal();
    let bell = bell_problem(BellState::Beta00, e, MeasurementPipeline::exact()).unwrap();
    let ghz = ghz_problem(e, e, MeasurementPipeline::exact()).unwrap();
    let sampled = bell_problem(BellState::Beta00, e, MeasurementPipeline::sampled(2000)).unwrap();
    let pb = ParamVector::random(12, &mut rng(3)).into_inner();
    let pg = ParamVector::random(24, &mut rng(4)).into_inner();
    c.bench_function("gradient/bell_exact", |b| b.iter(|| bell.gradient(black_box(&pb), 0).unwrap()));
    c.bench_function("gradient/ghz_exact", |b| b.iter(|| ghz.gradient(black_box(&pg), 0).unwrap()));
    c.bench_function("gradient/bell_2000_shots", |b| b.iter(|| sampled.gradient(black_box(&pb), 5).unwrap()));
}

fn tomography(c: &mut Criterion) {
    let settings2 = tomography_settings(2).unwrap();
    let settings3 = tomography_settings(3).unwrap();
    let bell = MeasurementPipeline::sampled(2000).measure_all(&BellState::Beta00.state(), &settings2, 6).unwrap();
    let ghz = MeasurementPipeline::sampled(2000).measure_all(&ghz_state(), &settings3, 7).unwrap();
    let opts = TomographyOptions { restarts: 1, ..TomographyOptions::default() };
    let mut group = c.benchmark_group("reconstruct_state");
    group.sample_size(10);
    group.bench_function("bell_2000_shots", |b| b.iter(|| reconstruct_state(&bell, &settings2, &opts).unwrap()));
    group.bench_function("ghz_2000_shots", |b| b.iter(|| reconstruct_state(&ghz, &settings3, &opts).unwrap()));
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let target = unitary_to_process(&iswap_like(&ISwapLikeParams::fitted_device()));
    let mut group = c.benchmark_group("fit_iswap_like");
    group.sample_size(10);
    group.bench_function("fitted_device", |b| b.iter(|| fit_iswap_like(black_box(&target), &FitOptions::default()).unwrap()));
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let state = BellState::Beta00.state();
    let cfg = ChshConfig::for_bell(BellState::Beta00, MeasurementPipeline::sampled(2000));
    c.bench_function("chsh_sweep/2000_shots_x50", |b| b.iter(|| chsh_sweep(&state, &cfg).unwrap()));
    let model = ChevronModel::default();
    c.bench_function("chevron_map/default", |b| b.iter(|| chevron_map(black_box(&model)).unwrap()));
}

criterion_group!(benches, evolution, gradients, tomography, fitting, sweeps);
criterion_main!(benches);
