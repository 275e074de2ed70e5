//! Cross-module round trips through the public API.

use iswap_vqa_core::ansatz::{build_bell_ansatz, run_ansatz};
use iswap_vqa_core::gates::{ideal_gate, iswap_like};
use iswap_vqa_core::io::{to_json, trace_csv, DensityMatrixJson};
use iswap_vqa_core::measure::tomography_settings;
use iswap_vqa_core::qcore::{pure_target_fidelity, state_fidelity, BellState};
use iswap_vqa_core::tomo::{fit_iswap_like, process_fidelity, reconstruct_state, unitary_to_process, FitOptions, TomographyOptions};
use iswap_vqa_core::vqa::{bell_problem, train, train_best_of, Init};
use iswap_vqa_core::{IdealGate, ISwapLikeParams, MeasurementPipeline, ParamVector, ReadoutModel, StateVector, TrainOptions};
use proptest::prelude::*;

#[test]
fn trained_circuit_survives_tomography() {
    let problem = bell_problem(BellState::Beta11, ISwapLikeParams::fitted_device(), MeasurementPipeline::exact()).unwrap();
    let trace = train_best_of(&problem, &TrainOptions::default(), 4, 9).unwrap();
    let circuit = build_bell_ansatz(ISwapLikeParams::fitted_device()).unwrap();
    let state = run_ansatz(&circuit, &trace.final_params(), &StateVector::zero(2).unwrap()).unwrap();

    let settings = tomography_settings(2).unwrap();
    let pipeline = MeasurementPipeline::sampled(4000).with_readout(ReadoutModel::symmetric(2, 0.9).unwrap(), true);
    let records = pipeline.measure_all(&state, &settings, 17).unwrap();
    let rec = reconstruct_state(&records, &settings, &TomographyOptions::default()).unwrap();
    let direct = pure_target_fidelity(&state.to_density(), &BellState::Beta11.state()).unwrap();
    let measured = pure_target_fidelity(&rec.state, &BellState::Beta11.state()).unwrap();
    assert!(direct > 0.999);
    assert!((measured - direct).abs() < 0.05, "{measured} vs {direct}");
}

#[test]
fn density_matrix_json_round_trip() {
    let rho = BellState::Beta01.state().to_density();
    let text = to_json(&DensityMatrixJson::from_density(&rho));
    let back: DensityMatrixJson = serde_json::from_str(&text).unwrap();
    let rho2 = back.to_density().unwrap();
    assert_eq!(rho.matrix(), rho2.matrix());
    assert!((state_fidelity(&rho, &rho2).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ideal_iswap_fits_to_the_ideal_parameters() {
    let fit = fit_iswap_like(&unitary_to_process(&ideal_gate(IdealGate::ISwap)), &FitOptions::default()).unwrap();
    assert!(fit.fidelity > 1.0 - 1e-10);
    assert!((fit.params.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!(!fit.below_floor);
}

#[test]
fn cnot_is_outside_the_family() {
    let fit = fit_iswap_like(&unitary_to_process(&ideal_gate(IdealGate::Cnot)), &FitOptions::default()).unwrap();
    assert!(fit.below_floor);
    assert!(fit.fidelity < 0.9);
}

#[test]
fn trace_csv_has_one_row_per_record() {
    let problem = bell_problem(BellState::Beta00, ISwapLikeParams::ideal(), MeasurementPipeline::exact()).unwrap();
    let opts = TrainOptions { max_iters: 7, ..TrainOptions::default() };
    let trace = train(&problem, &opts, &Init::Given(ParamVector::zeros(12)), 0).unwrap();
    let csv = trace_csv(&trace);
    assert_eq!(csv.lines().count(), 1 + trace.records.len());
    assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 3 + 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitted_gate_reproduces_the_process(
        theta in 0.05f64..3.1,
        phi in -3.1f64..3.1,
        dp in -3.1f64..3.1,
        dm in -3.1f64..3.1,
        doff in -3.1f64..3.1,
    ) {
        let p = ISwapLikeParams { theta, phi, delta_plus: dp, delta_minus: dm, delta_minus_off: doff };
        let target = unitary_to_process(&iswap_like(&p));
        let fit = fit_iswap_like(&target, &FitOptions::default()).unwrap();
        let f = process_fidelity(&unitary_to_process(&iswap_like(&fit.params)), &target).unwrap();
        prop_assert!(1.0 - f < 1e-8);
    }

    #[test]
    fn exact_records_reconstruct_product_states(a in 0.0f64..6.3, b in 0.0f64..6.3) {
        use iswap_vqa_core::Complex64;
        let q = |t: f64| [Complex64::new((t / 2.0).cos(), 0.0), Complex64::new(0.0, (t / 2.0).sin())];
        let (x, y) = (q(a), q(b));
        let amps = vec![x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1]];
        let state = StateVector::normalized(2, amps).unwrap();
        let settings = tomography_settings(2).unwrap();
        let records = MeasurementPipeline::exact().measure_all(&state, &settings, 0).unwrap();
        let rec = reconstruct_state(&records, &settings, &TomographyOptions::default()).unwrap();
        prop_assert!(pure_target_fidelity(&rec.state, &state).unwrap() >= 0.999);
    }
}
