//! Desk-scale simulation of variational entangled-state preparation on
//! transmon-like qubits with imperfect iSwap-like entanglers.
//!
//! The crate is layered bottom-up:
//!
//! * [`qcore`]: dense few-qubit states, unitaries, probabilities, fidelity
//! * [`gates`]: rotations, the five-parameter iSwap-like family, reference gates
//! * [`ansatz`]: the Bell (12 parameter) and GHZ (24 parameter) circuits
//! * [`measure`]: tomography settings, shot sampling, readout noise and mitigation
//! * [`vqa`]: the tomographic loss, parameter-shift gradients, Nesterov training
//! * [`tomo`]: Cholesky least-squares state tomography, Choi processes, gate fitting
//! * [`chsh`]: CHSH correlators and angle sweeps
//! * [`calib`]: the two-level chevron model used to calibrate the entangler
//!
//! Persisted artifact formats live in [`io`].

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod calib;
pub mod chsh;
pub mod error;
pub mod gates;
pub mod io;
pub mod measure;
mod optim;
pub mod qcore;
pub mod seed;
pub mod tomo;
pub mod vqa;

pub use ansatz::{AnsatzCircuit, Element, ParamVector};
pub use error::{Error, Result};
pub use gates::{ISwapLikeParams, IdealGate, RotationAxis};
pub use measure::{MeasurementPipeline, MeasurementRecord, ReadoutModel, SamplingMode, TomographySetting};
pub use num_complex::Complex64;
pub use qcore::{DensityMatrix, StateVector, Unitary};
pub use tomo::ProcessMatrix;
pub use vqa::{LossConfig, TrainOptions, TrainTrace};
