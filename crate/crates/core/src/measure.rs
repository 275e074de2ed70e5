//! Measurement side of the simulator: tomography pre-rotations, multinomial
//! shot sampling, readout confusion and inverse-matrix mitigation.
//!
//! Confusion matrices are column-stochastic: `M[read, prepared]`. Readout
//! noise acts on exact probabilities before sampling, and mitigation is a
//! left-multiplication by `M^-1` followed by clipping negatives and
//! renormalizing.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{rotation_matrix, RotationAxis};
use crate::qcore::{apply_matrix, basis_probabilities, StateVector};
use crate::seed;

pub const DEFAULT_SHOTS: u64 = 2000;
pub const DEFAULT_CONDITION_CAP: f64 = 1e3;

const PROB_TOL: f64 = 1e-9;
const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreRotation {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "X90")]
    XHalf,
    #[serde(rename = "Y90")]
    YHalf,
}

impl PreRotation {
    pub const ALL: [PreRotation; 3] = [PreRotation::Identity, PreRotation::XHalf, PreRotation::YHalf];

    pub fn axis_angle(&self) -> Option<(RotationAxis, f64)> {
        match self {
            PreRotation::Identity => None,
            PreRotation::XHalf => Some((RotationAxis::X, FRAC_PI_2)),
            PreRotation::YHalf => Some((RotationAxis::Y, FRAC_PI_2)),
        }
    }
}

/// One measurement basis: a pre-rotation per qubit, then a computational
/// basis readout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographySetting {
    pub index: usize,
    pub rotations: Vec<PreRotation>,
}

impl TomographySetting {
    pub fn n_qubits(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_identity(&self) -> bool {
        self.rotations.iter().all(|r| *r == PreRotation::Identity)
    }

    pub(crate) fn rotate(&self, state: &StateVector) -> Result<StateVector> {
        if state.n_qubits() != self.n_qubits() {
            return Err(Error::DimensionMismatch { expected: 1 << self.n_qubits(), found: state.dim() });
        }
        let mut amps = state.amplitudes().to_vec();
        for (q, r) in self.rotations.iter().enumerate() {
            if let Some((axis, angle)) = r.axis_angle() {
                amps = apply_matrix(state.n_qubits(), &amps, &rotation_matrix(axis, angle), &[q])?;
            }
        }
        Ok(StateVector::from_raw(state.n_qubits(), amps))
    }
}

/// All `3^n` combinations of `{I, X90, Y90}` per qubit. Setting index is the
/// base-3 number formed by the per-qubit choices, qubit 0 most significant;
/// setting 0 is all-identity.
pub fn tomography_settings(n_qubits: usize) -> Result<Vec<TomographySetting>> {
    if !(2..=3).contains(&n_qubits) {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    let count = 3usize.pow(n_qubits as u32);
    Ok((0..count)
        .map(|index| {
            let rotations = (0..n_qubits)
                .map(|q| PreRotation::ALL[(index / 3usize.pow((n_qubits - 1 - q) as u32)) % 3])
                .collect();
            TomographySetting { index, rotations }
        })
        .collect())
}

/// Exact outcome probabilities in the basis selected by `setting`.
pub fn measure_with_setting(state: &StateVector, setting: &TomographySetting) -> Result<Vec<f64>> {
    if setting.is_identity() && state.n_qubits() == setting.n_qubits() {
        return Ok(basis_probabilities(state));
    }
    Ok(basis_probabilities(&setting.rotate(state)?))
}

fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("probability vector"));
    }
    if let Some(p) = probs.iter().find(|&&p| p < -PROB_TOL) {
        return Err(Error::InvalidProbabilities(format!("negative entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Multinomial draw of `shots` outcomes, reproducible for a fixed `seed`.
pub fn sample_shots(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    sample_shots_with(probs, shots, &mut seed::rng(seed))
}

pub fn sample_shots_with<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_probabilities(probs)?;
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    // conditional binomials: outcome i given the mass not yet assigned
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass_left = 1.0f64;
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let p = p.max(0.0);
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(remaining, q).expect("q in [0,1]").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass_left -= p;
    }
    Ok(counts)
}

/// Column-stochastic readout confusion matrix, optionally built from
/// independent per-qubit 2×2 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    n_qubits: usize,
    confusion: DMatrix<f64>,
    per_qubit: Option<Vec<[[f64; 2]; 2]>>,
    inverse: Option<DMatrix<f64>>,
    condition_number: f64,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn kron_real(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (br, bc) = b.shape();
    DMatrix::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

impl ReadoutModel {
    pub fn ideal(n_qubits: usize) -> Result<Self> {
        Self::symmetric(n_qubits, 1.0)
    }

    /// Every qubit reads its prepared value correctly with probability `fidelity`.
    pub fn symmetric(n_qubits: usize, fidelity: f64) -> Result<Self> {
        Self::from_assignment_fidelities(&vec![(fidelity, fidelity); n_qubits])
    }

    /// `(P(read 0 | prepared 0), P(read 1 | prepared 1))` per qubit.
    pub fn from_assignment_fidelities(per_qubit: &[(f64, f64)]) -> Result<Self> {
        let blocks = per_qubit.iter().map(|&(f0, f1)| [[f0, 1.0 - f1], [1.0 - f0, f1]]).collect();
        Self::tensor(blocks)
    }

    /// Tensor product of per-qubit blocks `m[read][prepared]`, qubit 0 first.
    pub fn tensor(blocks: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let n_qubits = blocks.len();
        if n_qubits == 0 || n_qubits > crate::qcore::MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(n_qubits));
        }
        let mut confusion = DMatrix::from_element(1, 1, 1.0);
        for b in &blocks {
            let block = DMatrix::from_row_slice(2, 2, &[b[0][0], b[0][1], b[1][0], b[1][1]]);
            confusion = kron_real(&confusion, &block);
        }
        let mut model = Self::joint(confusion)?;
        model.per_qubit = Some(blocks);
        Ok(model)
    }

    /// A full `2^n × 2^n` column-stochastic matrix (correlated readout).
    pub fn joint(confusion: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = confusion.shape();
        if rows != cols || !rows.is_power_of_two() || rows < 2 {
            return Err(Error::DimensionMismatch { expected: rows.next_power_of_two().max(2), found: cols });
        }
        let n_qubits = rows.trailing_zeros() as usize;
        if n_qubits > crate::qcore::MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(n_qubits));
        }
        if confusion.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("confusion matrix"));
        }
        if let Some(v) = confusion.iter().find(|&&v| !(-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(&v)) {
            return Err(Error::InvalidProbabilities(format!("confusion entry {v} outside [0, 1]")));
        }
        for (k, col) in confusion.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidProbabilities(format!("confusion column {k} sums to {s}")));
            }
        }
        let inverse = confusion.clone().try_inverse();
        let condition_number = condition_number(&confusion);
        Ok(Self { n_qubits, confusion, per_qubit: None, inverse, condition_number })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.confusion.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.confusion
    }

    pub fn per_qubit(&self) -> Option<&[[[f64; 2]; 2]]> {
        self.per_qubit.as_deref()
    }

    /// 2-norm condition number; infinite for a singular matrix.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn inverse(&self) -> Option<&DMatrix<f64>> {
        self.inverse.as_ref()
    }

    /// Readout distribution when basis state `prepared` is measured.
    pub fn column(&self, prepared: usize) -> Vec<f64> {
        self.confusion.column(prepared).iter().copied().collect()
    }
}

/// `M · probs`.
pub fn apply_readout_noise(probs: &[f64], model: &ReadoutModel) -> Result<Vec<f64>> {
    if probs.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: probs.len() });
    }
    let out = model.matrix() * DVector::from_column_slice(probs);
    Ok(out.iter().copied().collect())
}

/// Confusion matrix estimated from a calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionEstimate {
    pub model: ReadoutModel,
    pub condition_number: f64,
    /// Condition number above the configured cap.
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Exact,
    Sampled { shots: u64 },
}

impl SamplingMode {
    pub fn shots(&self) -> Option<u64> {
        match self {
            SamplingMode::Exact => None,
            SamplingMode::Sampled { shots } => Some(*shots),
        }
    }
}

/// Prepares each basis state in turn, reads it out through `source` and
/// tabulates the outcome frequencies column by column.
pub fn calibrate_confusion(source: &ReadoutModel, mode: SamplingMode, seed: u64, cap: f64) -> Result<ConfusionEstimate> {
    let dim = source.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let col = source.column(k);
        let est = match mode {
            SamplingMode::Exact => col,
            SamplingMode::Sampled { shots } => {
                let counts = sample_shots(&col, shots, seed::derive(seed, &[k as u64]))?;
                counts.iter().map(|&c| c as f64 / shots as f64).collect()
            }
        };
        m.set_column(k, &DVector::from_vec(est));
    }
    let model = ReadoutModel::joint(m)?;
    let condition_number = model.condition_number();
    Ok(ConfusionEstimate { ill_conditioned: !(condition_number <= cap), condition_number, model })
}

/// Result of inverse-matrix mitigation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mitigated {
    /// `M^-1 · raw`, may contain negative quasi-probabilities.
    pub unprojected: Vec<f64>,
    /// Negatives clipped to zero, renormalized.
    pub projected: Vec<f64>,
}

pub fn mitigate(raw: &[f64], model: &ReadoutModel) -> Result<Mitigated> {
    mitigate_with_cap(raw, model, DEFAULT_CONDITION_CAP)
}

pub fn mitigate_with_cap(raw: &[f64], model: &ReadoutModel, cap: f64) -> Result<Mitigated> {
    if raw.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: raw.len() });
    }
    let inverse = match model.inverse() {
        Some(inv) if model.condition_number() <= cap => inv,
        _ => return Err(Error::IllConditioned { condition_number: model.condition_number(), cap }),
    };
    let unprojected: Vec<f64> = (inverse * DVector::from_column_slice(raw)).iter().copied().collect();
    let clipped: Vec<f64> = unprojected.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidProbabilities("mitigated vector has no positive mass".into()));
    }
    let projected = clipped.iter().map(|v| v / total).collect();
    Ok(Mitigated { unprojected, projected })
}

/// Per-setting measurement outcome, raw and mitigated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting_index: usize,
    /// `None` for exact (infinite-shot) probabilities.
    pub shots: Option<u64>,
    pub counts: Option<Vec<u64>>,
    pub raw_probs: Vec<f64>,
    pub unprojected_probs: Option<Vec<f64>>,
    pub mitigated_probs: Option<Vec<f64>>,
}

impl MeasurementRecord {
    /// Mitigated probabilities when available, raw otherwise.
    pub fn probabilities(&self) -> &[f64] {
        self.mitigated_probs.as_deref().unwrap_or(&self.raw_probs)
    }
}

/// State → pre-rotation → readout noise → shots → mitigation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPipeline {
    pub mode: SamplingMode,
    pub readout: Option<ReadoutModel>,
    pub mitigation: bool,
    pub condition_cap: f64,
}

impl Default for MeasurementPipeline {
    fn default() -> Self {
        Self::exact()
    }
}

impl MeasurementPipeline {
    pub fn exact() -> Self {
        Self { mode: SamplingMode::Exact, readout: None, mitigation: false, condition_cap: DEFAULT_CONDITION_CAP }
    }

    pub fn sampled(shots: u64) -> Self {
        Self { mode: SamplingMode::Sampled { shots }, ..Self::exact() }
    }

    pub fn with_readout(mut self, model: ReadoutModel, mitigation: bool) -> Self {
        self.readout = Some(model);
        self.mitigation = mitigation;
        self
    }

    pub fn is_exact(&self) -> bool {
        self.mode == SamplingMode::Exact
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if let SamplingMode::Sampled { shots: 0 } = self.mode {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        if let Some(m) = &self.readout {
            if m.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch { expected: 1 << n_qubits, found: m.dim() });
            }
            if self.mitigation && !(m.condition_number() <= self.condition_cap) {
                return Err(Error::IllConditioned { condition_number: m.condition_number(), cap: self.condition_cap });
            }
        }
        Ok(())
    }

    /// Pushes exact probabilities through noise, sampling and mitigation.
    /// `seed` is only consulted in sampled mode.
    pub fn process(&self, setting_index: usize, exact: &[f64], seed: u64) -> Result<MeasurementRecord> {
        let noisy = match &self.readout {
            Some(m) => apply_readout_noise(exact, m)?,
            None => exact.to_vec(),
        };
        let (shots, counts, raw_probs) = match self.mode {
            SamplingMode::Exact => (None, None, noisy),
            SamplingMode::Sampled { shots } => {
                let counts = sample_shots(&noisy, shots, seed)?;
                let raw = counts.iter().map(|&c| c as f64 / shots as f64).collect();
                (Some(shots), Some(counts), raw)
            }
        };
        let (unprojected_probs, mitigated_probs) = match (&self.readout, self.mitigation) {
            (Some(m), true) => {
                let mit = mitigate_with_cap(&raw_probs, m, self.condition_cap)?;
                (Some(mit.unprojected), Some(mit.projected))
            }
            _ => (None, None),
        };
        Ok(MeasurementRecord { setting_index, shots, counts, raw_probs, unprojected_probs, mitigated_probs })
    }

    pub fn measure(&self, state: &StateVector, setting: &TomographySetting, seed: u64) -> Result<MeasurementRecord> {
        let exact = measure_with_setting(state, setting)?;
        self.process(setting.index, &exact, seed)
    }

    /// Records for every setting; setting `i` draws from `derive(seed, [i])`.
    pub fn measure_all(&self, state: &StateVector, settings: &[TomographySetting], seed: u64) -> Result<Vec<MeasurementRecord>> {
        settings
            .iter()
            .map(|s| self.measure(state, s, seed::derive(seed, &[s.index as u64])))
            .collect()
    }
}
