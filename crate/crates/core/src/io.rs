//! Artifact formats: JSON for matrices, CSV for traces, sweeps and maps.
//!
//! Floats are written in Rust's shortest round-trip form, so artifacts are
//! byte-stable for identical values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calib::ChevronMap;
use crate::chsh::ChshResult;
use crate::error::{Error, Result};
use crate::measure::ReadoutModel;
use crate::qcore::{CMatrix, DensityMatrix, Unitary};
use crate::vqa::TrainTrace;
use crate::Complex64;

/// Complex matrix as separate real and imaginary row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixJson {
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl ComplexMatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect()).collect();
        Self { real: rows(|z| z.re), imag: rows(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.real.len();
        let cols = self.real.first().map_or(0, Vec::len);
        let ragged = |a: &Vec<Vec<f64>>| a.len() != n || a.iter().any(|row| row.len() != cols);
        if n == 0 || ragged(&self.real) || ragged(&self.imag) {
            return Err(Error::InvalidConfig("real and imag must be nonempty arrays of equal shape".into()));
        }
        Ok(CMatrix::from_fn(n, cols, |r, c| Complex64::new(self.real[r][c], self.imag[r][c])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixJson {
    pub n_qubits: usize,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl DensityMatrixJson {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let m = ComplexMatrixJson::from_matrix(rho.matrix());
        Self { n_qubits: rho.n_qubits(), real: m.real, imag: m.imag }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        let m = ComplexMatrixJson { real: self.real.clone(), imag: self.imag.clone() }.to_matrix()?;
        let rho = DensityMatrix::new(m)?;
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << self.n_qubits, found: rho.dim() });
        }
        Ok(rho)
    }
}

pub fn unitary_from_json(m: &ComplexMatrixJson) -> Result<Unitary> {
    Unitary::new(m.to_matrix()?)
}

/// Confusion matrix, `matrix[read][prepared]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionJson {
    pub n_qubits: usize,
    pub dim: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl ConfusionJson {
    pub fn from_model(model: &ReadoutModel) -> Self {
        let m = model.matrix();
        let matrix = (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect();
        Self { n_qubits: model.n_qubits(), dim: model.dim(), matrix }
    }

    pub fn to_model(&self) -> Result<ReadoutModel> {
        if self.dim != 1 << self.n_qubits || self.matrix.len() != self.dim || self.matrix.iter().any(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch { expected: 1 << self.n_qubits, found: self.matrix.len() });
        }
        ReadoutModel::joint(DMatrix::from_fn(self.dim, self.dim, |r, c| self.matrix[r][c]))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    v.to_string()
}

fn write_csv(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// `iteration,loss,fidelity,theta_0,…`; fidelity is empty when not logged.
pub fn trace_csv(trace: &TrainTrace) -> String {
    let n = trace.records.first().map_or(0, |r| r.params.len());
    let mut header = vec!["iteration".to_string(), "loss".to_string(), "fidelity".to_string()];
    header.extend((0..n).map(|k| format!("theta_{k}")));
    write_csv(
        header,
        trace.records.iter().map(|r| {
            let mut row = vec![r.iteration.to_string(), num(r.loss), r.fidelity.map(num).unwrap_or_default()];
            row.extend(r.params.iter().map(|&p| num(p)));
            row
        }),
    )
}

/// `theta,E1,E2,E3,E4,S,sigma_S`, one row per grid point.
pub fn chsh_csv(result: &ChshResult) -> String {
    let header = ["theta", "E1", "E2", "E3", "E4", "S", "sigma_S"].map(String::from).to_vec();
    write_csv(
        header,
        result.points.iter().map(|p| {
            let mut row = vec![num(p.theta)];
            row.extend(p.correlators.iter().map(|&e| num(e)));
            row.push(num(p.s));
            row.push(num(p.sigma_s));
            row
        }),
    )
}

/// `t,delta,P`, time-major.
pub fn chevron_csv(map: &ChevronMap) -> String {
    let header = ["t", "delta", "P"].map(String::from).to_vec();
    write_csv(
        header,
        map.times.iter().zip(&map.values).flat_map(|(&t, row)| {
            map.detunings.iter().zip(row).map(move |(&d, &p)| vec![num(t), num(d), num(p)])
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::{chevron_map, ChevronModel};
    use crate::qcore::BellState;
    use crate::vqa::{IterationRecord, StopReason};

    #[test]
    fn density_matrix_round_trip() {
        let rho = BellState::Beta11.state().to_density();
        let json = to_json(&DensityMatrixJson::from_density(&rho));
        let back: DensityMatrixJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_density().unwrap(), rho);
        assert!(json.contains("\"real\"") && json.contains("\"imag\""));
        assert!(serde_json::from_str::<DensityMatrixJson>(r#"{"n_qubits":2,"real":[],"imag":[],"extra":1}"#).is_err());
    }

    #[test]
    fn malformed_matrices_are_rejected() {
        let ragged = ComplexMatrixJson { real: vec![vec![1.0, 0.0], vec![0.0]], imag: vec![vec![0.0; 2]; 2] };
        assert!(ragged.to_matrix().is_err());
        let not_unitary = ComplexMatrixJson { real: vec![vec![2.0, 0.0], vec![0.0, 1.0]], imag: vec![vec![0.0; 2]; 2] };
        assert!(unitary_from_json(&not_unitary).is_err());
    }

    #[test]
    fn confusion_round_trip() {
        let model = ReadoutModel::symmetric(2, 0.85).unwrap();
        let json = ConfusionJson::from_model(&model);
        assert_eq!(json.dim, 4);
        assert!((json.matrix[0][0] - 0.7225).abs() < 1e-15);
        let back = json.to_model().unwrap();
        assert!((back.matrix() - model.matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn trace_csv_layout() {
        let trace = TrainTrace {
            records: vec![
                IterationRecord { iteration: 0, loss: 0.5, fidelity: Some(0.25), params: vec![1.0, 2.5] },
                IterationRecord { iteration: 1, loss: 0.125, fidelity: None, params: vec![1.0, 2.0] },
            ],
            stop_reason: StopReason::MaxIterations,
            converged: false,
            unfreeze_iteration: None,
            init_seed: None,
        };
        assert_eq!(trace_csv(&trace), "iteration,loss,fidelity,theta_0,theta_1\n0,0.5,0.25,1,2.5\n1,0.125,,1,2\n");
    }

    #[test]
    fn chevron_csv_layout() {
        let m = ChevronModel { coupling: 0.1, times: vec![0.0, 1.0], detunings: vec![-0.1, 0.1] };
        let csv = chevron_csv(&chevron_map(&m).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "t,delta,P");
        assert_eq!(lines[1], "0,-0.1,0");
    }
}
