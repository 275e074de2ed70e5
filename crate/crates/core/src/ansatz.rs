//! The layered variational circuits used to prepare Bell and GHZ states.
//!
//! Bell circuit (two qubits, 12 parameters):
//!
//! ```text
//! q0: ─X(θ0)─Y(θ1)─┤    ├─X(θ4)─Y(θ5)─┤    ├─X(θ8)─Y(θ9)──
//!                  │ iS │             │ iS │
//! q1: ─X(θ2)─Y(θ3)─┤    ├─X(θ6)─Y(θ7)─┤    ├─X(θ10)─Y(θ11)─
//! ```
//!
//! The GHZ circuit appends the same 12-parameter block on pair (1, 2),
//! using θ12..θ23.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{iswap_like_matrix, rotation_matrix, ISwapLikeParams, RotationAxis};
use crate::qcore::{apply_matrix, CMatrix, StateVector, MAX_QUBITS};

pub const BELL_PARAMS: usize = 12;
pub const GHZ_PARAMS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Rotation { qubit: usize, axis: RotationAxis, param: usize },
    Entangler { qubits: [usize; 2], gate: ISwapLikeParams },
}

/// Serializable circuit description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitLayout {
    pub n_qubits: usize,
    pub n_params: usize,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone)]
pub struct AnsatzCircuit {
    layout: CircuitLayout,
    // entangler matrices, index-aligned with `layout.elements`
    cached: Vec<Option<CMatrix>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Uniform in `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random_range(0.0..TAU)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn layered_block(qubits: [usize; 2], gates: [ISwapLikeParams; 2], first_param: usize) -> Vec<Element> {
    let mut elements = Vec::with_capacity(14);
    let mut next = first_param;
    let mut rotations = |elements: &mut Vec<Element>| {
        for &qubit in &qubits {
            for axis in [RotationAxis::X, RotationAxis::Y] {
                elements.push(Element::Rotation { qubit, axis, param: next });
                next += 1;
            }
        }
    };
    for gate in gates {
        rotations(&mut elements);
        elements.push(Element::Entangler { qubits, gate });
    }
    rotations(&mut elements);
    elements
}

/// Bell circuit with the same entangler in both slots.
pub fn build_bell_ansatz(entangler: ISwapLikeParams) -> Result<AnsatzCircuit> {
    build_bell_ansatz_with([entangler; 2])
}

pub fn build_bell_ansatz_with(entanglers: [ISwapLikeParams; 2]) -> Result<AnsatzCircuit> {
    AnsatzCircuit::from_elements(2, BELL_PARAMS, layered_block([0, 1], entanglers, 0))
}

pub fn build_ghz_ansatz(entangler_01: ISwapLikeParams, entangler_12: ISwapLikeParams) -> Result<AnsatzCircuit> {
    let mut elements = layered_block([0, 1], [entangler_01; 2], 0);
    elements.extend(layered_block([1, 2], [entangler_12; 2], BELL_PARAMS));
    AnsatzCircuit::from_elements(3, GHZ_PARAMS, elements)
}

impl AnsatzCircuit {
    /// Low-level constructor. Parameter indices must be `< n_params` and
    /// distinct; they need not all be used.
    pub fn from_elements(n_qubits: usize, n_params: usize, elements: Vec<Element>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(n_qubits));
        }
        let mut seen = vec![false; n_params];
        for e in &elements {
            match *e {
                Element::Rotation { qubit, param, .. } => {
                    if qubit >= n_qubits {
                        return Err(Error::TargetOutOfRange { target: qubit, n_qubits });
                    }
                    if param >= n_params {
                        return Err(Error::ParamLength { expected: n_params, found: param + 1 });
                    }
                    if std::mem::replace(&mut seen[param], true) {
                        return Err(Error::InvalidConfig(format!("parameter {param} used twice")));
                    }
                }
                Element::Entangler { qubits: [a, b], gate } => {
                    for q in [a, b] {
                        if q >= n_qubits {
                            return Err(Error::TargetOutOfRange { target: q, n_qubits });
                        }
                    }
                    if a == b {
                        return Err(Error::RepeatedTarget(a));
                    }
                    gate.validate()?;
                }
            }
        }
        let cached = elements
            .iter()
            .map(|e| match e {
                Element::Entangler { gate, .. } => Some(iswap_like_matrix(gate)),
                Element::Rotation { .. } => None,
            })
            .collect();
        Ok(Self { layout: CircuitLayout { n_qubits, n_params, elements }, cached })
    }

    pub fn from_layout(layout: CircuitLayout) -> Result<Self> {
        Self::from_elements(layout.n_qubits, layout.n_params, layout.elements)
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn elements(&self) -> &[Element] {
        &self.layout.elements
    }

    pub fn entangler_count(&self) -> usize {
        self.cached.iter().filter(|c| c.is_some()).count()
    }

    pub fn rotation_count(&self, axis: RotationAxis) -> usize {
        self.elements()
            .iter()
            .filter(|e| matches!(e, Element::Rotation { axis: a, .. } if *a == axis))
            .count()
    }

    /// Same circuit with every entangler dropped.
    pub fn without_entanglers(&self) -> AnsatzCircuit {
        let elements = self.elements().iter().filter(|e| matches!(e, Element::Rotation { .. })).copied().collect();
        Self::from_elements(self.n_qubits(), self.n_params(), elements).expect("subset of a valid circuit")
    }

    /// Same circuit with the rotation slot of parameter `param` removed.
    pub fn without_slot(&self, param: usize) -> AnsatzCircuit {
        let elements = self
            .elements()
            .iter()
            .filter(|e| !matches!(e, Element::Rotation { param: p, .. } if *p == param))
            .copied()
            .collect();
        Self::from_elements(self.n_qubits(), self.n_params(), elements).expect("subset of a valid circuit")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.layout).expect("layout serializes")
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::ParamLength { expected: self.n_params(), found: params.len() });
        }
        Ok(())
    }

    pub(crate) fn evolve(&self, params: &[f64], amps: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n_qubits();
        let mut state = amps.to_vec();
        for (e, cached) in self.elements().iter().zip(&self.cached) {
            state = match (e, cached) {
                (Element::Rotation { qubit, axis, param }, _) => {
                    apply_matrix(n, &state, &rotation_matrix(*axis, params[*param]), &[*qubit])?
                }
                (Element::Entangler { qubits, .. }, Some(m)) => apply_matrix(n, &state, m, qubits)?,
                (Element::Entangler { .. }, None) => unreachable!("entangler matrices are cached"),
            };
        }
        Ok(state)
    }
}

/// Applies every element of `circuit` in order to `input`.
pub fn run_ansatz(circuit: &AnsatzCircuit, params: &ParamVector, input: &StateVector) -> Result<StateVector> {
    run_ansatz_slice(circuit, params.as_slice(), input)
}

pub(crate) fn run_ansatz_slice(circuit: &AnsatzCircuit, params: &[f64], input: &StateVector) -> Result<StateVector> {
    circuit.check_params(params)?;
    if input.n_qubits() != circuit.n_qubits() {
        return Err(Error::DimensionMismatch { expected: 1 << circuit.n_qubits(), found: input.dim() });
    }
    let out = circuit.evolve(params, input.amplitudes())?;
    Ok(StateVector::from_raw(circuit.n_qubits(), out))
}
