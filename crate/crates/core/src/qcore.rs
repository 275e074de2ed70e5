//! Dense complex linear algebra for registers of up to three qubits.
//!
//! Basis ordering: qubit 0 is the leftmost ket label and the most significant
//! bit of the basis index, so `|q0 q1 q2>` has index `4*q0 + 2*q1 + q2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const MAX_QUBITS: usize = 3;

const NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_FLOOR: f64 = -1e-9;

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedQubitCount(n_qubits));
    }
    Ok(())
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim >= 2).then(|| dim.trailing_zeros() as usize)
}

/// Kronecker product `a ⊗ b`; `a` acts on the more significant qubits.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: index + 1 });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Accepts amplitudes whose squared norm is within 1e-10 of one and
    /// renormalizes them exactly.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amplitudes.len() });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self::from_raw(n_qubits, amplitudes))
    }

    /// Scales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amplitudes.len() });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || norm_sqr == 0.0 {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self::from_raw(n_qubits, amplitudes))
    }

    pub(crate) fn from_raw(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm != 1.0 {
            amplitudes.iter_mut().for_each(|a| *a /= norm);
        }
        Self { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|`, which is `sqrt(Tr(rho sigma))` for two pure states.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm().min(1.0))
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        check_qubits(n)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self::from_raw(n, amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.dim();
        let elements = CMatrix::from_fn(dim, dim, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { n_qubits: self.n_qubits, elements }
    }
}

/// A mixed state `rho`: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    elements: CMatrix,
}

impl DensityMatrix {
    pub fn new(elements: CMatrix) -> Result<Self> {
        let (rows, cols) = elements.shape();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, found: cols });
        }
        let n_qubits = qubits_for_dim(rows).ok_or(Error::DimensionMismatch { expected: 2, found: rows })?;
        check_qubits(n_qubits)?;
        if elements.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm_dev = (&elements - elements.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm_dev));
        }
        let trace = elements.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace(trace));
        }
        let min_eig = hermitian_eigenvalues(&elements).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < PSD_FLOOR {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { n_qubits, elements })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        let elements = CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self { n_qubits, elements })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elements)
    }

    /// Diagonal of `rho`, i.e. computational-basis probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.elements[(i, i)].re.max(0.0)).collect()
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().copied().collect()
}

/// A unitary matrix of dimension 2, 4 or 8.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    elements: CMatrix,
}

impl Unitary {
    pub fn new(elements: CMatrix) -> Result<Self> {
        let (rows, cols) = elements.shape();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, found: cols });
        }
        let n = qubits_for_dim(rows).ok_or(Error::DimensionMismatch { expected: 2, found: rows })?;
        check_qubits(n)?;
        let dev = unitarity_deviation(&elements);
        if !(dev <= UNITARY_TOL) {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { elements })
    }

    /// Row-major construction.
    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub(crate) fn from_raw(elements: CMatrix) -> Self {
        Self { elements }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.elements
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.elements[(row, col)]
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary { elements: self.elements.adjoint() }
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Unitary) -> Result<Unitary> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Unitary { elements: &self.elements * &rhs.elements })
    }

    pub fn kron(&self, rhs: &Unitary) -> Result<Unitary> {
        check_qubits(self.n_qubits() + rhs.n_qubits())?;
        Ok(Unitary { elements: kron(&self.elements, &rhs.elements) })
    }

    /// Largest elementwise deviation of `U^dag U` from the identity.
    pub fn deviation_from_unitary(&self) -> f64 {
        unitarity_deviation(&self.elements)
    }
}

fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(want, 0.0)).norm());
        }
    }
    dev
}

fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    for (pos, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::TargetOutOfRange { target: t, n_qubits });
        }
        if targets[..pos].contains(&t) {
            return Err(Error::RepeatedTarget(t));
        }
    }
    Ok(())
}

/// Applies `gate` to the ordered `targets`; `targets[0]` is the most
/// significant qubit of the gate's own basis.
pub fn apply_unitary(state: &StateVector, gate: &Unitary, targets: &[usize]) -> Result<StateVector> {
    let amps = apply_matrix(state.n_qubits, &state.amplitudes, gate.matrix(), targets)?;
    Ok(StateVector::from_raw(state.n_qubits, amps))
}

pub(crate) fn apply_matrix(
    n_qubits: usize,
    amps: &[Complex64],
    gate: &CMatrix,
    targets: &[usize],
) -> Result<Vec<Complex64>> {
    let k = targets.len();
    let gate_dim = 1usize << k;
    if gate.nrows() != gate_dim || gate.ncols() != gate_dim {
        return Err(Error::DimensionMismatch { expected: gate_dim, found: gate.nrows() });
    }
    check_targets(n_qubits, targets)?;

    let bit_of = |q: usize| 1usize << (n_qubits - 1 - q);
    let mask: usize = targets.iter().map(|&q| bit_of(q)).sum();
    // offsets[r]: basis offset selected by local gate index r
    let offsets: Vec<usize> = (0..gate_dim)
        .map(|r| {
            targets
                .iter()
                .enumerate()
                .filter(|(m, _)| r >> (k - 1 - m) & 1 == 1)
                .map(|(_, &q)| bit_of(q))
                .sum()
        })
        .collect();

    let mut out = amps.to_vec();
    let mut local = vec![Complex64::new(0.0, 0.0); gate_dim];
    for base in (0..amps.len()).filter(|b| b & mask == 0) {
        for (c, off) in offsets.iter().enumerate() {
            local[c] = amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in local.iter().enumerate() {
                acc += gate[(r, c)] * v;
            }
            out[base | off] = acc;
        }
    }
    Ok(out)
}

/// `|amplitude|^2` for every basis index (qubit 0 most significant).
pub fn basis_probabilities(state: &StateVector) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// `F = sqrt(Tr(rho_exp rho_targ))`, clamped to `[0, 1]`.
pub fn state_fidelity(rho_exp: &DensityMatrix, rho_targ: &DensityMatrix) -> Result<f64> {
    if rho_exp.dim() != rho_targ.dim() {
        return Err(Error::DimensionMismatch { expected: rho_targ.dim(), found: rho_exp.dim() });
    }
    let a = rho_exp.matrix();
    let b = rho_targ.matrix();
    let dim = a.nrows();
    // Tr(AB) = sum_ij A_ij B_ji
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            tr += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(tr.re.clamp(0.0, 1.0).sqrt())
}

/// Fidelity of a mixed state against a pure target, `sqrt(<psi|rho|psi>)`.
pub fn pure_target_fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    state_fidelity(rho, &target.to_density())
}

/// The four Bell states `|β_xy> = (|0y> + (-1)^x |1ȳ>)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BellState {
    #[serde(rename = "beta00")]
    Beta00,
    #[serde(rename = "beta01")]
    Beta01,
    #[serde(rename = "beta10")]
    Beta10,
    #[serde(rename = "beta11")]
    Beta11,
}

impl BellState {
    pub const ALL: [BellState; 4] = [BellState::Beta00, BellState::Beta01, BellState::Beta10, BellState::Beta11];

    pub fn label(&self) -> &'static str {
        match self {
            BellState::Beta00 => "beta00",
            BellState::Beta01 => "beta01",
            BellState::Beta10 => "beta10",
            BellState::Beta11 => "beta11",
        }
    }

    pub fn state(&self) -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b, sign) = match self {
            BellState::Beta00 => (0b00, 0b11, 1.0),
            BellState::Beta01 => (0b01, 0b10, 1.0),
            BellState::Beta10 => (0b00, 0b11, -1.0),
            BellState::Beta11 => (0b01, 0b10, -1.0),
        };
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[a] = Complex64::new(h, 0.0);
        amps[b] = Complex64::new(sign * h, 0.0);
        StateVector::from_raw(2, amps)
    }
}

impl std::str::FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellState::ALL
            .into_iter()
            .find(|b| b.label() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown Bell state `{s}`")))
    }
}

/// `(|000> + |111>)/√2`.
pub fn ghz_state() -> StateVector {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0] = h;
    amps[7] = h;
    StateVector::from_raw(3, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn iswap() -> Unitary {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        Unitary::from_rows(4, &[o, z, z, z, z, z, i, z, z, i, z, z, z, z, z, o]).unwrap()
    }

    fn bell() -> StateVector {
        let h = c(FRAC_1_SQRT_2, 0.0);
        let z = c(0.0, 0.0);
        StateVector::from_amplitudes(2, vec![h, z, z, h]).unwrap()
    }

    #[test]
    fn identity_leaves_basis_state() {
        let s = StateVector::basis(2, 0b01).unwrap();
        let out = apply_unitary(&s, &Unitary::identity(4).unwrap(), &[0, 1]).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn bit_flip_on_qubit_zero() {
        // Rx(pi) = -i X
        let z = c(0.0, 0.0);
        let mi = c(0.0, -1.0);
        let rx_pi = Unitary::from_rows(2, &[z, mi, mi, z]).unwrap();
        let out = apply_unitary(&StateVector::zero(2).unwrap(), &rx_pi, &[0]).unwrap();
        let want = StateVector::basis(2, 0b10).unwrap();
        assert!((out.overlap(&want).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iswap_maps_01_to_i_10() {
        let out = apply_unitary(&StateVector::basis(2, 0b01).unwrap(), &iswap(), &[0, 1]).unwrap();
        let a = out.amplitudes();
        assert!((a[2] - c(0.0, 1.0)).norm() < 1e-15);
        assert!(a[0].norm() + a[1].norm() + a[3].norm() < 1e-15);
    }

    #[test]
    fn reversed_targets_swap_roles() {
        // X on the gate's first target lands on qubit 1 when targets are [1, 0]
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let x = Unitary::from_rows(2, &[z, o, o, z]).unwrap();
        let xi = x.kron(&Unitary::identity(2).unwrap()).unwrap();
        let out = apply_unitary(&StateVector::zero(2).unwrap(), &xi, &[1, 0]).unwrap();
        assert!((out.amplitudes()[0b01].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn probabilities_examples() {
        assert_eq!(basis_probabilities(&StateVector::zero(2).unwrap()), vec![1.0, 0.0, 0.0, 0.0]);
        let p = basis_probabilities(&bell());
        for (got, want) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn fidelity_examples() {
        let b = bell().to_density();
        assert!((state_fidelity(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        let zero = StateVector::zero(2).unwrap().to_density();
        assert!((state_fidelity(&zero, &b).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((state_fidelity(&mixed, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn apply_errors() {
        let s = StateVector::zero(2).unwrap();
        let u4 = Unitary::identity(4).unwrap();
        assert!(matches!(apply_unitary(&s, &u4, &[0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(apply_unitary(&s, &u4, &[1, 1]), Err(Error::RepeatedTarget(1)));
        assert!(matches!(apply_unitary(&s, &u4, &[0, 2]), Err(Error::TargetOutOfRange { .. })));
    }

    #[test]
    fn density_validation() {
        let mut m = bell().to_density().matrix().clone();
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 3)] += c(0.0, 0.1);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian(_))));

        let mut neg = CMatrix::zeros(2, 2);
        neg[(0, 0)] = c(1.2, 0.0);
        neg[(1, 1)] = c(-0.2, 0.0);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive(_))));

        let half = CMatrix::identity(2, 2) * c(0.4, 0.0);
        assert!(matches!(DensityMatrix::new(half), Err(Error::BadTrace(_))));
    }

    #[test]
    fn rejects_non_unitary_and_unnormalized() {
        let m = CMatrix::identity(2, 2) * c(1.1, 0.0);
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary(_))));
        let amps = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(StateVector::from_amplitudes(2, amps), Err(Error::NotNormalized(_))));
        assert!(StateVector::zero(4).is_err());
    }
}
