//! State tomography by least squares over a Cholesky parameterization,
//! normalized Choi representations of unitary processes, and fitting of the
//! iSwap-like family to a target process.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{iswap_like_jacobian, iswap_like_matrix, rotation_matrix, GaugeFreedom, ISwapLikeParams};
use crate::measure::{MeasurementRecord, TomographySetting};
use crate::optim::{minimize, GdOptions, Minimum};
use crate::qcore::{hermitian_eigenvalues, kron, CMatrix, DensityMatrix, Unitary};
use crate::seed;
use crate::Complex64;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Real coordinates of a lower-triangular `T` with `rho = T†T / Tr(T†T)`:
/// the `d` diagonal entries first, then real and imaginary parts of each
/// strictly-lower entry in row-major order. Length `d² = 4^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CholeskyVector {
    n_qubits: usize,
    values: Vec<f64>,
}

impl CholeskyVector {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if values.len() != dim * dim {
            return Err(Error::ParamLength { expected: dim * dim, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Cholesky coordinates"));
        }
        Ok(Self { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triangular(&self) -> CMatrix {
        unpack_triangular(1 << self.n_qubits, &self.values)
    }

    /// Fails only for the all-zero vector.
    pub fn decode(&self) -> Result<DensityMatrix> {
        let t = self.triangular();
        let a = t.adjoint() * &t;
        let trace = a.trace().re;
        if !(trace > 0.0) {
            return Err(Error::BadTrace(trace));
        }
        DensityMatrix::new(hermitize(&a) / Complex64::new(trace, 0.0))
    }
}

fn unpack_triangular(dim: usize, v: &[f64]) -> CMatrix {
    let mut t = CMatrix::zeros(dim, dim);
    for a in 0..dim {
        t[(a, a)] = Complex64::new(v[a], 0.0);
    }
    let mut k = dim;
    for a in 0..dim {
        for b in 0..a {
            t[(a, b)] = Complex64::new(v[k], v[k + 1]);
            k += 2;
        }
    }
    t
}

fn pack_gradient(dim: usize, k_mat: &CMatrix) -> Vec<f64> {
    let mut g = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        g.push(2.0 * k_mat[(a, a)].re);
    }
    for a in 0..dim {
        for b in 0..a {
            g.push(2.0 * k_mat[(a, b)].re);
            g.push(2.0 * k_mat[(a, b)].im);
        }
    }
    g
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Full pre-rotation unitary of a setting, qubit 0 most significant.
fn setting_unitary(setting: &TomographySetting) -> CMatrix {
    let mut u = CMatrix::identity(1, 1);
    for r in &setting.rotations {
        let single = match r.axis_angle() {
            Some((axis, angle)) => rotation_matrix(axis, angle),
            None => CMatrix::identity(2, 2),
        };
        u = kron(&u, &single);
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop a restart once the residual drops below this.
    pub residual_tol: f64,
    pub grad_tol: f64,
    /// Stop a restart once the residual stops improving by this relative
    /// amount per iteration.
    pub stall_tol: f64,
    pub seed: u64,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        Self { restarts: 5, max_iters: 5000, residual_tol: 1e-10, grad_tol: 1e-10, stall_tol: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state: DensityMatrix,
    pub cholesky: CholeskyVector,
    /// `Σ (p_model − p_measured)²` at the returned state.
    pub residual: f64,
    /// False when no restart met the residual or gradient tolerance.
    pub converged: bool,
    pub best_restart: usize,
}

/// Measurement operators `P_ij = R_i† |j><j| R_i` paired with the measured
/// probabilities.
struct LeastSquares {
    dim: usize,
    projectors: Vec<CMatrix>,
    measured: Vec<f64>,
}

impl LeastSquares {
    fn new(records: &[MeasurementRecord], settings: &[TomographySetting]) -> Result<Self> {
        let n_qubits = settings.first().map(|s| s.n_qubits()).ok_or_else(|| Error::InvalidConfig("no tomography settings".into()))?;
        let dim = 1usize << n_qubits;
        let mut projectors = Vec::new();
        let mut measured = Vec::new();
        for s in settings {
            if s.n_qubits() != n_qubits {
                return Err(Error::InvalidConfig("settings disagree on qubit count".into()));
            }
            let rec = records
                .iter()
                .find(|r| r.setting_index == s.index)
                .ok_or_else(|| Error::InvalidConfig(format!("no record for setting {}", s.index)))?;
            let probs = rec.probabilities();
            if probs.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: probs.len() });
            }
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("measured probabilities"));
            }
            let u = setting_unitary(s);
            for (j, &p) in probs.iter().enumerate() {
                let row = u.row(j);
                projectors.push(row.adjoint() * row);
                measured.push(p);
            }
        }
        Ok(Self { dim, projectors, measured })
    }

    fn objective(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let t = unpack_triangular(self.dim, v);
        let a = t.adjoint() * &t;
        let trace = a.trace().re;
        if !(trace > 0.0) {
            return (f64::INFINITY, vec![0.0; v.len()]);
        }
        let rho = &a / Complex64::new(trace, 0.0);
        let mut value = 0.0;
        let mut g = CMatrix::zeros(self.dim, self.dim);
        for (p, m) in self.projectors.iter().zip(&self.measured) {
            let model = p.component_mul(&rho.transpose()).sum().re;
            let r = model - m;
            value += r * r;
            g += p * Complex64::new(2.0 * r, 0.0);
        }
        // H = (G − Tr(Gρ) I)/t, ∂f/∂T = 2 T H componentwise
        let g_rho = g.component_mul(&rho.transpose()).sum().re;
        let h = (g - CMatrix::identity(self.dim, self.dim) * Complex64::new(g_rho, 0.0)) / Complex64::new(trace, 0.0);
        (value, pack_gradient(self.dim, &(&t * h)))
    }
}

fn random_cholesky(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn best_of(results: Vec<Minimum>) -> (usize, Minimum) {
    let mut best = 0;
    for (i, m) in results.iter().enumerate() {
        if m.value < results[best].value {
            best = i;
        }
    }
    (best, results.into_iter().nth(best).expect("at least one restart"))
}

/// Least-squares state estimate from per-setting probabilities. Restart 0
/// starts from the maximally mixed state, restart `r > 0` from Gaussian
/// coordinates seeded by `derive(seed, [r])`.
pub fn reconstruct_state(
    records: &[MeasurementRecord],
    settings: &[TomographySetting],
    opts: &TomographyOptions,
) -> Result<Reconstruction> {
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig("tomography needs at least one restart".into()));
    }
    let problem = LeastSquares::new(records, settings)?;
    let dim = problem.dim;
    let gd = GdOptions { max_iters: opts.max_iters, grad_tol: opts.grad_tol, value_tol: opts.residual_tol, rel_tol: opts.stall_tol };
    let results: Vec<Minimum> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = if r == 0 {
                let mut v = vec![0.0; dim * dim];
                v[..dim].fill(1.0);
                v
            } else {
                random_cholesky(dim, seed::derive(opts.seed, &[r as u64]))
            };
            minimize(|x| problem.objective(x), x0, &gd)
        })
        .collect();
    let any_converged = results.iter().any(|m| m.converged);
    let (best_restart, best) = best_of(results);
    let cholesky = CholeskyVector::new(dim.trailing_zeros() as usize, best.x)?;
    Ok(Reconstruction {
        state: cholesky.decode()?,
        cholesky,
        residual: best.value,
        converged: best.converged || any_converged,
        best_restart,
    })
}

/// Normalized Choi state of a channel on `dim`-dimensional inputs: a
/// `dim² × dim²` Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    dim: usize,
    choi: CMatrix,
}

const PROCESS_TOL: f64 = 1e-9;

/// `|U>> = Σ_i |i> ⊗ U|i> / √d`, index `i·d + k`.
fn choi_vector(u: &CMatrix) -> Vec<Complex64> {
    let d = u.nrows();
    let norm = 1.0 / (d as f64).sqrt();
    let mut v = vec![C0; d * d];
    for i in 0..d {
        for k in 0..d {
            v[i * d + k] = u[(k, i)] * norm;
        }
    }
    v
}

impl ProcessMatrix {
    pub fn new(choi: CMatrix) -> Result<Self> {
        let (rows, cols) = choi.shape();
        let dim = (rows as f64).sqrt().round() as usize;
        if rows != cols || dim * dim != rows || dim < 2 {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: cols });
        }
        if choi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("process matrix"));
        }
        let herm = (&choi - choi.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > PROCESS_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let trace = choi.trace().re;
        if (trace - 1.0).abs() > PROCESS_TOL {
            return Err(Error::BadTrace(trace));
        }
        let min_eig = hermitian_eigenvalues(&choi).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -PROCESS_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { dim, choi })
    }

    /// Input dimension `d` of the channel.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.choi
    }

    pub fn purity(&self) -> f64 {
        self.choi.component_mul(&self.choi.transpose()).sum().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.choi)
    }
}

/// Choi state of `X ↦ U X U†`; rank one.
pub fn unitary_to_process(u: &Unitary) -> ProcessMatrix {
    let v = CMatrix::from_column_slice(u.dim() * u.dim(), 1, &choi_vector(u.matrix()));
    ProcessMatrix { dim: u.dim(), choi: &v * v.adjoint() }
}

/// `F = √Tr(M_exp M_targ)`, clamped to `[0, 1]`.
pub fn process_fidelity(m_exp: &ProcessMatrix, m_targ: &ProcessMatrix) -> Result<f64> {
    if m_exp.dim != m_targ.dim {
        return Err(Error::DimensionMismatch { expected: m_targ.dim, found: m_exp.dim });
    }
    let tr = m_exp.choi.component_mul(&m_targ.choi.transpose()).sum().re;
    Ok(tr.clamp(0.0, 1.0).sqrt())
}

/// Gate fidelity with the identity-operation (readout and preparation)
/// error factored out: `F_final = F_id · F_gate`.
pub fn readout_adjusted_fidelity(f_final: f64, f_id: f64) -> Result<f64> {
    if !f_final.is_finite() || !f_id.is_finite() {
        return Err(Error::NonFinite("fidelity"));
    }
    if !(f_id > 0.0 && f_id <= 1.0) || !(0.0..=1.0).contains(&f_final) {
        return Err(Error::InvalidConfig(format!("fidelities must lie in (0, 1], got {f_final} and {f_id}")));
    }
    Ok(f_final / f_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Fits below this fidelity are flagged as a model mismatch.
    pub fidelity_floor: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 16, max_iters: 2000, fidelity_floor: 0.999, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateFit {
    /// Canonical form, see [`ISwapLikeParams::canonical`].
    pub params: ISwapLikeParams,
    pub fidelity: f64,
    pub below_floor: bool,
    pub gauge: GaugeFreedom,
}

/// `1 − <<U(p)| M |U(p)>>` and its gradient; parameters with `fixed[k]`
/// get a zero gradient.
fn fit_objective(target: &CMatrix, x: &[f64], fixed: &[bool; 5]) -> (f64, Vec<f64>) {
    let p = ISwapLikeParams::from_array([x[0], x[1], x[2], x[3], x[4]]);
    let u = choi_vector(&iswap_like_matrix(&p));
    let n = u.len();
    let mut mu = vec![C0; n];
    for (r, out) in mu.iter_mut().enumerate() {
        *out = (0..n).map(|c| target[(r, c)] * u[c]).sum();
    }
    let overlap: f64 = u.iter().zip(&mu).map(|(a, b)| (a.conj() * b).re).sum();
    let grad = iswap_like_jacobian(&p)
        .iter()
        .zip(fixed)
        .map(|(d, &fixed)| {
            if fixed {
                return 0.0;
            }
            let du = choi_vector(d);
            -2.0 * du.iter().zip(&mu).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
        })
        .collect();
    (1.0 - overlap, grad)
}

fn random_start(seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let mut x = vec![theta];
    x.extend((0..4).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)));
    x
}

/// Best iSwap-like approximation of a two-qubit process. Restart 0 starts at
/// the ideal iSwap, restart `r > 0` at a uniform random point seeded by
/// `derive(seed, [r])`. Phases left unidentifiable by the fitted `θ` are
/// pinned to zero and the others re-optimized.
pub fn fit_iswap_like(target: &ProcessMatrix, opts: &FitOptions) -> Result<GateFit> {
    if target.dim != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: target.dim });
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig("gate fit needs at least one restart".into()));
    }
    let m = target.matrix();
    let gd = GdOptions { max_iters: opts.max_iters, grad_tol: 1e-13, ..GdOptions::default() };
    let results: Vec<Minimum> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = if r == 0 { ISwapLikeParams::ideal().to_array().to_vec() } else { random_start(seed::derive(opts.seed, &[r as u64])) };
            minimize(|x| fit_objective(m, x, &[false; 5]), x0, &gd)
        })
        .collect();
    let (_, best) = best_of(results);
    let raw = ISwapLikeParams::from_array([best.x[0], best.x[1], best.x[2], best.x[3], best.x[4]]);
    let (mut params, gauge) = raw.canonical();
    if gauge.any() {
        let fixed = [false, false, false, gauge.delta_minus_free, gauge.delta_minus_off_free];
        let polished = minimize(|x| fit_objective(m, x, &fixed), params.to_array().to_vec(), &gd);
        let x = polished.x;
        params = ISwapLikeParams::from_array([x[0], x[1], x[2], x[3], x[4]]).canonical().0;
    }
    params.validate()?;
    let fidelity = process_fidelity(&unitary_to_process(&crate::gates::iswap_like(&params)), target)?;
    Ok(GateFit { params, fidelity, below_floor: fidelity < opts.fidelity_floor, gauge })
}

/// Convenience wrapper: fit to the process of a unitary.
pub fn fit_iswap_like_unitary(target: &Unitary, opts: &FitOptions) -> Result<GateFit> {
    if target.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: target.dim() });
    }
    fit_iswap_like(&unitary_to_process(target), opts)
}
