//! Gate matrices: single-qubit rotations, the five-parameter iSwap-like
//! family and a few ideal reference gates.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{CMatrix, Unitary};

/// Below this `|cos θ|` (resp. `|sin θ|`) the phase `Δ−` (resp. `Δ−,off`)
/// no longer affects the gate measurably and is reported as zero.
pub const GAUGE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationAxis {
    X,
    Y,
}

impl fmt::Display for RotationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotationAxis::X => f.write_str("X"),
            RotationAxis::Y => f.write_str("Y"),
        }
    }
}

pub(crate) fn rotation_matrix(axis: RotationAxis, angle: f64) -> CMatrix {
    let (s, c) = (angle / 2.0).sin_cos();
    let entries = match axis {
        RotationAxis::X => [
            Complex64::new(c, 0.0),
            Complex64::new(0.0, -s),
            Complex64::new(0.0, -s),
            Complex64::new(c, 0.0),
        ],
        RotationAxis::Y => [
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// `exp(-i * angle * sigma_axis / 2)`.
pub fn rotation(axis: RotationAxis, angle: f64) -> Unitary {
    Unitary::from_raw(rotation_matrix(axis, angle))
}

/// Parameters of the iSwap-like family
///
/// ```text
/// | 1  0                         0                          0            |
/// | 0  e^{i(Δ+ + Δ−)} cos θ      -i e^{i(Δ+ − Δoff)} sin θ  0            |
/// | 0  -i e^{i(Δ+ + Δoff)} sin θ e^{i(Δ+ − Δ−)} cos θ       0            |
/// | 0  0                         0                          e^{i(2Δ+ + φ)} |
/// ```
///
/// in the `|00>, |01>, |10>, |11>` basis with the first qubit of the pair as
/// the most significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ISwapLikeParams {
    pub theta: f64,
    pub phi: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub delta_minus_off: f64,
}

/// Which phases were pinned to zero by [`ISwapLikeParams::canonical`]
/// because the gate does not depend on them at this `θ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeFreedom {
    pub delta_minus_free: bool,
    pub delta_minus_off_free: bool,
}

impl GaugeFreedom {
    pub fn any(&self) -> bool {
        self.delta_minus_free || self.delta_minus_off_free
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

impl ISwapLikeParams {
    pub const fn new(theta: f64, phi: f64, delta_plus: f64, delta_minus: f64, delta_minus_off: f64) -> Self {
        Self { theta, phi, delta_plus, delta_minus, delta_minus_off }
    }

    /// `θ = π/2`, no phases: the ideal iSwap in this family's sign convention.
    pub const fn ideal() -> Self {
        Self::new(FRAC_PI_2, 0.0, 0.0, 0.0, 0.0)
    }

    pub const fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// Gate model obtained from process tomography of a calibrated device
    /// coupler (θ close to π/2 with sizeable conditional and local phases).
    pub const fn fitted_device() -> Self {
        Self::new(1.52, 1.21, -1.69, 0.41, 0.15)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.theta, self.phi, self.delta_plus, self.delta_minus, self.delta_minus_off]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("iSwap-like parameters"))
        }
    }

    /// Reporting form: `θ ∈ [0, π/2]`, phases in `(-π, π]`.
    ///
    /// Uses the exact identities `θ → -θ ≡ Δ−,off + π`,
    /// `θ → π − θ ≡ Δ− + π` and
    /// `(Δ+, Δ−, Δ−,off) → (Δ+ + π, Δ− + π, Δ−,off + π)`; of the two
    /// equivalent phase triples the one with the smaller L1 norm is kept.
    /// Phases that are unidentifiable at this `θ` are set to zero and flagged.
    pub fn canonical(&self) -> (ISwapLikeParams, GaugeFreedom) {
        let mut theta = self.theta.rem_euclid(TAU);
        let mut off = self.delta_minus_off;
        if theta > PI {
            theta = TAU - theta;
            off += PI;
        }
        let mut dm = self.delta_minus;
        if theta > FRAC_PI_2 {
            theta = PI - theta;
            dm += PI;
        }
        let mut dp = wrap_angle(self.delta_plus);
        let mut dm = wrap_angle(dm);
        off = wrap_angle(off);
        let phi = wrap_angle(self.phi);

        let gauge = GaugeFreedom {
            delta_minus_free: theta.cos().abs() < GAUGE_TOL,
            delta_minus_off_free: theta.sin().abs() < GAUGE_TOL,
        };
        if gauge.delta_minus_free {
            dm = 0.0;
        }
        if gauge.delta_minus_off_free {
            off = 0.0;
        }

        let shift = |v: f64, free: bool| if free { 0.0 } else { wrap_angle(v + PI) };
        let alt = (wrap_angle(dp + PI), shift(dm, gauge.delta_minus_free), shift(off, gauge.delta_minus_off_free));
        let l1 = dp.abs() + dm.abs() + off.abs();
        if alt.0.abs() + alt.1.abs() + alt.2.abs() < l1 - 1e-12 {
            (dp, dm, off) = alt;
        }
        (ISwapLikeParams::new(theta, phi, dp, dm, off), gauge)
    }
}

pub(crate) fn iswap_like_matrix(p: &ISwapLikeParams) -> CMatrix {
    let (s, c) = p.theta.sin_cos();
    let e = |phase: f64| Complex64::from_polar(1.0, phase);
    let mi = Complex64::new(0.0, -1.0);
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    m[(1, 1)] = e(p.delta_plus + p.delta_minus) * c;
    m[(1, 2)] = mi * e(p.delta_plus - p.delta_minus_off) * s;
    m[(2, 1)] = mi * e(p.delta_plus + p.delta_minus_off) * s;
    m[(2, 2)] = e(p.delta_plus - p.delta_minus) * c;
    m[(3, 3)] = e(2.0 * p.delta_plus + p.phi);
    m
}

/// Partial derivatives of the iSwap-like matrix with respect to
/// `(θ, φ, Δ+, Δ−, Δ−,off)`.
pub(crate) fn iswap_like_jacobian(p: &ISwapLikeParams) -> [CMatrix; 5] {
    let (s, c) = p.theta.sin_cos();
    let e = |phase: f64| Complex64::from_polar(1.0, phase);
    let i = Complex64::new(0.0, 1.0);
    let mi = -i;
    let a11 = e(p.delta_plus + p.delta_minus);
    let a12 = mi * e(p.delta_plus - p.delta_minus_off);
    let a21 = mi * e(p.delta_plus + p.delta_minus_off);
    let a22 = e(p.delta_plus - p.delta_minus);
    let a33 = e(2.0 * p.delta_plus + p.phi);

    let mut d_theta = CMatrix::zeros(4, 4);
    d_theta[(1, 1)] = -a11 * s;
    d_theta[(1, 2)] = a12 * c;
    d_theta[(2, 1)] = a21 * c;
    d_theta[(2, 2)] = -a22 * s;

    let mut d_phi = CMatrix::zeros(4, 4);
    d_phi[(3, 3)] = i * a33;

    let mut d_plus = CMatrix::zeros(4, 4);
    d_plus[(1, 1)] = i * a11 * c;
    d_plus[(1, 2)] = i * a12 * s;
    d_plus[(2, 1)] = i * a21 * s;
    d_plus[(2, 2)] = i * a22 * c;
    d_plus[(3, 3)] = 2.0 * i * a33;

    let mut d_minus = CMatrix::zeros(4, 4);
    d_minus[(1, 1)] = i * a11 * c;
    d_minus[(2, 2)] = -i * a22 * c;

    let mut d_off = CMatrix::zeros(4, 4);
    d_off[(1, 2)] = -i * a12 * s;
    d_off[(2, 1)] = i * a21 * s;

    [d_theta, d_phi, d_plus, d_minus, d_off]
}

pub fn iswap_like(p: &ISwapLikeParams) -> Unitary {
    Unitary::from_raw(iswap_like_matrix(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdealGate {
    ISwap,
    Cnot,
    Hadamard,
    Identity,
}

impl FromStr for IdealGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iswap" => Ok(IdealGate::ISwap),
            "cnot" | "cx" => Ok(IdealGate::Cnot),
            "hadamard" | "h" => Ok(IdealGate::Hadamard),
            "identity" | "id" | "i" => Ok(IdealGate::Identity),
            _ => Err(Error::UnknownGate(s.to_string())),
        }
    }
}

/// Reference matrices. `ISwap` is the `θ = π/2` member of the iSwap-like
/// family (off-diagonal entries `-i`); `Identity` is the two-qubit identity.
pub fn ideal_gate(gate: IdealGate) -> Unitary {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    match gate {
        IdealGate::ISwap => iswap_like(&ISwapLikeParams::ideal()),
        IdealGate::Cnot => {
            let m = CMatrix::from_row_slice(4, 4, &[o, z, z, z, z, o, z, z, z, z, z, o, z, z, o, z]);
            Unitary::from_raw(m)
        }
        IdealGate::Hadamard => {
            let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
            Unitary::from_raw(CMatrix::from_row_slice(2, 2, &[h, h, h, -h]))
        }
        IdealGate::Identity => Unitary::from_raw(CMatrix::identity(4, 4)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{apply_unitary, StateVector};
    use proptest::prelude::*;

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn rotation_examples() {
        let id = rotation(RotationAxis::X, 0.0);
        assert!(max_diff(id.matrix(), &CMatrix::identity(2, 2)) < 1e-15);

        let zero = StateVector::zero(1).unwrap();
        let flipped = apply_unitary(&zero, &rotation(RotationAxis::X, PI), &[0]).unwrap();
        assert!((flipped.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);

        let plus = apply_unitary(&zero, &rotation(RotationAxis::Y, FRAC_PI_2), &[0]).unwrap();
        assert!((plus.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((plus.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn iswap_like_special_cases() {
        let ideal = iswap_like(&ISwapLikeParams::ideal());
        let mi = Complex64::new(0.0, -1.0);
        assert!((ideal.entry(1, 2) - mi).norm() < 1e-15);
        assert!((ideal.entry(2, 1) - mi).norm() < 1e-15);
        assert!((ideal.entry(0, 0).re - 1.0).abs() < 1e-15);
        assert!((ideal.entry(3, 3).re - 1.0).abs() < 1e-15);
        assert!(ideal.entry(1, 1).norm() < 1e-15);

        let id = iswap_like(&ISwapLikeParams::identity());
        assert!(max_diff(id.matrix(), &CMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn fitted_device_entries() {
        let u = iswap_like(&ISwapLikeParams::fitted_device());
        assert!(u.deviation_from_unitary() < 1e-12);
        assert!((u.entry(1, 2).norm() - 1.52f64.sin()).abs() < 1e-15);
        assert!((u.entry(2, 1).norm() - 0.99871).abs() < 1e-5);
        let want = Complex64::from_polar(1.0, 2.0 * -1.69 + 1.21);
        assert!((u.entry(3, 3) - want).norm() < 1e-15);
    }

    #[test]
    fn ideal_gate_examples() {
        let h = ideal_gate(IdealGate::Hadamard);
        let hh = h.mul(&h).unwrap();
        assert!(max_diff(hh.matrix(), &CMatrix::identity(2, 2)) < 1e-12);

        let s = StateVector::basis(2, 0b10).unwrap();
        let out = apply_unitary(&s, &ideal_gate(IdealGate::Cnot), &[0, 1]).unwrap();
        assert!((out.amplitudes()[0b11].re - 1.0).abs() < 1e-15);

        let a = ideal_gate(IdealGate::ISwap);
        let b = iswap_like(&ISwapLikeParams::new(FRAC_PI_2, 0.0, 0.0, 0.0, 0.0));
        assert!(max_diff(a.matrix(), b.matrix()) < 1e-12);

        assert_eq!("CNOT".parse::<IdealGate>().unwrap(), IdealGate::Cnot);
        assert!(matches!("toffoli".parse::<IdealGate>(), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn canonical_fitted_device_is_stable() {
        let (c, g) = ISwapLikeParams::fitted_device().canonical();
        assert!(!g.any());
        let want = ISwapLikeParams::fitted_device().to_array();
        for (a, b) in c.to_array().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_pins_free_phases() {
        let p = ISwapLikeParams::new(FRAC_PI_2, 0.3, PI, 1.7, PI);
        let (c, g) = p.canonical();
        assert!(g.delta_minus_free && !g.delta_minus_off_free);
        assert_eq!(c.delta_minus, 0.0);
        assert!(c.delta_plus.abs() < 1e-12 && c.delta_minus_off.abs() < 1e-12);
        assert!(max_diff(iswap_like(&c).matrix(), iswap_like(&p).matrix()) < 1e-12);
    }

    fn angle() -> impl Strategy<Value = f64> {
        -10.0f64..10.0
    }

    proptest! {
        #[test]
        fn produced_matrices_are_unitary(t in angle(), p in angle(), a in angle(), b in angle(), c in angle()) {
            let u = iswap_like(&ISwapLikeParams::new(t, p, a, b, c));
            prop_assert!(u.deviation_from_unitary() < 1e-12);
            prop_assert!((u.entry(1, 2).norm() - t.sin().abs()).abs() < 1e-12);
            prop_assert!((u.entry(2, 1).norm() - t.sin().abs()).abs() < 1e-12);
            prop_assert!(rotation(RotationAxis::X, t).deviation_from_unitary() < 1e-12);
            prop_assert!(rotation(RotationAxis::Y, p).deviation_from_unitary() < 1e-12);
        }

        #[test]
        fn same_axis_rotations_add(a in angle(), b in angle(), y in any::<bool>()) {
            let axis = if y { RotationAxis::Y } else { RotationAxis::X };
            let ab = rotation(axis, a).mul(&rotation(axis, b)).unwrap();
            prop_assert!(max_diff(ab.matrix(), rotation(axis, a + b).matrix()) < 1e-10);
        }

        #[test]
        fn phases_are_two_pi_periodic(t in angle(), p in angle(), a in angle(), b in angle(), c in angle(), k in 0usize..4) {
            let base = ISwapLikeParams::new(t, p, a, b, c);
            let mut arr = base.to_array();
            arr[k + 1] += TAU;
            let shifted = ISwapLikeParams::from_array(arr);
            prop_assert!(max_diff(iswap_like(&base).matrix(), iswap_like(&shifted).matrix()) < 1e-10);
        }

        #[test]
        fn canonical_form_is_same_gate(t in angle(), p in angle(), a in angle(), b in angle(), c in angle()) {
            let raw = ISwapLikeParams::new(t, p, a, b, c);
            let (canon, gauge) = raw.canonical();
            prop_assume!(!gauge.any());
            prop_assert!((0.0..=FRAC_PI_2).contains(&canon.theta));
            for v in [canon.phi, canon.delta_plus, canon.delta_minus, canon.delta_minus_off] {
                prop_assert!(v > -PI && v <= PI);
            }
            prop_assert!(max_diff(iswap_like(&raw).matrix(), iswap_like(&canon).matrix()) < 1e-10);
        }

        #[test]
        fn gauge_partners_share_a_canonical_form(t in angle(), p in angle(), a in angle(), b in angle(), c in angle()) {
            let raw = ISwapLikeParams::new(t, p, a, b, c);
            let (canon, gauge) = raw.canonical();
            prop_assume!(!gauge.any());
            let partners = [
                ISwapLikeParams::new(-t, p, a, b, c + PI),
                ISwapLikeParams::new(PI - t, p, a, b + PI, c),
                ISwapLikeParams::new(t, p, a + PI, b + PI, c + PI),
            ];
            for q in partners {
                let (other, _) = q.canonical();
                for (x, y) in canon.to_array().iter().zip(other.to_array()) {
                    let d = wrap_angle(x - y).abs();
                    prop_assert!(d < 1e-9, "{:?} vs {:?}", canon, other);
                }
            }
        }
    }
}
