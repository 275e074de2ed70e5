//! CHSH correlators and S-value sweeps.
//!
//! Qubit 0 is rotated by `Rx(a)`, qubit 1 by `Rx(b)`, and the correlator is
//! `E(a, b) = P00 − P01 − P10 + P11`. With `a' = a + π/2`, `b' = b + π/2`:
//!
//! ```text
//! S1 =  E(a,b) + E(a',b) + E(a,b') − E(a',b')
//! S2 = −E(a,b) − E(a',b) + E(a,b') − E(a',b')
//! ```

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{rotation_matrix, RotationAxis};
use crate::measure::MeasurementPipeline;
use crate::qcore::{apply_matrix, BellState, StateVector};
use crate::seed;

/// Repetitions per grid point in sampled mode.
pub const DEFAULT_REPETITIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChshVariant {
    S1,
    S2,
}

impl ChshVariant {
    /// `S1` for `β00`/`β01`, `S2` for `β10`/`β11`.
    pub fn for_bell(bell: BellState) -> Self {
        match bell {
            BellState::Beta00 | BellState::Beta01 => ChshVariant::S1,
            BellState::Beta10 | BellState::Beta11 => ChshVariant::S2,
        }
    }

    /// Combines `[E(a,b), E(a',b), E(a,b'), E(a',b')]`.
    pub fn combine(&self, e: [f64; 4]) -> f64 {
        match self {
            ChshVariant::S1 => e[0] + e[1] + e[2] - e[3],
            ChshVariant::S2 => -e[0] - e[1] + e[2] - e[3],
        }
    }
}

impl fmt::Display for ChshVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChshVariant::S1 => "s1",
            ChshVariant::S2 => "s2",
        })
    }
}

impl FromStr for ChshVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(ChshVariant::S1),
            "s2" => Ok(ChshVariant::S2),
            other => Err(Error::InvalidConfig(format!("unknown CHSH variant '{other}' (expected s1 or s2)"))),
        }
    }
}

/// `0, π/32, …, 2π`: 65 points, which contains the extrema of the ideal
/// Bell-state curves.
pub fn default_thetas() -> Vec<f64> {
    (0..=64).map(|k| k as f64 * PI / 32.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshConfig {
    pub variant: ChshVariant,
    /// Values of `θ = a − b`; `a` is swept with `b` fixed.
    pub thetas: Vec<f64>,
    pub base_angle: f64,
    pub pipeline: MeasurementPipeline,
    /// Repetitions per point in sampled mode; exact mode always uses one.
    pub repetitions: usize,
    pub seed: u64,
}

impl ChshConfig {
    pub fn new(variant: ChshVariant, pipeline: MeasurementPipeline) -> Self {
        Self { variant, thetas: default_thetas(), base_angle: 0.0, pipeline, repetitions: DEFAULT_REPETITIONS, seed: 0 }
    }

    pub fn for_bell(bell: BellState, pipeline: MeasurementPipeline) -> Self {
        Self::new(ChshVariant::for_bell(bell), pipeline)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::InvalidConfig("CHSH angle grid is empty".into()));
        }
        if self.thetas.iter().any(|t| !t.is_finite()) || !self.base_angle.is_finite() {
            return Err(Error::NonFinite("CHSH angle"));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        self.pipeline.validate(2)
    }

    fn effective_repetitions(&self) -> usize {
        if self.pipeline.is_exact() {
            1
        } else {
            self.repetitions
        }
    }
}

/// Exact probabilities after `Rx(a) ⊗ Rx(b)`.
fn rotated_probabilities(state: &StateVector, a: f64, b: f64) -> Result<Vec<f64>> {
    if state.n_qubits() != 2 {
        return Err(Error::UnsupportedQubitCount(state.n_qubits()));
    }
    let amps = apply_matrix(2, state.amplitudes(), &rotation_matrix(RotationAxis::X, a), &[0])?;
    let amps = apply_matrix(2, &amps, &rotation_matrix(RotationAxis::X, b), &[1])?;
    Ok(amps.iter().map(|z| z.norm_sqr()).collect())
}

fn signed_sum(p: &[f64]) -> f64 {
    p[0] - p[1] - p[2] + p[3]
}

/// `E(a, b)` through `pipeline`; `seed` only matters in sampled mode.
pub fn correlator(state: &StateVector, a: f64, b: f64, pipeline: &MeasurementPipeline, seed: u64) -> Result<f64> {
    let exact = rotated_probabilities(state, a, b)?;
    let record = pipeline.process(0, &exact, seed)?;
    Ok(signed_sum(record.probabilities()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshPoint {
    pub theta: f64,
    /// Repetition means of `E(a,b), E(a',b), E(a,b'), E(a',b')`.
    pub correlators: [f64; 4],
    pub s: f64,
    /// Sample standard deviation of `S` over repetitions; zero for one.
    pub sigma_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub variant: ChshVariant,
    pub repetitions: usize,
    pub points: Vec<ChshPoint>,
    pub max_abs_s: f64,
    pub theta_at_max: f64,
    pub sigma_at_max: f64,
}

/// Sweeps `θ`. Correlator `c` of repetition `r` at grid point `k` draws its
/// shots from `derive(seed, [k, r, c])`.
pub fn chsh_sweep(state: &StateVector, cfg: &ChshConfig) -> Result<ChshResult> {
    cfg.validate()?;
    if state.n_qubits() != 2 {
        return Err(Error::UnsupportedQubitCount(state.n_qubits()));
    }
    let reps = cfg.effective_repetitions();
    let b = cfg.base_angle;
    let points = cfg
        .thetas
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let a = theta + b;
            let angles = [(a, b), (a + FRAC_PI_2, b), (a, b + FRAC_PI_2), (a + FRAC_PI_2, b + FRAC_PI_2)];
            let exact = angles.iter().map(|&(x, y)| rotated_probabilities(state, x, y)).collect::<Result<Vec<_>>>()?;
            let mut sums = [0.0; 4];
            let mut s_values = Vec::with_capacity(reps);
            for r in 0..reps {
                let mut e = [0.0; 4];
                for (c, probs) in exact.iter().enumerate() {
                    let rec = cfg.pipeline.process(0, probs, seed::derive(cfg.seed, &[k as u64, r as u64, c as u64]))?;
                    e[c] = signed_sum(rec.probabilities());
                    sums[c] += e[c];
                }
                s_values.push(cfg.variant.combine(e));
            }
            let correlators = sums.map(|v| v / reps as f64);
            let s = s_values.iter().sum::<f64>() / reps as f64;
            let sigma_s = if reps > 1 {
                (s_values.iter().map(|v| (v - s).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(ChshPoint { theta, correlators, s, sigma_s })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.s.abs() > points[best].s.abs() {
            best = i;
        }
    }
    Ok(ChshResult {
        variant: cfg.variant,
        repetitions: reps,
        max_abs_s: points[best].s.abs(),
        theta_at_max: points[best].theta,
        sigma_at_max: points[best].sigma_s,
        points,
    })
}
