//! Two-level chevron model of `|01> ↔ |10>` population transfer and the
//! search for the maximum-transfer operating point.
//!
//! `P(t, δ) = (g²/Ω²) sin²(Ω t)` with `Ω = √(g² + (δ/2)²)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default coupling: full transfer after 37 ns.
pub const DEFAULT_COUPLING: f64 = PI / 74.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChevronModel {
    /// Coupling `g` in rad/ns.
    pub coupling: f64,
    /// Interaction times in ns.
    pub times: Vec<f64>,
    /// Detunings `δ` in rad/ns.
    pub detunings: Vec<f64>,
}

impl Default for ChevronModel {
    /// 0–70 ns in 1 ns steps, δ over ±0.2 rad/ns in 81 points.
    fn default() -> Self {
        Self { coupling: DEFAULT_COUPLING, times: uniform_grid(0.0, 1.0, 71), detunings: symmetric_grid(0.2, 40) }
    }
}

/// `start + k·step` for `k < count`.
pub fn uniform_grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + k as f64 * step).collect()
}

/// `2·half_points + 1` values over `[-extent, extent]`, built as
/// `(k − half_points)·step` so the centre is exactly zero and `±δ` pairs are
/// exact negatives.
pub fn symmetric_grid(extent: f64, half_points: usize) -> Vec<f64> {
    let step = if half_points == 0 { 0.0 } else { extent / half_points as f64 };
    (0..=2 * half_points).map(|k| (k as f64 - half_points as f64) * step).collect()
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("chevron grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

impl ChevronModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return Err(Error::InvalidConfig(format!("coupling must be positive, got {}", self.coupling)));
        }
        check_grid("time", &self.times)?;
        check_grid("detuning", &self.detunings)
    }
}

pub fn transfer_probability(coupling: f64, t: f64, delta: f64) -> f64 {
    let g2 = coupling * coupling;
    let omega2 = g2 + (delta / 2.0).powi(2);
    let s = (omega2.sqrt() * t).sin();
    g2 / omega2 * s * s
}

/// Transfer probabilities on a time × detuning grid, `values[i][j]` at
/// `(times[i], detunings[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronMap {
    pub times: Vec<f64>,
    pub detunings: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ChevronMap {
    pub fn new(times: Vec<f64>, detunings: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || detunings.is_empty() {
            return Err(Error::InvalidConfig("chevron map needs nonempty grids".into()));
        }
        if values.len() != times.len() || values.iter().any(|row| row.len() != detunings.len()) {
            return Err(Error::DimensionMismatch { expected: times.len() * detunings.len(), found: values.iter().map(Vec::len).sum() });
        }
        if values.iter().flatten().chain(&times).chain(&detunings).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chevron map"));
        }
        Ok(Self { times, detunings, values })
    }
}

pub fn chevron_map(m: &ChevronModel) -> Result<ChevronMap> {
    m.validate()?;
    let values = m
        .times
        .par_iter()
        .map(|&t| m.detunings.iter().map(|&d| transfer_probability(m.coupling, t, d)).collect())
        .collect();
    Ok(ChevronMap { times: m.times.clone(), detunings: m.detunings.clone(), values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxTransfer {
    pub time: f64,
    pub detuning: f64,
    pub probability: f64,
    pub time_index: usize,
    pub detuning_index: usize,
}

/// Grid argmax; ties go to the smallest time, then the smallest `|δ|`, then
/// the earlier grid entry.
pub fn find_max_transfer(map: &ChevronMap) -> MaxTransfer {
    let mut best = (0, 0);
    for (i, row) in map.values.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let current = map.values[best.0][best.1];
            let better = p > current
                || (p == current
                    && map.times[i] == map.times[best.0]
                    && map.detunings[j].abs() < map.detunings[best.1].abs());
            if better {
                best = (i, j);
            }
        }
    }
    MaxTransfer {
        time: map.times[best.0],
        detuning: map.detunings[best.1],
        probability: map.values[best.0][best.1],
        time_index: best.0,
        detuning_index: best.1,
    }
}
