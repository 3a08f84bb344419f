//! Tuning constants, declared model assumptions and the derived truncation
//! level `u_n` and window size `k_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SamplingGrid;

/// Declared jump-activity index `r` and volatility-smoothness index `v`.
///
/// These cannot be estimated from the data; they only drive the rate-condition
/// checks in [`crate::rates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionIndices {
    r: f64,
    v: f64,
}

impl AssumptionIndices {
    pub fn new(r: f64, v: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&r) {
            return Err(Error::domain(format!("jump activity index r must lie in [0, 2), got {r}")));
        }
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::domain(format!("volatility smoothness v must lie in (0, 1], got {v}")));
        }
        Ok(Self { r, v })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

impl Default for AssumptionIndices {
    /// Finite-activity jumps and an Itô semimartingale volatility.
    fn default() -> Self {
        Self { r: 0.0, v: 0.5 }
    }
}

/// Truncation and window tuning.
///
/// `u_n = trunc_const_a · scale · Δ^varpi` and `k_n = floor(window_const · Δ^-rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningParams {
    pub varpi: f64,
    pub rho: f64,
    pub trunc_const_a: f64,
    pub window_const: f64,
    pub w: usize,
    /// Jump-size cutoff `a`: only increments with `|ΔX| > a` are tested.
    pub jump_size_a: f64,
}

impl Default for TuningParams {
    fn default() -> Self {
        Self {
            varpi: 0.49,
            rho: 0.49,
            trunc_const_a: 5.0,
            window_const: 5.0,
            w: 2,
            jump_size_a: 0.0,
        }
    }
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.varpi > 0.0 && self.varpi < 0.5) {
            return Err(Error::config(format!("varpi must lie in (0, 1/2), got {}", self.varpi)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.w < 2 {
            return Err(Error::config(format!("window multiplier w must be >= 2, got {}", self.w)));
        }
        if !(self.jump_size_a >= 0.0 && self.jump_size_a.is_finite()) {
            return Err(Error::config(format!("jump size cutoff must be >= 0, got {}", self.jump_size_a)));
        }
        if !(self.trunc_const_a > 0.0 && self.trunc_const_a.is_finite()) {
            return Err(Error::config("truncation constant must be positive"));
        }
        if !(self.window_const > 0.0 && self.window_const.is_finite()) {
            return Err(Error::config("window constant must be positive"));
        }
        Ok(())
    }

    /// Same tuning with a different jump-size cutoff.
    pub fn with_jump_size(mut self, a: f64) -> Self {
        self.jump_size_a = a;
        self
    }
}

/// Truncation level and window size for one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sequences {
    pub u_n: f64,
    pub k_n: usize,
}

/// Derives `(u_n, k_n)`.
///
/// Without `path_scale` the truncation constant is used as is. With a scale
/// (a volatility, typically `sqrt(BV)`), `u_n = a · scale · Δ^varpi`.
pub fn derive_sequences(
    grid: &SamplingGrid,
    tuning: &TuningParams,
    path_scale: Option<f64>,
) -> Result<Sequences> {
    tuning.validate()?;
    let k_n = window_size(grid, tuning)?;
    let scale = match path_scale {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => return Err(Error::domain(format!("path scale must be positive, got {s}"))),
        None => 1.0,
    };
    let u_n = tuning.trunc_const_a * scale * grid.mesh().powf(tuning.varpi);
    Ok(Sequences { u_n, k_n })
}

/// `k_n = floor(window_const · Δ^-rho)`, clamped below at 1.
pub fn window_size(grid: &SamplingGrid, tuning: &TuningParams) -> Result<usize> {
    let raw = (tuning.window_const * grid.mesh().powf(-tuning.rho)).floor();
    let k_n = if raw < 1.0 {
        log::warn!("window size {raw} below 1, clamped to 1");
        1
    } else {
        raw as usize
    };
    if 2 * tuning.w * k_n + 1 > grid.n_obs() {
        return Err(Error::sizing(format!(
            "window 2*w*k_n+1 = {} exceeds the {} available increments",
            2 * tuning.w * k_n + 1,
            grid.n_obs()
        )));
    }
    Ok(k_n)
}
