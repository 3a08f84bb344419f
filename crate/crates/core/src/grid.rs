//! Observation grids and sampled paths.
//!
//! Increments follow the usual convention: increment `i` (1-based, `1..=n_obs`)
//! is `X[i] - X[i-1]`, so `values` has `n_obs + 1` entries.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular observation grid `0, Δ, 2Δ, ..., n_obs·Δ = T` (time in days).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    horizon: f64,
    n_obs: usize,
    mesh: f64,
}

impl SamplingGrid {
    /// Grid over `[0, horizon]` with `n_obs` increments.
    pub fn new(horizon: f64, n_obs: usize) -> Result<Self> {
        if n_obs < 2 {
            return Err(Error::sizing(format!("grid needs at least 2 increments, got {n_obs}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(Self { horizon, n_obs, mesh: horizon / n_obs as f64 })
    }

    /// Grid with a given mesh; the horizon is `mesh * n_obs`.
    pub fn from_mesh(mesh: f64, n_obs: usize) -> Result<Self> {
        if !(mesh.is_finite() && mesh > 0.0) {
            return Err(Error::domain(format!("mesh must be positive and finite, got {mesh}")));
        }
        let mut grid = Self::new(mesh * n_obs as f64, n_obs)?;
        grid.mesh = mesh;
        Ok(grid)
    }

    /// `days` days with `per_day` increments each.
    pub fn days(days: usize, per_day: usize) -> Result<Self> {
        Self::from_mesh(1.0 / per_day as f64, days * per_day)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }
}

/// A regularly sampled scalar path, typically log-prices.
///
/// A path may carry explicit trading sessions. Increments outside every
/// session (overnight returns) are gaps: they never count as jumps and no
/// estimation window may contain them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: SamplingGrid,
    values: Vec<f64>,
    sessions: Option<Vec<RangeInclusive<usize>>>,
    gap: Vec<bool>,
}

impl SampledPath {
    pub fn new(grid: SamplingGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_obs() + 1 {
            return Err(Error::sizing(format!(
                "path has {} values, grid expects {}",
                values.len(),
                grid.n_obs() + 1
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("path value at position {pos} is not finite")));
        }
        let gap = vec![false; grid.n_obs() + 1];
        Ok(Self { grid, values, sessions: None, gap })
    }

    /// Path with explicit sessions, given as inclusive ranges of 1-based
    /// increment indices. Sessions must be ascending and non-overlapping.
    pub fn with_sessions(
        grid: SamplingGrid,
        values: Vec<f64>,
        sessions: Vec<RangeInclusive<usize>>,
    ) -> Result<Self> {
        let mut path = Self::new(grid, values)?;
        if sessions.is_empty() {
            return Err(Error::config("at least one session is required"));
        }
        let n = grid.n_obs();
        let mut next_free = 1;
        for s in &sessions {
            if s.start() < &next_free || s.end() > &n || s.start() > s.end() {
                return Err(Error::config(format!(
                    "session {}..={} is out of order or outside 1..={n}",
                    s.start(),
                    s.end()
                )));
            }
            next_free = s.end() + 1;
        }
        let mut gap = vec![true; n + 1];
        gap[0] = false;
        for s in &sessions {
            for i in s.clone() {
                gap[i] = false;
            }
        }
        path.gap = gap;
        path.sessions = Some(sessions);
        Ok(path)
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_obs(&self) -> usize {
        self.grid.n_obs()
    }

    /// Increment `i` (1-based).
    #[inline]
    pub fn increment(&self, i: usize) -> f64 {
        self.values[i] - self.values[i - 1]
    }

    /// All increments; element `0` is increment 1.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Whether increment `i` (1-based) is an excluded gap.
    #[inline]
    pub fn is_gap(&self, i: usize) -> bool {
        self.gap[i]
    }

    pub fn has_gaps(&self) -> bool {
        self.gap.iter().any(|&g| g)
    }

    pub fn sessions(&self) -> Option<&[RangeInclusive<usize>]> {
        self.sessions.as_deref()
    }

    /// Day segments as inclusive ranges of 1-based increment indices.
    ///
    /// Explicit sessions are returned as-is; otherwise the horizon is cut into
    /// unit-length days of `n_obs / T` increments, which must be a whole number.
    pub fn day_spans(&self) -> Result<Vec<RangeInclusive<usize>>> {
        if let Some(s) = &self.sessions {
            return Ok(s.clone());
        }
        let days = self.grid.horizon();
        let whole_days = days.round();
        if whole_days < 1.0 || (days - whole_days).abs() > 1e-9 * days.max(1.0) {
            return Err(Error::sizing(format!(
                "horizon {days} is not a whole number of days; per-day blocks would be fractional"
            )));
        }
        let n_days = whole_days as usize;
        let n = self.n_obs();
        if n % n_days != 0 {
            return Err(Error::sizing(format!(
                "{n} increments do not split into {n_days} equal days"
            )));
        }
        let per_day = n / n_days;
        Ok((0..n_days).map(|d| d * per_day + 1..=(d + 1) * per_day).collect())
    }

    /// The same path with every value multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * lambda).collect(),
            sessions: self.sessions.clone(),
            gap: self.gap.clone(),
        }
    }
}
