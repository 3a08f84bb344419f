//! Shared fixtures for the benchmarks.

use cojump::{scenario, simulate_week, SampledPath, SamplingGrid};

/// One simulated week of scenario `name` at `per_day` observations per day.
pub fn week(name: &str, per_day: usize, seed: u64) -> SampledPath {
    let sc = scenario(name).expect("known scenario");
    let grid = SamplingGrid::days(5, per_day).expect("valid grid");
    simulate_week(&sc.params, &grid, seed).expect("simulation succeeds").path
}
