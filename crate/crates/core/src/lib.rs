//! Tests for whether price jumps coincide with volatility jumps, built from
//! discretely sampled log-prices.
//!
//! The usual entry point is [`analyze`], which takes a [`SampledPath`] and an
//! [`AnalysisConfig`] and returns every test statistic for one window. The
//! [`simulator`] and [`harness`] modules produce Monte Carlo size and power
//! curves.

pub mod analysis;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod harness;
pub mod hypothesis;
pub mod quantile;
pub mod rates;
pub mod rng;
pub mod simulator;
pub mod tuning;
pub mod volatility;

pub use analysis::{analyze, AnalysisConfig, RatioParts, WindowAnalysis};
pub use error::{Error, Result};
pub use functionals::{evaluate_u, Contrast, FunctionalValue, JumpFunction, JumpWeight, TestFunction};
pub use grid::{SampledPath, SamplingGrid};
pub use harness::{
    decision_matrix, kde, run_experiment, DecisionMatrix, ExperimentPlan, ExperimentResult, SizePowerCurve,
};
pub use hypothesis::{Diagnostics, Hypothesis, Method, TestReport};
pub use quantile::{chisq_quantile, normal_quantile_two_sided};
pub use rates::{validate_rate_conditions, TestKind, ValidationReport};
pub use simulator::{scenario, scenario_table, simulate_week, GroundTruth, Scenario, ScenarioParams, SimulatedWeek};
pub use tuning::{derive_sequences, window_size, AssumptionIndices, Sequences, TuningParams};
pub use volatility::{bipower_variation, detect_jumps, local_vol, truncation_threshold, JumpSet, LocalVolSeries};
