//! Monte Carlo experiments: size and power curves over the scenario table,
//! density estimates of the statistics, and the two-test decision matrix.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisConfig};
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::hypothesis::{Hypothesis, Method, TestReport};
use crate::rng::derive_seed;
use crate::simulator::{scenario, simulate_week, GroundTruth, Scenario};

const MAX_REDRAWS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub scenarios: Vec<String>,
    pub n_per_day: Vec<usize>,
    pub n_reps: usize,
    pub alphas: Vec<f64>,
    pub tests: Vec<Method>,
    pub master_seed: u64,
    /// Days per replication.
    pub days: usize,
    pub analysis: AnalysisConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenarios: vec!["I-c".into(), "I-d".into(), "I-j".into(), "I-m".into()],
            n_per_day: vec![1000, 5000],
            n_reps: 500,
            alphas: (1..=20).map(|i| i as f64 * 0.01).collect(),
            tests: Method::ALL.to_vec(),
            master_seed: 20_100_101,
            days: 5,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl ExperimentPlan {
    /// The full-scale design: 1000 replications at 1000, 5000 and 24000 observations per day.
    pub fn full_scale() -> Self {
        Self {
            scenarios: crate::simulator::scenario_table().iter().map(|s| s.name.to_owned()).collect(),
            n_per_day: vec![1000, 5000, 24_000],
            n_reps: 1000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<Vec<Scenario>> {
        if self.n_reps == 0 {
            return Err(Error::config("n_reps must be at least 1"));
        }
        if self.days == 0 {
            return Err(Error::config("days must be at least 1"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::config(format!("alpha {a} outside (0, 1)")));
        }
        if self.n_per_day.iter().any(|&n| n < 2) {
            return Err(Error::config("n_per_day entries must be at least 2"));
        }
        self.analysis.tuning.validate()?;
        self.scenarios.iter().map(|s| scenario(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    NullTrue,
    AltTrue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    /// Rejection rate among applicable replications; `None` when none applied.
    pub reject_rate: Option<f64>,
    pub stderr: Option<f64>,
    pub n_applicable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerCurve {
    pub scenario: String,
    pub method: Method,
    pub n_per_day: usize,
    pub truth: Truth,
    pub points: Vec<CurvePoint>,
}

impl SizePowerCurve {
    pub fn rate_at(&self, alpha: f64) -> Option<f64> {
        self.points.iter().find(|p| (p.alpha - alpha).abs() < 1e-12).and_then(|p| p.reject_rate)
    }
}

/// Statistics gathered for density plots in one experiment cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatisticSamples {
    pub scenario: String,
    pub n_per_day: usize,
    /// `U(F,k_n)_T / N^n_T` per week with jumps.
    pub u_per_jump: Vec<f64>,
    /// `log S_n` per week where it is defined.
    pub log_sn: Vec<f64>,
    /// Weeks with no detected jump.
    pub not_applicable: usize,
    /// Redraws of family-m weeks lacking a common jump.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub curves: Vec<SizePowerCurve>,
    pub samples: Vec<StatisticSamples>,
    /// Per cell, decision matrix of the pivotal and truncated ratio tests at
    /// the first listed alpha (when both tests ran and some week had jumps).
    pub decisions: Vec<(String, usize, Option<DecisionMatrix>)>,
}

struct Replication {
    /// `decisions[m][a]`: `None` when not applicable.
    decisions: Vec<Vec<Option<bool>>>,
    u_per_jump: Option<f64>,
    log_sn: Option<f64>,
    discarded: usize,
    paired: Option<(TestReport, TestReport)>,
}

fn cell_seed(master: u64, scenario_idx: usize, n_per_day: usize) -> u64 {
    derive_seed(derive_seed(master, scenario_idx as u64), n_per_day as u64)
}

fn run_replication(plan: &ExperimentPlan, sc: &Scenario, grid: &SamplingGrid, seed: u64) -> Result<Replication> {
    let mut discarded = 0;
    let mut attempt = 0;
    let week = loop {
        let week = simulate_week(&sc.params, grid, derive_seed(seed, attempt))?;
        if !sc.requires_common_jump() || week.ground_truth == GroundTruth::Common {
            break week;
        }
        discarded += 1;
        attempt += 1;
        if attempt >= MAX_REDRAWS {
            return Err(Error::config(format!("scenario {} produced no common jump in {MAX_REDRAWS} draws", sc.name)));
        }
    };
    let config = AnalysisConfig { seed: Some(derive_seed(seed, u64::MAX)), ..plan.analysis };
    let analysis = analyze(&week.path, &config)?;
    let mut decisions = Vec::with_capacity(plan.tests.len());
    for &m in &plan.tests {
        let row = plan
            .alphas
            .iter()
            .map(|&a| analysis.report(m, a).map(|r| r.applicable.then_some(r.reject)))
            .collect::<Result<Vec<_>>>()?;
        decisions.push(row);
    }
    let paired = match (plan.alphas.first(), plan.tests.contains(&Method::PivotalChisq), plan.tests.contains(&Method::RatioTruncated)) {
        (Some(&a), true, true) => Some((analysis.report(Method::RatioTruncated, a)?, analysis.report(Method::PivotalChisq, a)?)),
        _ => None,
    };
    Ok(Replication { decisions, u_per_jump: analysis.u_per_jump(), log_sn: analysis.log_sn(), discarded, paired })
}

/// Runs every (scenario, sampling frequency) cell of the plan.
///
/// Replications run in parallel with per-replication seeds; results do not
/// depend on scheduling. Weeks with no detected jump are excluded from the
/// rejection-rate denominators.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let scenarios = plan.validate()?;
    let mut result = ExperimentResult::default();
    for (si, sc) in scenarios.iter().enumerate() {
        for &n in &plan.n_per_day {
            let grid = SamplingGrid::days(plan.days, n)?;
            let seed = cell_seed(plan.master_seed, si, n);
            let reps = (0..plan.n_reps as u64)
                .into_par_iter()
                .map(|r| run_replication(plan, sc, &grid, derive_seed(seed, r)))
                .collect::<Result<Vec<_>>>()?;

            for (mi, &method) in plan.tests.iter().enumerate() {
                let points = plan
                    .alphas
                    .iter()
                    .enumerate()
                    .map(|(ai, &alpha)| {
                        let applicable: Vec<bool> = reps.iter().filter_map(|r| r.decisions[mi][ai]).collect();
                        let n_app = applicable.len();
                        let rate = (n_app > 0).then(|| applicable.iter().filter(|&&b| b).count() as f64 / n_app as f64);
                        CurvePoint {
                            alpha,
                            reject_rate: rate,
                            stderr: rate.map(|p| (p * (1.0 - p) / n_app as f64).sqrt()),
                            n_applicable: n_app,
                        }
                    })
                    .collect();
                let null_true = match method.hypothesis() {
                    Hypothesis::NullDisjoint => sc.disjoint_by_construction(),
                    Hypothesis::NullCommon => !sc.disjoint_by_construction(),
                };
                result.curves.push(SizePowerCurve {
                    scenario: sc.name.to_owned(),
                    method,
                    n_per_day: n,
                    truth: if null_true { Truth::NullTrue } else { Truth::AltTrue },
                    points,
                });
            }

            result.samples.push(StatisticSamples {
                scenario: sc.name.to_owned(),
                n_per_day: n,
                u_per_jump: reps.iter().filter_map(|r| r.u_per_jump).collect(),
                log_sn: reps.iter().filter_map(|r| r.log_sn).filter(|v| v.is_finite()).collect(),
                not_applicable: reps.iter().filter(|r| r.u_per_jump.is_none()).count(),
                discarded: reps.iter().map(|r| r.discarded).sum(),
            });

            let pairs: Vec<_> = reps.iter().filter_map(|r| r.paired.clone()).collect();
            let matrix = if pairs.is_empty() {
                None
            } else {
                let (common, disjoint): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                decision_matrix(&common, &disjoint).ok()
            };
            result.decisions.push((sc.name.to_owned(), n, matrix));
        }
    }
    Ok(result)
}

/// Silverman's rule `1.06 s m^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::sizing("density estimate needs at least 2 samples"));
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
    if var.is_nan() || var <= 0.0 || var.is_infinite() {
        return Err(Error::domain("density estimate needs samples with nonzero finite variance"));
    }
    Ok(1.06 * var.sqrt() * (m as f64).powf(-0.2))
}

/// Gaussian kernel density estimate at each point of `eval_grid`.
pub fn kde(samples: &[f64], eval_grid: &[f64]) -> Result<Vec<f64>> {
    let bw = silverman_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    Ok(eval_grid
        .par_iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / bw;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Evenly spaced grid covering the samples plus four bandwidths on each side.
pub fn kde_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    let bw = silverman_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bw;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bw;
    let points = points.max(2);
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

/// Percentages of weeks (with jumps) in each accept/reject cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    pub accept_disjoint_accept_common: f64,
    pub accept_disjoint_reject_common: f64,
    pub reject_disjoint_accept_common: f64,
    pub reject_disjoint_reject_common: f64,
    pub n_weeks: usize,
}

impl DecisionMatrix {
    pub fn total(&self) -> f64 {
        self.accept_disjoint_accept_common
            + self.accept_disjoint_reject_common
            + self.reject_disjoint_accept_common
            + self.reject_disjoint_reject_common
    }
}

/// Cross-tabulates paired common-null and disjoint-null decisions.
pub fn decision_matrix(reports_common: &[TestReport], reports_disjoint: &[TestReport]) -> Result<DecisionMatrix> {
    if reports_common.is_empty() {
        return Err(Error::sizing("decision matrix needs at least one week"));
    }
    if reports_common.len() != reports_disjoint.len() {
        return Err(Error::config(format!(
            "{} common-null reports paired with {} disjoint-null reports",
            reports_common.len(),
            reports_disjoint.len()
        )));
    }
    let mut counts = [0usize; 4];
    for (c, d) in reports_common.iter().zip(reports_disjoint) {
        if c.hypothesis != Hypothesis::NullCommon || d.hypothesis != Hypothesis::NullDisjoint {
            return Err(Error::config("decision matrix pairs must be (common-null, disjoint-null) reports"));
        }
        if !(c.applicable && d.applicable) {
            continue;
        }
        counts[usize::from(d.reject) * 2 + usize::from(c.reject)] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::undefined("no weeks with jumps"));
    }
    let pct = |k: usize| 100.0 * counts[k] as f64 / n as f64;
    Ok(DecisionMatrix {
        accept_disjoint_accept_common: pct(0),
        accept_disjoint_reject_common: pct(1),
        reject_disjoint_accept_common: pct(2),
        reject_disjoint_reject_common: pct(3),
        n_weeks: n,
    })
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), sig6)
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::config(format!("writing CSV: {e}"))
}

/// Writes `curves_<scenario>_<n>.csv`, one file per cell.
pub fn write_curves(dir: &Path, curves: &[SizePowerCurve]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(csv_error)?;
    let mut cells: Vec<(String, usize)> = curves.iter().map(|c| (c.scenario.clone(), c.n_per_day)).collect();
    cells.dedup();
    let mut written = Vec::new();
    for (scenario, n) in cells {
        let file = dir.join(format!("curves_{scenario}_{n}.csv"));
        let mut w = csv::Writer::from_path(&file).map_err(csv_error)?;
        w.write_record(["method", "alpha", "reject_rate", "stderr", "n_applicable"]).map_err(csv_error)?;
        for c in curves.iter().filter(|c| c.scenario == scenario && c.n_per_day == n) {
            for p in &c.points {
                w.write_record([
                    c.method.name().to_owned(),
                    sig6(p.alpha),
                    opt6(p.reject_rate),
                    opt6(p.stderr),
                    p.n_applicable.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(csv_error)?;
        written.push(file);
    }
    Ok(written)
}

/// Writes `kde_<name>.csv` with columns `x, density`.
pub fn write_kde(dir: &Path, name: &str, grid: &[f64], density: &[f64]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(csv_error)?;
    let file = dir.join(format!("kde_{name}.csv"));
    let mut w = csv::Writer::from_path(&file).map_err(csv_error)?;
    w.write_record(["x", "density"]).map_err(csv_error)?;
    for (x, d) in grid.iter().zip(density) {
        w.write_record([sig6(*x), sig6(*d)]).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)?;
    Ok(file)
}

/// Writes labelled 2×2 decision matrices to `decisions.csv`.
pub fn write_decisions(dir: &Path, rows: &[(String, DecisionMatrix)]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(csv_error)?;
    let file = dir.join("decisions.csv");
    let mut w = csv::Writer::from_path(&file).map_err(csv_error)?;
    w.write_record(["label", "disjoint_null", "accept_common_null", "reject_common_null", "n_weeks"])
        .map_err(csv_error)?;
    for (label, m) in rows {
        w.write_record([
            label.clone(),
            "accept".into(),
            sig6(m.accept_disjoint_accept_common),
            sig6(m.accept_disjoint_reject_common),
            m.n_weeks.to_string(),
        ])
        .map_err(csv_error)?;
        w.write_record([
            label.clone(),
            "reject".into(),
            sig6(m.reject_disjoint_accept_common),
            sig6(m.reject_disjoint_reject_common),
            m.n_weeks.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)?;
    Ok(file)
}

/// Writes curves, densities of `U/N` and `log S_n`, and decision matrices.
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    let mut files = write_curves(dir, &result.curves)?;
    for s in &result.samples {
        for (stat, values) in [("u_per_jump", &s.u_per_jump), ("log_sn", &s.log_sn)] {
            if let Ok(grid) = kde_grid(values, 256) {
                let dens = kde(values, &grid)?;
                files.push(write_kde(dir, &format!("{stat}_{}_{}", s.scenario, s.n_per_day), &grid, &dens)?);
            }
        }
    }
    let rows: Vec<(String, DecisionMatrix)> = result
        .decisions
        .iter()
        .filter_map(|(s, n, m)| m.map(|m| (format!("{s}_{n}"), m)))
        .collect();
    files.push(write_decisions(dir, &rows)?);
    Ok(files)
}
