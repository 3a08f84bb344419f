//! Week-by-week testing over a sweep of jump-size filters, with aggregate
//! rejection rates and the two-test decision matrix.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cojump::harness::{kde, kde_grid, sig6, write_decisions, write_kde};
use cojump::rng::derive_seed;
use cojump::{analyze, decision_matrix, AnalysisConfig, DecisionMatrix, Method, TestReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::weeks::WeekPath;

/// Levels of the aggregate table.
pub const TABLE_ALPHAS: [f64; 2] = [0.05, 0.10];
/// Level of the decision matrix.
pub const DECISION_ALPHA: f64 = 0.05;

/// All reports for one week at one jump-size filter; one JSON line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    pub week: String,
    pub jump_size_a: f64,
    pub short_week: bool,
    pub filled_bars: usize,
    pub n_jumps: usize,
    pub u_per_jump: Option<f64>,
    pub log_sn: Option<f64>,
    pub reports: Vec<TestReport>,
}

/// One row of the aggregate table: rejection rates over weeks with jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub jump_size_a: f64,
    pub weeks_with_jumps: usize,
    /// Pivotal disjoint-null test at 5% and 10%.
    pub disjoint_reject: [Option<f64>; 2],
    /// Truncated ratio common-null test at 5% and 10%.
    pub common_reject: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOutput {
    pub records: Vec<WeekRecord>,
    pub table: Vec<SweepRow>,
    pub decisions: Option<DecisionMatrix>,
    pub notes: Vec<String>,
}

struct WeekResult {
    record: WeekRecord,
    /// `[pivotal 5%, pivotal 10%, truncated ratio 5%, truncated ratio 10%]`.
    table_reports: [TestReport; 4],
}

fn run_week(config: &RunConfig, idx: usize, week: &WeekPath, a: f64) -> CliResult<WeekResult> {
    let analysis_config = AnalysisConfig {
        tuning: config.tuning.with_jump_size(a),
        assume: config.assume,
        per_day_thresholds: config.per_day_thresholds,
        contrast: config.contrast,
        n_sim: config.n_sim,
        seed: Some(derive_seed(derive_seed(config.seed, idx as u64), a.to_bits())),
    };
    let analysis = analyze(&week.path, &analysis_config)?;
    let mut reports = Vec::with_capacity(config.tests.len() * config.alphas.len());
    for &alpha in &config.alphas {
        reports.extend(analysis.reports(&config.tests, alpha)?);
    }
    let table_reports = [
        analysis.report(Method::PivotalChisq, TABLE_ALPHAS[0])?,
        analysis.report(Method::PivotalChisq, TABLE_ALPHAS[1])?,
        analysis.report(Method::RatioTruncated, TABLE_ALPHAS[0])?,
        analysis.report(Method::RatioTruncated, TABLE_ALPHAS[1])?,
    ];
    Ok(WeekResult {
        record: WeekRecord {
            week: week.label.clone(),
            jump_size_a: a,
            short_week: week.short_week,
            filled_bars: week.filled_bars,
            n_jumps: analysis.n_jumps(),
            u_per_jump: analysis.u_per_jump(),
            log_sn: analysis.log_sn(),
            reports,
        },
        table_reports,
    })
}

fn rate(reports: &[&TestReport]) -> Option<f64> {
    let applicable: Vec<_> = reports.iter().filter(|r| r.applicable).collect();
    (!applicable.is_empty()).then(|| applicable.iter().filter(|r| r.reject).count() as f64 / applicable.len() as f64)
}

/// Tests every week at every jump-size filter of the sweep.
///
/// Weeks run in parallel; the output is ordered by week label, then filter.
pub fn run_pipeline(config: &RunConfig, weeks: &[WeekPath]) -> CliResult<PipelineOutput> {
    config.validate()?;
    let mut order: Vec<usize> = (0..weeks.len()).collect();
    order.sort_by(|&i, &j| weeks[i].label.cmp(&weeks[j].label));

    let results: Vec<Vec<WeekResult>> = order
        .par_iter()
        .map(|&i| {
            config
                .sweep
                .iter()
                .map(|&a| run_week(config, i, &weeks[i], a).map_err(|e| e.context(format!("week {}", weeks[i].label))))
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut out = PipelineOutput::default();
    let mut table = Vec::with_capacity(config.sweep.len());
    for (ai, &a) in config.sweep.iter().enumerate() {
        let cell: Vec<&WeekResult> = results.iter().map(|w| &w[ai]).collect();
        let with_jumps: Vec<&WeekResult> = cell.iter().copied().filter(|w| w.record.n_jumps > 0).collect();
        let col = |k: usize| rate(&with_jumps.iter().map(|w| &w.table_reports[k]).collect::<Vec<_>>());
        table.push(SweepRow {
            jump_size_a: a,
            weeks_with_jumps: with_jumps.len(),
            disjoint_reject: [col(0), col(1)],
            common_reject: [col(2), col(3)],
        });
    }
    if table.iter().all(|r| r.weeks_with_jumps == 0) {
        out.notes.push("no week has a detected jump; aggregate table is empty".into());
    } else {
        out.table = table;
    }

    // decision matrix at the smallest filter
    let common: Vec<TestReport> = results.iter().map(|w| w[0].table_reports[2].clone()).collect();
    let disjoint: Vec<TestReport> = results.iter().map(|w| w[0].table_reports[0].clone()).collect();
    match decision_matrix(&common, &disjoint) {
        Ok(m) => out.decisions = Some(m),
        Err(e) => out.notes.push(format!("decision matrix unavailable: {e}")),
    }
    for note in &out.notes {
        log::warn!("{note}");
    }
    out.records = results.into_iter().flatten().map(|w| w.record).collect();
    Ok(out)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

/// Rounds every float in a JSON tree to 6 significant digits; integers are left alone.
pub fn round_json(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            if let Some(r) = sig6(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn write_reports_jsonl(path: &Path, records: &[WeekRecord]) -> CliResult<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    for r in records {
        let mut v = serde_json::to_value(r).map_err(|e| io_err(path, e))?;
        round_json(&mut v);
        serde_json::to_writer(&mut f, &v).map_err(|e| io_err(path, e))?;
        f.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    f.flush().map_err(|e| io_err(path, e))
}

pub fn read_reports_jsonl(path: &Path) -> CliResult<Vec<WeekRecord>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), sig6)
}

pub fn write_table(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record([
        "jump_size_a",
        "weeks_with_jumps",
        "disjoint_reject_05",
        "disjoint_reject_10",
        "common_reject_05",
        "common_reject_10",
    ])
    .map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            sig6(r.jump_size_a),
            r.weeks_with_jumps.to_string(),
            opt6(r.disjoint_reject[0]),
            opt6(r.disjoint_reject[1]),
            opt6(r.common_reject[0]),
            opt6(r.common_reject[1]),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `reports.jsonl`, `rejections.csv`, `decisions.csv` and, when
/// enough weeks have jumps, densities of `U/N` and `log S_n` at the smallest filter.
pub fn write_pipeline_outputs(dir: &Path, out: &PipelineOutput) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = vec![dir.join("reports.jsonl"), dir.join("rejections.csv")];
    write_reports_jsonl(&files[0], &out.records)?;
    write_table(&files[1], &out.table)?;
    let rows: Vec<(String, DecisionMatrix)> = out.decisions.iter().map(|m| ("weeks".to_owned(), *m)).collect();
    files.push(write_decisions(dir, &rows)?);

    if let Some(a0) = out.records.first().map(|r| r.jump_size_a) {
        let base: Vec<&WeekRecord> = out.records.iter().filter(|r| r.jump_size_a == a0).collect();
        let u: Vec<f64> = base.iter().filter_map(|r| r.u_per_jump).collect();
        let s: Vec<f64> = base.iter().filter_map(|r| r.log_sn).filter(|v| v.is_finite()).collect();
        for (name, values) in [("u_per_jump", u), ("log_sn", s)] {
            if let Ok(grid) = kde_grid(&values, 256) {
                let dens = kde(&values, &grid)?;
                files.push(write_kde(dir, name, &grid, &dens)?);
            }
        }
    }
    Ok(files)
}
