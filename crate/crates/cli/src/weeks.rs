//! Turning a bar series into business-week log-price paths.
//!
//! Each trading day becomes one session of the path. The overnight increment
//! between two days is a gap, so no jump or volatility window uses it. The
//! mesh is one over the usual number of intraday increments per day, so time
//! is measured in trading days.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use cojump::{window_size, SampledPath, SamplingGrid, TuningParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::{Tick, TickSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeekGrouping {
    /// Bar spacing in seconds; inferred from the data (median spacing) when absent.
    pub bar_seconds: Option<f64>,
    /// Longest run of missing bars that is forward-filled; longer holes drop the day.
    pub max_fill: usize,
    /// Allowed relative deviation of a spacing from a whole number of bars.
    pub spacing_tolerance: f64,
}

impl Default for WeekGrouping {
    fn default() -> Self {
        Self { bar_seconds: None, max_fill: 5, spacing_tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeekPath {
    /// ISO week, e.g. `2024-W02`.
    pub label: String,
    pub days: Vec<NaiveDate>,
    pub short_week: bool,
    pub filled_bars: usize,
    pub path: SampledPath,
}

impl WeekPath {
    /// Number of recorded day boundaries (overnight gaps).
    pub fn day_boundaries(&self) -> usize {
        self.days.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeeklyPaths {
    pub weeks: Vec<WeekPath>,
    /// Weeks dropped, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Days dropped, with the reason.
    pub rejected_days: Vec<(NaiveDate, String)>,
}

struct Day {
    date: NaiveDate,
    log_prices: Vec<f64>,
    filled: usize,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn secs(a: &Tick, b: &Tick) -> f64 {
    (b.timestamp - a.timestamp).num_milliseconds() as f64 / 1000.0
}

fn split_days(ticks: &[Tick]) -> Vec<(NaiveDate, &[Tick])> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=ticks.len() {
        if i == ticks.len() || ticks[i].timestamp.date_naive() != ticks[start].timestamp.date_naive() {
            out.push((ticks[start].timestamp.date_naive(), &ticks[start..i]));
            start = i;
        }
    }
    out
}

fn build_day(date: NaiveDate, ticks: &[Tick], bar: f64, g: &WeekGrouping) -> CliResult<Result<Day, String>> {
    if ticks.len() < 2 {
        return Ok(Err("fewer than 2 bars".into()));
    }
    let mut log_prices = vec![ticks[0].price.ln()];
    let mut filled = 0;
    for pair in ticks.windows(2) {
        let steps = secs(&pair[0], &pair[1]) / bar;
        let whole = steps.round();
        if whole < 1.0 || (steps - whole).abs() > g.spacing_tolerance {
            return Err(CliError::data(format!(
                "irregular spacing on {date}: {} s between {} and {} is not a multiple of the {bar} s bar; \
                 resample to a regular grid first",
                secs(&pair[0], &pair[1]),
                pair[0].timestamp,
                pair[1].timestamp
            )));
        }
        let missing = whole as usize - 1;
        if missing > g.max_fill {
            return Ok(Err(format!("{missing} consecutive missing bars after {}", pair[0].timestamp)));
        }
        let prev = *log_prices.last().expect("nonempty");
        log_prices.extend(std::iter::repeat_n(prev, missing));
        filled += missing;
        log_prices.push(pair[1].price.ln());
    }
    Ok(Ok(Day { date, log_prices, filled }))
}

/// Groups bars into Monday-to-Friday weeks of log-prices.
///
/// Weeks with fewer than `2 w k_n + 2` intraday increments are skipped with a
/// warning; weeks with fewer than five trading days are kept and flagged.
pub fn to_weekly_paths(ticks: &TickSeries, grouping: &WeekGrouping, tuning: &TuningParams) -> CliResult<WeeklyPaths> {
    if ticks.is_empty() {
        return Err(CliError::data(format!("{}: no observations", ticks.source)));
    }
    if !(grouping.spacing_tolerance >= 0.0 && grouping.spacing_tolerance < 0.5) {
        return Err(CliError::config("spacing_tolerance must lie in [0, 0.5)"));
    }
    let mut out = WeeklyPaths::default();
    let mut raw_days = split_days(&ticks.ticks);
    raw_days.retain(|(date, _)| {
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        if weekend {
            log::warn!("dropping weekend bars on {date}");
            out.rejected_days.push((*date, "weekend".into()));
        }
        !weekend
    });

    let bar = match grouping.bar_seconds {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => return Err(CliError::config(format!("bar_seconds must be positive, got {b}"))),
        None => median(
            raw_days.iter().flat_map(|(_, t)| t.windows(2).map(|p| secs(&p[0], &p[1]))).collect(),
        )
        .filter(|b| *b > 0.0)
        .ok_or_else(|| CliError::data("cannot infer the bar spacing: no day has two bars"))?,
    };

    let mut days = Vec::new();
    for (date, t) in raw_days {
        match build_day(date, t, bar, grouping)? {
            Ok(day) => days.push(day),
            Err(reason) => {
                log::warn!("dropping {date}: {reason}");
                out.rejected_days.push((date, reason));
            }
        }
    }
    if days.is_empty() {
        return Err(CliError::data("no usable trading day"));
    }

    // The most common day length defines the mesh.
    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    for d in &days {
        *lengths.entry(d.log_prices.len() - 1).or_default() += 1;
    }
    let per_day = lengths.iter().max_by_key(|(len, count)| (**count, **len)).map(|(len, _)| *len).expect("nonempty");

    let mut weeks: BTreeMap<(i32, u32), Vec<Day>> = BTreeMap::new();
    for d in days {
        let iso = d.date.iso_week();
        weeks.entry((iso.year(), iso.week())).or_default().push(d);
    }

    for ((year, week), days) in weeks {
        let label = format!("{year}-W{week:02}");
        let mut values = Vec::new();
        let mut sessions = Vec::new();
        for d in &days {
            let first = values.len();
            values.extend_from_slice(&d.log_prices);
            // increments first+1 ..= last index of this day
            sessions.push(first + 1..=values.len() - 1);
        }
        let intraday: usize = days.iter().map(|d| d.log_prices.len() - 1).sum();
        let grid = match SamplingGrid::from_mesh(1.0 / per_day as f64, values.len() - 1) {
            Ok(g) => g,
            Err(e) => {
                out.skipped.push((label, e.to_string()));
                continue;
            }
        };
        let needed = window_size(&grid, tuning).map(|k| 2 * tuning.w * k + 2);
        match needed {
            Ok(n) if intraday >= n => {}
            Ok(n) => {
                let reason = format!("{intraday} intraday increments, need {n}");
                log::warn!("skipping week {label}: {reason}");
                out.skipped.push((label, reason));
                continue;
            }
            Err(e) => {
                log::warn!("skipping week {label}: {e}");
                out.skipped.push((label, e.to_string()));
                continue;
            }
        }
        let path = SampledPath::with_sessions(grid, values, sessions).map_err(|e| CliError::data(format!("week {label}: {e}")))?;
        out.weeks.push(WeekPath {
            label,
            short_week: days.len() < 5,
            filled_bars: days.iter().map(|d| d.filled).sum(),
            days: days.iter().map(|d| d.date).collect(),
            path,
        });
    }
    if out.weeks.is_empty() && !out.skipped.is_empty() {
        log::warn!("every week was skipped");
    }
    Ok(out)
}
