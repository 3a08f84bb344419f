//! Two-factor stochastic volatility model with price and volatility jumps.
//!
//! ```text
//! dX  = sqrt(V1 + V2) dW + α0 ∫ x μ(dt,dx,dy)
//! dV1 = κ1 (θ - V1) dt + σ sqrt(V1) dW'
//! dV2 = -κ2 V2 dt + α1 ∫ y μ(dt,dx,dy) + α2 ∫ y μ'(dt,dy)
//! ```
//!
//! `μ` and `μ'` are independent Poisson measures with intensity `λ`; price
//! marks `x` are uniform on `[-h,-l] ∪ [l,h]` and volatility marks `y` are
//! uniform on `[d,u]`. Time is measured in days.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SampledPath, SamplingGrid};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub kappa1: f64,
    pub theta: f64,
    pub sigma: f64,
    pub kappa2: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Jump intensity per day, shared by both Poisson measures.
    pub lambda: f64,
    pub l: f64,
    pub h: f64,
    pub d: Option<f64>,
    pub u: Option<f64>,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("sigma", self.sigma),
            ("theta", self.theta),
            ("lambda", self.lambda),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0 < self.l && self.l < self.h) {
            return Err(Error::config(format!("price jump bounds need 0 < l < h, got l={} h={}", self.l, self.h)));
        }
        if self.vol_jumps_active() {
            match self.vol_marks() {
                Some((d, u)) if 0.0 < d && d < u => {}
                _ => return Err(Error::config("volatility jumps need marks 0 < d < u")),
            }
        }
        Ok(())
    }

    pub fn vol_jumps_active(&self) -> bool {
        self.lambda > 0.0 && (self.alpha1 != 0.0 || self.alpha2 != 0.0)
    }

    pub fn vol_marks(&self) -> Option<(f64, f64)> {
        self.d.zip(self.u)
    }

    fn mean_mark(&self) -> f64 {
        self.vol_marks().map_or(0.0, |(d, u)| 0.5 * (d + u))
    }

    /// Stationary means: `V1 = θ`, `V2 = (α1 + α2) λ E[y] / κ2`.
    pub fn stationary_initial(&self) -> (f64, f64) {
        let v2 = if self.vol_jumps_active() && self.kappa2 > 0.0 {
            (self.alpha1 + self.alpha2) * self.lambda * self.mean_mark() / self.kappa2
        } else {
            0.0
        };
        (self.theta, v2)
    }
}

/// A named row of the scenario table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub params: ScenarioParams,
}

impl Scenario {
    /// Scenario family letter: `c`, `d`, `j` or `m`.
    pub fn family(&self) -> char {
        self.name.chars().last().unwrap_or('?')
    }

    /// Families `c` and `d` have no common jumps.
    pub fn disjoint_by_construction(&self) -> bool {
        matches!(self.family(), 'c' | 'd')
    }

    /// Family `m` weeks only count when they contain a common jump.
    pub fn requires_common_jump(&self) -> bool {
        self.family() == 'm'
    }
}

#[allow(clippy::too_many_arguments)]
const fn row(
    kappa1: f64,
    theta: f64,
    sigma: f64,
    alpha1: f64,
    alpha2: f64,
    lambda: f64,
    h: f64,
    marks: Option<(f64, f64)>,
) -> ScenarioParams {
    let (d, u) = match marks {
        Some((d, u)) => (Some(d), Some(u)),
        None => (None, None),
    };
    ScenarioParams { kappa1, theta, sigma, kappa2: 0.5, alpha0: 1.0, alpha1, alpha2, lambda, l: 0.1, h, d, u }
}

const SCENARIOS: [Scenario; 12] = [
    Scenario { name: "I-c", params: row(0.02, 0.4, 0.04, 0.0, 0.0, 0.5, 1.0420, None) },
    Scenario { name: "II-c", params: row(0.02, 0.4, 0.04, 0.0, 0.0, 1.0, 0.7197, None) },
    Scenario { name: "III-c", params: row(0.02, 0.4, 0.04, 0.0, 0.0, 4.0, 0.3275, None) },
    Scenario { name: "I-d", params: row(0.02, 0.4, 0.04, 0.0, 1.0, 0.5, 1.0420, Some((0.04, 0.76))) },
    Scenario { name: "II-d", params: row(0.02, 0.4, 0.04, 0.0, 1.0, 1.0, 0.7197, Some((0.04, 0.36))) },
    Scenario { name: "III-d", params: row(0.02, 0.4, 0.04, 0.0, 1.0, 4.0, 0.3275, Some((0.04, 0.06))) },
    Scenario { name: "I-j", params: row(0.02, 0.4, 0.04, 1.0, 0.0, 0.5, 1.0420, Some((0.04, 0.76))) },
    Scenario { name: "II-j", params: row(0.02, 0.4, 0.04, 1.0, 0.0, 1.0, 0.7197, Some((0.04, 0.36))) },
    Scenario { name: "III-j", params: row(0.02, 0.4, 0.04, 1.0, 0.0, 4.0, 0.3275, Some((0.04, 0.06))) },
    Scenario { name: "I-m", params: row(0.0, 0.0, 0.0, 1.0, 1.0, 0.5, 1.0420, Some((0.04, 0.76))) },
    Scenario { name: "II-m", params: row(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.7197, Some((0.04, 0.36))) },
    Scenario { name: "III-m", params: row(0.0, 0.0, 0.0, 1.0, 1.0, 4.0, 0.3275, Some((0.04, 0.06))) },
];

/// The twelve Monte Carlo scenarios, `I-c` through `III-m`.
pub fn scenario_table() -> &'static [Scenario] {
    &SCENARIOS
}

pub fn scenario(name: &str) -> Result<Scenario> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .copied()
        .ok_or_else(|| Error::config(format!("unknown scenario '{name}'")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Common,
    Disjoint,
    NoJumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedJump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedWeek {
    pub path: SampledPath,
    pub true_price_jumps: Vec<TimedJump>,
    pub true_vol_jumps: Vec<TimedJump>,
    pub ground_truth: GroundTruth,
    /// `V1 + V2` at every grid time, when requested.
    pub spot_variance: Option<Vec<f64>>,
    /// `∫ (V1 + V2) dt` over the horizon (Riemann sum on the simulation steps).
    pub integrated_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    /// Internal steps per observation interval.
    pub refinement: usize,
    pub record_variance: bool,
    /// Initial `(V1, V2)`; stationary means when absent.
    pub initial_variance: Option<(f64, f64)>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { refinement: 1, record_variance: false, initial_variance: None }
    }
}

struct Event {
    time: f64,
    x: f64,
    y: f64,
    price: bool,
}

fn draw_events(
    rng: &mut ChaCha8Rng,
    params: &ScenarioParams,
    horizon: f64,
    price: bool,
) -> Result<Vec<Event>> {
    if params.lambda == 0.0 {
        return Ok(Vec::new());
    }
    let poisson = Poisson::new(params.lambda * horizon).map_err(|e| Error::config(e.to_string()))?;
    let count = poisson.sample(rng) as usize;
    let (d, u) = params.vol_marks().unwrap_or((0.0, 0.0));
    let mut events: Vec<Event> = (0..count)
        .map(|_| {
            let time = rng.random::<f64>() * horizon;
            let magnitude = params.l + (params.h - params.l) * rng.random::<f64>();
            let x = if rng.random::<bool>() { magnitude } else { -magnitude };
            let y = if d < u { d + (u - d) * rng.random::<f64>() } else { 0.0 };
            Event { time, x, y, price }
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(events)
}

pub fn simulate_week(params: &ScenarioParams, grid: &SamplingGrid, seed: u64) -> Result<SimulatedWeek> {
    simulate_with(params, grid, seed, &SimulationOptions::default())
}

/// Simulates on `grid` (refined by `options.refinement`), with full-truncation
/// Euler for `V1`, exact exponential decay for `V2`, and jumps added to the
/// step containing their continuous jump time.
pub fn simulate_with(
    params: &ScenarioParams,
    grid: &SamplingGrid,
    seed: u64,
    options: &SimulationOptions,
) -> Result<SimulatedWeek> {
    params.validate()?;
    if options.refinement == 0 {
        return Err(Error::config("refinement must be at least 1"));
    }
    let horizon = grid.horizon();
    let mut event_rng = stream_rng(seed, 0);
    let mut diffusion_rng = stream_rng(seed, 1);

    let mut events = draw_events(&mut event_rng, params, horizon, true)?;
    if params.alpha2 != 0.0 {
        events.extend(draw_events(&mut event_rng, params, horizon, false)?);
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
    }

    let steps = grid.n_obs() * options.refinement;
    let dt = grid.mesh() / options.refinement as f64;
    let sqrt_dt = dt.sqrt();
    let decay = (-params.kappa2 * dt).exp();
    let (mut v1, mut v2) = options.initial_variance.unwrap_or_else(|| params.stationary_initial());

    let mut values = Vec::with_capacity(grid.n_obs() + 1);
    let mut spot = options.record_variance.then(|| Vec::with_capacity(grid.n_obs() + 1));
    let mut x = 0.0;
    let mut integrated = 0.0;
    let mut price_jumps = Vec::new();
    let mut vol_jumps = Vec::new();
    let mut next_event = 0;
    values.push(x);
    if let Some(s) = spot.as_mut() {
        s.push(v1.max(0.0) + v2);
    }

    for step in 0..steps {
        let t_end = (step + 1) as f64 * dt;
        let v1_pos = v1.max(0.0);
        let var = v1_pos + v2;
        integrated += var * dt;
        let dw: f64 = StandardNormal.sample(&mut diffusion_rng);
        let dw_vol: f64 = StandardNormal.sample(&mut diffusion_rng);
        x += var.sqrt() * sqrt_dt * dw;
        v1 += params.kappa1 * (params.theta - v1_pos) * dt + params.sigma * v1_pos.sqrt() * sqrt_dt * dw_vol;
        v2 *= decay;

        let last_step = step + 1 == steps;
        while next_event < events.len() && (events[next_event].time < t_end || last_step) {
            let ev = &events[next_event];
            let loading = if ev.price { params.alpha1 } else { params.alpha2 };
            if ev.price && params.alpha0 != 0.0 {
                x += params.alpha0 * ev.x;
                price_jumps.push(TimedJump { time: ev.time, size: params.alpha0 * ev.x });
            }
            if loading != 0.0 {
                v2 += loading * ev.y * (-params.kappa2 * (t_end - ev.time)).exp();
                vol_jumps.push(TimedJump { time: ev.time, size: loading * ev.y });
            }
            next_event += 1;
        }

        if (step + 1) % options.refinement == 0 {
            values.push(x);
            if let Some(s) = spot.as_mut() {
                s.push(v1.max(0.0) + v2);
            }
        }
    }

    let common = price_jumps.iter().any(|p| vol_jumps.iter().any(|v| v.time == p.time));
    let ground_truth = if price_jumps.is_empty() {
        GroundTruth::NoJumps
    } else if common {
        GroundTruth::Common
    } else {
        GroundTruth::Disjoint
    };
    Ok(SimulatedWeek {
        path: SampledPath::new(*grid, values)?,
        true_price_jumps: price_jumps,
        true_vol_jumps: vol_jumps,
        ground_truth,
        spot_variance: spot,
        integrated_variance: integrated,
    })
}
