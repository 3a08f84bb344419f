//! Critical regions for the two null hypotheses.
//!
//! *No common jump* (`NullDisjoint`) is rejected for large `U(F, k_n)_T`, with
//! the critical value from Chebyshev's inequality, from simulation of the
//! conditional limit, or from the chi-square law of the log-likelihood-ratio
//! statistic. *Common jumps* (`NullCommon`) is rejected when the ratio
//! `S_n = U(F, w k_n)_T / U(F, k_n)_T` is far from one.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{FunctionalValue, TestFunction};
use crate::quantile::{chisq_quantile, normal_quantile_two_sided};
use crate::rates::ValidationReport;
use crate::rng::stream_rng;
use crate::volatility::JumpSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    NullDisjoint,
    NullCommon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Chebyshev,
    Simulated,
    PivotalChisq,
    RatioPlain,
    RatioTruncated,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Chebyshev,
        Method::Simulated,
        Method::PivotalChisq,
        Method::RatioPlain,
        Method::RatioTruncated,
    ];

    pub fn hypothesis(&self) -> Hypothesis {
        match self {
            Method::Chebyshev | Method::Simulated | Method::PivotalChisq => Hypothesis::NullDisjoint,
            Method::RatioPlain | Method::RatioTruncated => Hypothesis::NullCommon,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Chebyshev => "chebyshev",
            Method::Simulated => "simulated",
            Method::PivotalChisq => "pivotal_chisq",
            Method::RatioPlain => "ratio_plain",
            Method::RatioTruncated => "ratio_truncated",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown test method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Jumps summed in the functional.
    pub contributing_jumps: usize,
    /// Contributing jumps that used a floored variance estimate.
    pub clamped: usize,
    /// Detected jumps left out because a window did not fit.
    pub excluded_edge_jumps: Vec<usize>,
    pub quality_warning: bool,
    /// Variance used in the ratio test (`V_n` or `min(V_n, v_n)`).
    pub variance_used: Option<f64>,
    pub truncation_active: Option<bool>,
    pub validation: Option<ValidationReport>,
    pub notes: Vec<String>,
}

impl Diagnostics {
    fn from_functional(u: &FunctionalValue) -> Self {
        Self {
            contributing_jumps: u.contributing.len(),
            clamped: u.clamped_count(),
            excluded_edge_jumps: u.excluded.clone(),
            quality_warning: u.quality_warning(),
            ..Default::default()
        }
    }
}

/// Outcome of one test on one window of data.
///
/// Disjoint-null methods reject when `statistic > critical_value`; ratio methods
/// report `S_n` as the statistic and reject when `|S_n - 1| > critical_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub hypothesis: Hypothesis,
    pub method: Method,
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// False when no jump was detected: both events require a jump.
    pub applicable: bool,
    pub n_jumps: usize,
    pub diagnostics: Diagnostics,
}

impl TestReport {
    fn not_applicable(method: Method, alpha: f64, diagnostics: Diagnostics) -> Self {
        let mut diagnostics = diagnostics;
        diagnostics.notes.push("no jumps detected; test not applicable".to_owned());
        Self {
            hypothesis: method.hypothesis(),
            method,
            statistic: 0.0,
            critical_value: 0.0,
            alpha,
            reject: false,
            applicable: false,
            n_jumps: 0,
            diagnostics,
        }
    }

    pub fn with_validation(mut self, validation: ValidationReport) -> Self {
        self.diagnostics.validation = Some(validation);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn disjoint_report(
    method: Method,
    u_f: &FunctionalValue,
    critical_value: f64,
    alpha: f64,
    n_jumps: usize,
) -> TestReport {
    TestReport {
        hypothesis: Hypothesis::NullDisjoint,
        method,
        statistic: u_f.value,
        critical_value,
        alpha,
        reject: u_f.value > critical_value,
        applicable: true,
        n_jumps,
        diagnostics: Diagnostics::from_functional(u_f),
    }
}

/// Rejects when `U(F,k_n)_T > U(G,k_n)_T / (α k_n)`; conservative.
///
/// `u_f` and `u_g` must be evaluated over the full detected jump set.
pub fn test_disjoint_chebyshev(u_f: &FunctionalValue, u_g: &FunctionalValue, k_n: usize, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n_jumps = u_f.contributing.len() + u_f.excluded.len();
    if n_jumps == 0 {
        return Ok(TestReport::not_applicable(Method::Chebyshev, alpha, Diagnostics::from_functional(u_f)));
    }
    let critical = u_g.value / (alpha * k_n as f64);
    Ok(disjoint_report(Method::Chebyshev, u_f, critical, alpha, n_jumps))
}

/// Draws from the conditional limit law of `k_n U(F, k_n)_T` under no common jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedNull {
    /// Simulated values, largest first.
    pub draws: Vec<f64>,
    pub seed: u64,
}

impl SimulatedNull {
    /// For every replication `j`, sums over contributing jumps
    /// `ĉ_i² f(ΔX_i) (g''_11 V⁻² + g''_22 V⁺² + 2 g''_12 V⁻V⁺)` evaluated at
    /// `(ĉ_left, ĉ_right)`, with fresh standard normals `V⁻, V⁺`.
    pub fn simulate(u_f: &FunctionalValue, tf: &TestFunction, n_sim: usize, seed: u64) -> Result<Self> {
        if n_sim < 100 {
            return Err(Error::config(format!("need at least 100 simulated draws, got {n_sim}")));
        }
        let weights: Vec<(f64, f64, f64)> = u_f
            .contributing
            .iter()
            .filter_map(|c| {
                let fx = tf.f.eval(c.increment);
                if fx == 0.0 {
                    return None;
                }
                let h = tf.g.hessian(c.c_left, c.c_right);
                let scale = c.c_right * c.c_right * fx;
                Some((scale * h.d11, scale * h.d22, 2.0 * scale * h.d12))
            })
            .collect();
        let mut draws: Vec<f64> = (0..n_sim as u64)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, j);
                weights
                    .iter()
                    .map(|&(w11, w22, w12)| {
                        let minus: f64 = StandardNormal.sample(&mut rng);
                        let plus: f64 = StandardNormal.sample(&mut rng);
                        w11 * minus * minus + w22 * plus * plus + w12 * minus * plus
                    })
                    .sum()
            })
            .collect();
        draws.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { draws, seed })
    }

    /// The `⌈N α⌉`-th largest draw.
    pub fn upper_order_statistic(&self, alpha: f64) -> f64 {
        let rank = (self.draws.len() as f64 * alpha).ceil().max(1.0) as usize;
        self.draws[rank.min(self.draws.len()) - 1]
    }
}

/// Rejects when `k_n U(F,k_n)_T` exceeds the simulated upper `α` order statistic.
pub fn test_disjoint_simulated(
    u_f: &FunctionalValue,
    null: &SimulatedNull,
    k_n: usize,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n_jumps = u_f.contributing.len() + u_f.excluded.len();
    if n_jumps == 0 {
        return Ok(TestReport::not_applicable(Method::Simulated, alpha, Diagnostics::from_functional(u_f)));
    }
    let critical = null.upper_order_statistic(alpha) / k_n as f64;
    Ok(disjoint_report(Method::Simulated, u_f, critical, alpha, n_jumps))
}

/// Rejects when `U(F,k_n)_T > z(α, N^n_T) / k_n`. Valid for `f = 1{|x|>a}`
/// with the log-likelihood-ratio contrast.
pub fn test_disjoint_pivotal(u_f: &FunctionalValue, jumps: &JumpSet, k_n: usize, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n_jumps = jumps.count();
    if n_jumps == 0 {
        return Ok(TestReport::not_applicable(Method::PivotalChisq, alpha, Diagnostics::from_functional(u_f)));
    }
    let critical = chisq_quantile(alpha, n_jumps)? / k_n as f64;
    let mut report = disjoint_report(Method::PivotalChisq, u_f, critical, alpha, n_jumps);
    if report.diagnostics.contributing_jumps < n_jumps {
        report.diagnostics.notes.push(format!(
            "{} of {n_jumps} detected jumps lie outside the estimation band",
            n_jumps - report.diagnostics.contributing_jumps
        ));
    }
    Ok(report)
}

/// `S_n = U(F, w k_n)_T / U(F, k_n)_T`.
pub fn statistic_sn(u_f_k: &FunctionalValue, u_f_wk: &FunctionalValue) -> Result<f64> {
    if u_f_k.value == 0.0 {
        return Err(Error::undefined("no co-jump signal; S_n undefined"));
    }
    Ok(u_f_wk.value / u_f_k.value)
}

/// `V_n = (w-1) U(G,k_n)_T / (w k_n U(F,k_n)_T²)`.
pub fn variance_vn(u_g_k: &FunctionalValue, u_f_k: &FunctionalValue, k_n: usize, w: usize) -> Result<f64> {
    if u_f_k.value == 0.0 {
        return Err(Error::undefined("U(F, k_n) is zero; V_n undefined"));
    }
    let w = w as f64;
    Ok((w - 1.0) * u_g_k.value / (w * k_n as f64 * u_f_k.value * u_f_k.value))
}

/// `v_n = k_n^{-1/8} / z(0.5, N^n_T)`.
pub fn truncation_vn(k_n: usize, n_jumps: usize) -> Result<f64> {
    if n_jumps == 0 {
        return Err(Error::undefined("truncation undefined without jumps"));
    }
    Ok((k_n as f64).powf(-0.125) / chisq_quantile(0.5, n_jumps)?)
}

/// Rejects the common-jump null when `|S_n - 1| > z_α sqrt(V)`, with
/// `V = min(V_n, v_n)` when a truncation level is given.
pub fn test_common(s_n: f64, v_n: f64, alpha: f64, truncation: Option<f64>) -> Result<TestReport> {
    check_alpha(alpha)?;
    if v_n.is_nan() || v_n < 0.0 {
        return Err(Error::domain(format!("V_n must be nonnegative, got {v_n}")));
    }
    let (method, variance, active) = match truncation {
        Some(v) if v < v_n => (Method::RatioTruncated, v, true),
        Some(_) => (Method::RatioTruncated, v_n, false),
        None => (Method::RatioPlain, v_n, false),
    };
    let critical = normal_quantile_two_sided(alpha)? * variance.sqrt();
    Ok(TestReport {
        hypothesis: Hypothesis::NullCommon,
        method,
        statistic: s_n,
        critical_value: critical,
        alpha,
        reject: (s_n - 1.0).abs() > critical,
        applicable: true,
        n_jumps: 0,
        diagnostics: Diagnostics {
            variance_used: Some(variance),
            truncation_active: truncation.map(|_| active),
            ..Default::default()
        },
    })
}

/// Report stating that the ratio test cannot be computed.
pub fn common_not_applicable(method: Method, alpha: f64, reason: &str) -> TestReport {
    let mut r = TestReport::not_applicable(method, alpha, Diagnostics::default());
    r.diagnostics.notes.push(reason.to_owned());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Contribution;

    fn fv(value: f64, jumps: usize) -> FunctionalValue {
        FunctionalValue {
            value,
            contributing: (0..jumps)
                .map(|i| Contribution {
                    index: 100 + i,
                    increment: 1.0,
                    c_left: 1.0,
                    c_right: 1.0,
                    summand: value / jumps as f64,
                    clamped: false,
                })
                .collect(),
            excluded: vec![],
        }
    }

    #[test]
    fn chebyshev_boundary_is_strict() {
        let r = test_disjoint_chebyshev(&fv(0.2, 1), &fv(1.0, 1), 100, 0.05).unwrap();
        assert!((r.critical_value - 0.2).abs() < 1e-15);
        assert!(!r.reject);
        let r = test_disjoint_chebyshev(&fv(0.21, 1), &fv(1.0, 1), 100, 0.05).unwrap();
        assert!(r.reject);
        let r = test_disjoint_chebyshev(&fv(0.0, 1), &fv(1.0, 1), 100, 0.05).unwrap();
        assert!(!r.reject);
        let r = test_disjoint_chebyshev(&fv(0.1, 1), &fv(0.0, 1), 100, 0.05).unwrap();
        assert!(r.reject);
    }

    #[test]
    fn no_jumps_not_applicable() {
        let empty = FunctionalValue::default();
        let r = test_disjoint_chebyshev(&empty, &empty, 10, 0.05).unwrap();
        assert!(!r.applicable && !r.reject);
        let r = test_disjoint_pivotal(&empty, &JumpSet::default(), 10, 0.05).unwrap();
        assert!(!r.applicable && !r.reject);
        assert!(r.diagnostics.notes.iter().any(|n| n.contains("no jumps")));
    }

    #[test]
    fn pivotal_critical_values() {
        let jumps = JumpSet { indices: vec![500], sizes: vec![0.3] };
        let r = test_disjoint_pivotal(&fv(0.0, 1), &jumps, 147, 0.05).unwrap();
        assert!((r.critical_value - 3.841_459 / 147.0).abs() < 1e-8);
        assert!((r.critical_value - 0.026_132).abs() < 1e-6);
        assert!(!r.reject);
        let three = JumpSet { indices: vec![5, 6, 7], sizes: vec![1.0; 3] };
        let a = test_disjoint_pivotal(&fv(0.0, 3), &three, 100, 0.05).unwrap();
        let b = test_disjoint_pivotal(&fv(0.0, 3), &three, 200, 0.05).unwrap();
        assert!((a.critical_value * 100.0 - 7.814_728).abs() < 1e-5);
        assert!((a.critical_value - 2.0 * b.critical_value).abs() < 1e-15);
    }

    #[test]
    fn ratio_statistic() {
        assert_eq!(statistic_sn(&fv(0.3, 1), &fv(0.3, 1)).unwrap(), 1.0);
        assert_eq!(statistic_sn(&fv(0.12, 1), &fv(0.06, 1)).unwrap(), 0.5);
        assert_eq!(statistic_sn(&fv(0.1, 1), &fv(0.2, 1)).unwrap(), 2.0);
        assert!(matches!(statistic_sn(&fv(0.0, 1), &fv(0.2, 1)), Err(Error::Undefined(_))));
    }

    #[test]
    fn ratio_variance() {
        assert_eq!(variance_vn(&fv(0.0, 1), &fv(0.5, 1), 100, 2).unwrap(), 0.0);
        let v = variance_vn(&fv(4.0 / 9.0, 1), &fv(0.117_783, 1), 100, 2).unwrap();
        let expected = 0.5 * (4.0 / 9.0) / (100.0 * 0.117_783f64.powi(2));
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.160_17).abs() < 1e-4);
        let v2 = variance_vn(&fv(4.0 / 9.0, 1), &fv(0.117_783, 1), 200, 2).unwrap();
        assert!((v2 * 2.0 - v).abs() < 1e-15);
        assert!(variance_vn(&fv(1.0, 1), &fv(0.0, 1), 100, 2).is_err());
    }

    #[test]
    fn common_test_decisions() {
        let r = test_common(1.0, 0.3, 0.05, None).unwrap();
        assert!(!r.reject);
        let r = test_common(0.5, 0.01, 0.05, None).unwrap();
        assert!((r.critical_value - 0.195_996_4).abs() < 1e-6);
        assert!(r.reject);
        let plain = test_common(0.7, 0.04, 0.05, None).unwrap();
        let trunc = test_common(0.7, 0.04, 0.05, Some(0.01)).unwrap();
        assert!(trunc.critical_value < plain.critical_value);
        assert!(!plain.reject && trunc.reject);
        assert_eq!(trunc.diagnostics.truncation_active, Some(true));
    }

    #[test]
    fn inactive_truncation_matches_plain() {
        let plain = test_common(0.7, 0.04, 0.05, None).unwrap();
        let trunc = test_common(0.7, 0.04, 0.05, Some(0.5)).unwrap();
        assert_eq!(plain.statistic, trunc.statistic);
        assert_eq!(plain.critical_value, trunc.critical_value);
        assert_eq!(plain.reject, trunc.reject);
        assert_eq!(trunc.diagnostics.truncation_active, Some(false));
    }

    #[test]
    fn truncation_level() {
        let v = truncation_vn(147, 2).unwrap();
        let expected = 147f64.powf(-0.125) / (2.0 * 2f64.ln());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.386_6).abs() < 1e-3);
        assert!(truncation_vn(300, 2).unwrap() < v);
        assert!(truncation_vn(147, 3).unwrap() < v);
        assert!(truncation_vn(147, 0).is_err());
    }

    #[test]
    fn simulated_null_single_balanced_jump_is_chisq1() {
        let tf = TestFunction::llr_indicator(0.0);
        let c = 0.37;
        let u = FunctionalValue {
            value: 0.0,
            contributing: vec![Contribution {
                index: 10,
                increment: 1.0,
                c_left: c,
                c_right: c,
                summand: 0.0,
                clamped: false,
            }],
            excluded: vec![],
        };
        let null = SimulatedNull::simulate(&u, &tf, 100_000, 42).unwrap();
        let q95 = null.upper_order_statistic(0.05);
        assert!((q95 / 3.841_459 - 1.0).abs() < 0.1, "{q95}");
        let again = SimulatedNull::simulate(&u, &tf, 100_000, 42).unwrap();
        assert_eq!(null, again);
        let r = test_disjoint_simulated(&u, &null, 100, 0.05).unwrap();
        assert!(!r.reject);
    }

    #[test]
    fn simulated_null_requires_enough_draws() {
        let tf = TestFunction::llr_indicator(0.0);
        assert!(SimulatedNull::simulate(&FunctionalValue::default(), &tf, 99, 1).is_err());
        let null = SimulatedNull::simulate(&FunctionalValue::default(), &tf, 100, 1).unwrap();
        assert!(null.draws.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn order_statistic_rank() {
        let null = SimulatedNull { draws: (1..=100).rev().map(f64::from).collect(), seed: 0 };
        assert_eq!(null.upper_order_statistic(0.05), 96.0);
        assert_eq!(null.upper_order_statistic(0.051), 95.0);
        assert_eq!(null.upper_order_statistic(0.001), 100.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }
}
