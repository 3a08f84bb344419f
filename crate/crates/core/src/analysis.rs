//! End-to-end analysis of one observation window: thresholds, local
//! variances, jump detection, functionals and every test statistic.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functionals::{eligible_jumps, evaluate_u, Contrast, FunctionalValue, JumpWeight, TestFunction};
use crate::grid::SampledPath;
use crate::hypothesis::{
    common_not_applicable, statistic_sn, test_common, test_disjoint_chebyshev, test_disjoint_pivotal,
    test_disjoint_simulated, truncation_vn, variance_vn, Hypothesis, Method, SimulatedNull, TestReport,
};
use crate::rates::{validate_rate_conditions, TestKind, ValidationReport};
use crate::rng::content_seed;
use crate::tuning::{window_size, AssumptionIndices, TuningParams};
use crate::volatility::{detect_jumps, local_vol, truncation_threshold, JumpSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub tuning: TuningParams,
    pub assume: AssumptionIndices,
    /// Day-by-day bipower-variation truncation levels instead of one global level.
    pub per_day_thresholds: bool,
    pub contrast: Contrast,
    /// Draws for the simulated critical region.
    pub n_sim: usize,
    /// Seed for the simulated critical region; derived from the data when absent.
    pub seed: Option<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tuning: TuningParams::default(),
            assume: AssumptionIndices::default(),
            per_day_thresholds: true,
            contrast: Contrast::LogLikelihoodRatio,
            n_sim: 1000,
            seed: None,
        }
    }
}

impl AnalysisConfig {
    pub fn test_function(&self) -> TestFunction {
        TestFunction { f: JumpWeight::indicator(self.tuning.jump_size_a), g: self.contrast }
    }
}

/// Quantities entering the common-jump ratio test.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioParts {
    /// `U(F, k_n)_T` over jumps admissible for both window widths.
    pub u_f_narrow: FunctionalValue,
    /// `U(F, w k_n)_T` over the same jumps.
    pub u_f_wide: FunctionalValue,
    pub u_g_common: FunctionalValue,
    pub s_n: f64,
    pub v_n: f64,
    pub v_trunc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowAnalysis {
    pub k_n: usize,
    pub w: usize,
    pub jumps: JumpSet,
    pub u_f: FunctionalValue,
    pub u_g_disjoint: FunctionalValue,
    pub simulated: Option<SimulatedNull>,
    pub ratio: std::result::Result<RatioParts, String>,
    pub disjoint_validation: ValidationReport,
    pub common_validation: ValidationReport,
    pub test_function: TestFunction,
}

/// Runs the whole estimation chain on `path`.
pub fn analyze(path: &SampledPath, config: &AnalysisConfig) -> Result<WindowAnalysis> {
    let tuning = &config.tuning;
    tuning.validate()?;
    let k_n = window_size(path.grid(), tuning)?;
    let wide = tuning.w * k_n;
    let thresholds = truncation_threshold(path, tuning, config.per_day_thresholds)?;
    let vol = local_vol(path, k_n, &thresholds)?;
    let vol_wide = local_vol(path, wide, &thresholds)?;
    let jumps = detect_jumps(path, &thresholds, tuning.jump_size_a)?;
    let tf = config.test_function();

    let u_f = evaluate_u(path, &vol, &jumps, &tf, k_n)?;
    let u_g_disjoint = evaluate_u(path, &vol, &jumps, &tf.disjoint_variance(), k_n)?;

    let simulated = if jumps.is_empty() {
        None
    } else {
        let seed = config.seed.unwrap_or_else(|| content_seed(&[path.values(), &[tuning.jump_size_a]]));
        Some(SimulatedNull::simulate(&u_f, &tf, config.n_sim, seed)?)
    };

    let (matched, _) = eligible_jumps(path, &vol_wide, &jumps);
    let ratio = (|| -> std::result::Result<RatioParts, String> {
        if jumps.is_empty() {
            return Err("no jumps detected".to_owned());
        }
        let u_f_narrow = evaluate_u(path, &vol, &matched, &tf, k_n).map_err(|e| e.to_string())?;
        let u_f_wide = evaluate_u(path, &vol_wide, &matched, &tf, wide).map_err(|e| e.to_string())?;
        let u_g_common = evaluate_u(path, &vol, &matched, &tf.common_variance(), k_n).map_err(|e| e.to_string())?;
        let s_n = statistic_sn(&u_f_narrow, &u_f_wide).map_err(|e| e.to_string())?;
        let v_n = variance_vn(&u_g_common, &u_f_narrow, k_n, tuning.w).map_err(|e| e.to_string())?;
        let v_trunc = truncation_vn(k_n, jumps.count()).map_err(|e| e.to_string())?;
        Ok(RatioParts { u_f_narrow, u_f_wide, u_g_common, s_n, v_n, v_trunc })
    })();

    let indicator = matches!(tf.f, JumpWeight::IndicatorAbsGtA { .. });
    let (dk, ck) = if indicator {
        (TestKind::DisjointClt, TestKind::CommonClt)
    } else {
        (TestKind::DisjointCltGeneralF, TestKind::CommonCltGeneralF { p: tf.p() })
    };
    Ok(WindowAnalysis {
        k_n,
        w: tuning.w,
        u_f,
        u_g_disjoint,
        simulated,
        ratio,
        disjoint_validation: validate_rate_conditions(&config.assume, tuning, dk),
        common_validation: validate_rate_conditions(&config.assume, tuning, ck),
        jumps,
        test_function: tf,
    })
}

impl WindowAnalysis {
    /// `N^n_T`.
    pub fn n_jumps(&self) -> usize {
        self.jumps.count()
    }

    /// `U(F,k_n)_T / N^n_T`, when jumps exist.
    pub fn u_per_jump(&self) -> Option<f64> {
        (self.n_jumps() > 0).then(|| self.u_f.value / self.n_jumps() as f64)
    }

    pub fn log_sn(&self) -> Option<f64> {
        self.ratio.as_ref().ok().map(|r| r.s_n.ln())
    }

    pub fn report(&self, method: Method, alpha: f64) -> Result<TestReport> {
        let report = match method {
            Method::Chebyshev => test_disjoint_chebyshev(&self.u_f, &self.u_g_disjoint, self.k_n, alpha)?,
            Method::Simulated => match &self.simulated {
                Some(null) => test_disjoint_simulated(&self.u_f, null, self.k_n, alpha)?,
                None => test_disjoint_chebyshev(&self.u_f, &self.u_g_disjoint, self.k_n, alpha).map(|mut r| {
                    r.method = Method::Simulated;
                    r
                })?,
            },
            Method::PivotalChisq => test_disjoint_pivotal(&self.u_f, &self.jumps, self.k_n, alpha)?,
            Method::RatioPlain | Method::RatioTruncated => match &self.ratio {
                Ok(parts) => {
                    let trunc = (method == Method::RatioTruncated).then_some(parts.v_trunc);
                    let mut r = test_common(parts.s_n, parts.v_n, alpha, trunc)?;
                    r.n_jumps = self.n_jumps();
                    let d = &mut r.diagnostics;
                    d.contributing_jumps = parts.u_f_narrow.contributing.len();
                    d.clamped = parts.u_f_narrow.clamped_count().max(parts.u_f_wide.clamped_count());
                    d.excluded_edge_jumps = parts.u_f_wide.excluded.clone();
                    d.quality_warning = parts.u_f_narrow.quality_warning() || parts.u_f_wide.quality_warning();
                    r
                }
                Err(reason) => {
                    let mut r = common_not_applicable(method, alpha, reason);
                    r.n_jumps = self.n_jumps();
                    r
                }
            },
        };
        let validation = match method.hypothesis() {
            Hypothesis::NullDisjoint => self.disjoint_validation.clone(),
            Hypothesis::NullCommon => self.common_validation.clone(),
        };
        Ok(report.with_validation(validation))
    }

    pub fn reports(&self, methods: &[Method], alpha: f64) -> Result<Vec<TestReport>> {
        methods.iter().map(|&m| self.report(m, alpha)).collect()
    }
}
