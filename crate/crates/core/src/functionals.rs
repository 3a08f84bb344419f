//! Test functions `F(x, y, z) = f(x) g(y, z)` and the empirical jump
//! functional `U(F, k_n)_T = Σ F(ΔX_i, ĉ_{i-k-1}, ĉ_i)` over detected jumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampledPath;
use crate::volatility::{JumpSet, LocalVolSeries};

/// Floor applied to local variance estimates before they enter `g`.
pub const C_HAT_FLOOR: f64 = 1e-12;

/// Jump-size weight `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum JumpWeight {
    /// `1{|x| > a}`, optionally smoothed by a C¹ ramp over `[a - h, a + h]`.
    IndicatorAbsGtA { a: f64, ramp_half_width: Option<f64> },
    /// `x²`.
    Square,
}

impl JumpWeight {
    pub fn indicator(a: f64) -> Self {
        JumpWeight::IndicatorAbsGtA { a, ramp_half_width: None }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            JumpWeight::IndicatorAbsGtA { a, ramp_half_width: None } => f64::from(u8::from(x.abs() > a)),
            JumpWeight::IndicatorAbsGtA { a, ramp_half_width: Some(h) } => {
                let t = ((x.abs() - (a - h)) / (2.0 * h)).clamp(0.0, 1.0);
                t * t * (3.0 - 2.0 * t)
            }
            JumpWeight::Square => x * x,
        }
    }

    /// Power `p` with `|f'(x)| <= C|x|^{p-1}` near zero; infinite when `f`
    /// vanishes on a neighbourhood of zero.
    pub fn smoothness_index(&self) -> f64 {
        match *self {
            JumpWeight::IndicatorAbsGtA { a, ramp_half_width } => {
                if a - ramp_half_width.unwrap_or(0.0) > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            JumpWeight::Square => 2.0,
        }
    }
}

/// Volatility-contrast function `g` with its first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// `2 log((y+z)/2) - log y - log z`, the Gaussian variance log-likelihood ratio.
    LogLikelihoodRatio,
    /// `h(y - z)` with `h(u) = u²/(1+u²)`.
    SmoothDifference,
}

/// `(g'_1, g'_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub d1: f64,
    pub d2: f64,
}

/// `(g''_11, g''_12, g''_22)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl Contrast {
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        match self {
            Contrast::LogLikelihoodRatio => llr(y, z),
            Contrast::SmoothDifference => smooth_h(y - z),
        }
    }

    pub fn gradient(&self, y: f64, z: f64) -> Gradient {
        match self {
            Contrast::LogLikelihoodRatio => {
                let s = 2.0 / (y + z);
                Gradient { d1: s - 1.0 / y, d2: s - 1.0 / z }
            }
            Contrast::SmoothDifference => {
                let d = smooth_h_prime(y - z);
                Gradient { d1: d, d2: -d }
            }
        }
    }

    pub fn hessian(&self, y: f64, z: f64) -> Hessian {
        match self {
            Contrast::LogLikelihoodRatio => {
                let s = 2.0 / ((y + z) * (y + z));
                Hessian { d11: 1.0 / (y * y) - s, d12: -s, d22: 1.0 / (z * z) - s }
            }
            Contrast::SmoothDifference => {
                let d = smooth_h_second(y - z);
                Hessian { d11: d, d12: -d, d22: d }
            }
        }
    }
}

/// `g(y, z) = 2 log((y+z)/2) - log y - log z`.
///
/// Computed as `log(q + 2 + 1/q) - log 4` with `q = y/z`, which is exactly
/// invariant under joint rescaling of `(y, z)` up to the rounding of `q`.
pub fn llr(y: f64, z: f64) -> f64 {
    let q = y / z;
    let t = (q - 1.0) * (q - 1.0) / (4.0 * q);
    t.ln_1p()
}

/// Checked variant of [`llr`] for raw inputs.
pub fn g_llr(y: f64, z: f64) -> Result<f64> {
    if !(y > 0.0 && z > 0.0) {
        return Err(Error::domain(format!("log-likelihood ratio needs positive variances, got ({y}, {z})")));
    }
    Ok(llr(y, z))
}

fn smooth_h(u: f64) -> f64 {
    let u2 = u * u;
    u2 / (1.0 + u2)
}

fn smooth_h_prime(u: f64) -> f64 {
    let d = 1.0 + u * u;
    2.0 * u / (d * d)
}

fn smooth_h_second(u: f64) -> f64 {
    let u2 = u * u;
    let d = 1.0 + u2;
    (2.0 - 6.0 * u2) / (d * d * d)
}

/// Anything that can be summed over jumps.
pub trait JumpFunction {
    fn eval(&self, x: f64, y: f64, z: f64) -> f64;
}

/// `F(x, y, z) = f(x) g(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub f: JumpWeight,
    pub g: Contrast,
}

impl TestFunction {
    /// `1{|x| > a} · g_llr`, the pivotal choice.
    pub fn llr_indicator(a: f64) -> Self {
        Self { f: JumpWeight::indicator(a), g: Contrast::LogLikelihoodRatio }
    }

    pub fn p(&self) -> f64 {
        self.f.smoothness_index()
    }

    /// `G(x,y,z) = y² f(x) (g''_11 + g''_22)`, whose functional estimates the
    /// conditional mean of the limit of `k_n U(F, k_n)_T` under no common jumps.
    pub fn disjoint_variance(&self) -> DisjointG {
        DisjointG(*self)
    }

    /// `G(x,y,z) = 2 f(x)² (y² g'_1² + z² g'_2²)`, feeding the variance of `S_n`.
    pub fn common_variance(&self) -> CommonG {
        CommonG(*self)
    }
}

impl JumpFunction for TestFunction {
    fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let fx = self.f.eval(x);
        if fx == 0.0 {
            return 0.0;
        }
        fx * self.g.eval(y, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisjointG(pub TestFunction);

impl JumpFunction for DisjointG {
    fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let fx = self.0.f.eval(x);
        if fx == 0.0 {
            return 0.0;
        }
        let h = self.0.g.hessian(y, z);
        y * y * fx * (h.d11 + h.d22)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonG(pub TestFunction);

impl JumpFunction for CommonG {
    fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let fx = self.0.f.eval(x);
        if fx == 0.0 {
            return 0.0;
        }
        let d = self.0.g.gradient(y, z);
        2.0 * fx * fx * (y * y * d.d1 * d.d1 + z * z * d.d2 * d.d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub index: usize,
    pub increment: f64,
    pub c_left: f64,
    pub c_right: f64,
    pub summand: f64,
    /// Whether either variance estimate was raised to [`C_HAT_FLOOR`].
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub contributing: Vec<Contribution>,
    /// Jumps outside the admissible index band (or next to a gap).
    pub excluded: Vec<usize>,
}

impl FunctionalValue {
    pub fn clamped_count(&self) -> usize {
        self.contributing.iter().filter(|c| c.clamped).count()
    }

    /// More than 10% of contributing jumps used a floored variance estimate.
    pub fn quality_warning(&self) -> bool {
        !self.contributing.is_empty() && 10 * self.clamped_count() > self.contributing.len()
    }
}

/// Jumps `i ∈ [k+1, n_obs - k]` whose left and right estimates both exist.
pub fn eligible_jumps(path: &SampledPath, vol: &LocalVolSeries, jumps: &JumpSet) -> (JumpSet, Vec<usize>) {
    let k = vol.k_n();
    let n = path.n_obs();
    let mut excluded = Vec::new();
    let kept = jumps.filtered(|i| {
        let ok = i > k && i + k <= n && vol.around(i).is_some();
        if !ok {
            excluded.push(i);
        }
        ok
    });
    (kept, excluded)
}

/// `U(F, k)_T` over the detected jumps.
///
/// `k` must be the window of `vol`. Variance estimates are floored at
/// [`C_HAT_FLOOR`] before evaluation.
pub fn evaluate_u<F: JumpFunction>(
    path: &SampledPath,
    vol: &LocalVolSeries,
    jumps: &JumpSet,
    func: &F,
    k: usize,
) -> Result<FunctionalValue> {
    if k != vol.k_n() {
        return Err(Error::config(format!(
            "functional requested with k = {k} but volatility series uses k_n = {}",
            vol.k_n()
        )));
    }
    let (kept, excluded) = eligible_jumps(path, vol, jumps);
    let mut out = FunctionalValue { excluded, ..Default::default() };
    for (index, increment) in kept.iter() {
        let (raw_left, raw_right) = vol.around(index).expect("eligible jump has both estimates");
        let c_left = raw_left.max(C_HAT_FLOOR);
        let c_right = raw_right.max(C_HAT_FLOOR);
        let summand = func.eval(increment, c_left, c_right);
        out.value += summand;
        out.contributing.push(Contribution {
            index,
            increment,
            c_left,
            c_right,
            summand,
            clamped: raw_left < C_HAT_FLOOR || raw_right < C_HAT_FLOOR,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SamplingGrid;
    use crate::volatility::local_vol;
    use proptest::prelude::*;

    const LLR: Contrast = Contrast::LogLikelihoodRatio;
    const SMOOTH: Contrast = Contrast::SmoothDifference;

    fn naive_llr(y: f64, z: f64) -> f64 {
        2.0 * ((y + z) / 2.0).ln() - y.ln() - z.ln()
    }

    #[test]
    fn llr_values() {
        assert_eq!(g_llr(1.0, 1.0).unwrap(), 0.0);
        let expected = 2.0 * 1.5f64.ln() - 2f64.ln();
        assert!((g_llr(1.0, 2.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.117_783).abs() < 1e-6);
        assert_eq!(g_llr(2.0, 4.0).unwrap(), g_llr(1.0, 2.0).unwrap());
        assert!(g_llr(0.0, 1.0).is_err());
        assert!(g_llr(1.0, -1.0).is_err());
    }

    #[test]
    fn llr_matches_definition() {
        for (y, z) in [(0.3, 0.7), (1e-3, 5.0), (12.0, 0.01), (0.4, 0.41)] {
            assert!((llr(y, z) - naive_llr(y, z)).abs() < 1e-12 * naive_llr(y, z).max(1e-3));
        }
    }

    #[test]
    fn admissibility_on_grid() {
        for g in [LLR, SMOOTH] {
            for i in 0..40 {
                let y = 10f64.powf(-3.0 + 0.15 * i as f64);
                assert_eq!(g.eval(y, y), 0.0);
                let d = g.gradient(y, y);
                assert!(d.d1.abs() < 1e-12 / y && d.d2.abs() < 1e-12 / y);
                let h = g.hessian(y, y);
                assert!(h.d11 + h.d22 > 0.0);
                assert!(g.eval(y, 1.3 * y) > 0.0);
                assert!(g.eval(1.3 * y, y) > 0.0);
            }
        }
        assert_eq!(LLR.eval(0.2, 0.9), LLR.eval(0.9, 0.2));
    }

    #[test]
    fn disjoint_g_for_llr() {
        let tf = TestFunction::llr_indicator(0.0);
        let g = tf.disjoint_variance();
        assert!((g.eval(0.5, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let h = LLR.hessian(1.0, 1.0);
        assert!((h.d11 - 0.5).abs() < 1e-15 && (h.d22 - 0.5).abs() < 1e-15);
        assert!((h.d12 + 0.5).abs() < 1e-15);
        for lambda in [1e-3, 0.37, 42.0] {
            let a = g.eval(0.5, 0.3, 0.8);
            let b = g.eval(0.5, lambda * 0.3, lambda * 0.8);
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
        let zero_f = TestFunction { f: JumpWeight::indicator(10.0), g: LLR };
        assert_eq!(zero_f.disjoint_variance().eval(0.5, 0.3, 0.8), 0.0);
    }

    #[test]
    fn common_g_for_llr() {
        let tf = TestFunction::llr_indicator(0.0);
        let g = tf.common_variance();
        let d = LLR.gradient(1.0, 2.0);
        assert!((d.d1 + 1.0 / 3.0).abs() < 1e-15);
        assert!((d.d2 - 1.0 / 6.0).abs() < 1e-15);
        assert!((g.eval(1.0, 1.0, 2.0) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(g.eval(1.0, 0.7, 0.7), 0.0);
        for lambda in [1e-3, 0.37, 42.0] {
            let a = g.eval(1.0, 1.0, 2.0);
            let b = g.eval(1.0, lambda, 2.0 * lambda);
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn ramp_is_c1_and_matches_indicator_outside() {
        let f = JumpWeight::IndicatorAbsGtA { a: 0.5, ramp_half_width: Some(0.1) };
        assert_eq!(f.eval(0.39), 0.0);
        assert_eq!(f.eval(-0.61), 1.0);
        assert!((f.eval(0.5) - 0.5).abs() < 1e-15);
        let eps = 1e-7;
        for x in [0.4, 0.6] {
            let slope = (f.eval(x + eps) - f.eval(x - eps)) / (2.0 * eps);
            assert!(slope.abs() < 1e-5);
        }
        assert_eq!(JumpWeight::indicator(0.5).eval(0.5), 0.0);
        assert_eq!(JumpWeight::Square.eval(-0.3), 0.09);
    }

    fn path_with_jumps() -> (SampledPath, Vec<f64>) {
        let n = 60;
        let grid = SamplingGrid::from_mesh(1.0 / 60.0, n).unwrap();
        let mut incs: Vec<f64> = (0..n).map(|i| 0.01 * (1.0 + 0.5 * ((i * 7 % 5) as f64))).collect();
        incs[19] = 1.0; // increment 20
        incs[39] = -1.0; // increment 40
        incs[2] = 1.0; // increment 3, near the edge
        let mut values = vec![0.0];
        for dx in &incs {
            values.push(values.last().unwrap() + dx);
        }
        (SampledPath::new(grid, values).unwrap(), vec![0.1; n])
    }

    #[test]
    fn functional_sums_over_band() {
        let (p, u) = path_with_jumps();
        let vol = local_vol(&p, 5, &u).unwrap();
        let jumps = crate::volatility::detect_jumps(&p, &u, 0.0).unwrap();
        assert_eq!(jumps.indices, vec![3, 20, 40]);
        let tf = TestFunction::llr_indicator(0.0);
        let fv = evaluate_u(&p, &vol, &jumps, &tf, 5).unwrap();
        assert_eq!(fv.excluded, vec![3]);
        assert_eq!(fv.contributing.len(), 2);
        let c = &fv.contributing[0];
        assert_eq!(c.c_left, vol.get(20 - 6).unwrap());
        assert_eq!(c.c_right, vol.get(20).unwrap());
        let sum: f64 = fv.contributing.iter().map(|c| c.summand).sum();
        assert!((fv.value - sum).abs() <= 1e-12 * sum.abs());
        assert!(matches!(evaluate_u(&p, &vol, &jumps, &tf, 6), Err(Error::Config(_))));
    }

    #[test]
    fn functional_of_no_jumps_is_zero() {
        let (p, u) = path_with_jumps();
        let vol = local_vol(&p, 5, &u).unwrap();
        let fv = evaluate_u(&p, &vol, &JumpSet::default(), &TestFunction::llr_indicator(0.0), 5).unwrap();
        assert_eq!(fv.value, 0.0);
        assert!(fv.contributing.is_empty());
    }

    #[test]
    fn equal_sides_contribute_nothing() {
        // constant increments: left and right estimates coincide
        let n = 40;
        let grid = SamplingGrid::from_mesh(0.025, n).unwrap();
        let mut values = vec![0.0];
        for i in 0..n {
            let dx = if i == 19 { 1.0 } else { 0.01 };
            values.push(values.last().unwrap() + dx);
        }
        let p = SampledPath::new(grid, values).unwrap();
        let u = vec![0.1; n];
        let vol = local_vol(&p, 4, &u).unwrap();
        let jumps = crate::volatility::detect_jumps(&p, &u, 0.0).unwrap();
        let fv = evaluate_u(&p, &vol, &jumps, &TestFunction::llr_indicator(0.0), 4).unwrap();
        assert_eq!(fv.contributing.len(), 1);
        assert_eq!(fv.value, 0.0);
    }

    #[test]
    fn two_jump_sum() {
        // (1, 2) and (3, 3) with f == 1
        let expected = llr(1.0, 2.0) + llr(3.0, 3.0);
        assert!((expected - 0.117_783).abs() < 1e-6);
    }

    #[test]
    fn clamped_estimates_flagged() {
        let n = 40;
        let grid = SamplingGrid::from_mesh(0.025, n).unwrap();
        let mut values = vec![0.0];
        for i in 0..n {
            let dx = if i == 19 { 1.0 } else if i < 19 { 0.0 } else { 0.01 };
            values.push(values.last().unwrap() + dx);
        }
        let p = SampledPath::new(grid, values).unwrap();
        let u = vec![0.1; n];
        let vol = local_vol(&p, 4, &u).unwrap();
        let jumps = crate::volatility::detect_jumps(&p, &u, 0.0).unwrap();
        let fv = evaluate_u(&p, &vol, &jumps, &TestFunction::llr_indicator(0.0), 4).unwrap();
        assert_eq!(fv.clamped_count(), 1);
        assert!(fv.quality_warning());
        assert_eq!(fv.contributing[0].c_left, C_HAT_FLOOR);
        assert!(fv.value.is_finite());
    }

    proptest! {
        #[test]
        fn summands_nonnegative(y in 1e-4f64..1e4, z in 1e-4f64..1e4, x in -2.0f64..2.0) {
            for g in [LLR, SMOOTH] {
                for f in [JumpWeight::indicator(0.1), JumpWeight::Square] {
                    let tf = TestFunction { f, g };
                    prop_assert!(tf.eval(x, y, z) >= 0.0);
                    prop_assert!(tf.common_variance().eval(x, y, z) >= 0.0);
                }
            }
        }

        #[test]
        fn functional_is_additive(split in 0usize..3) {
            let (p, u) = path_with_jumps();
            let vol = local_vol(&p, 5, &u).unwrap();
            let jumps = crate::volatility::detect_jumps(&p, &u, 0.0).unwrap();
            let tf = TestFunction::llr_indicator(0.0);
            let cut = jumps.indices[split];
            let a = jumps.filtered(|i| i < cut);
            let b = jumps.filtered(|i| i >= cut);
            let whole = evaluate_u(&p, &vol, &jumps, &tf, 5).unwrap().value;
            let parts = evaluate_u(&p, &vol, &a, &tf, 5).unwrap().value
                + evaluate_u(&p, &vol, &b, &tf, 5).unwrap().value;
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1e-300));
        }
    }
}
