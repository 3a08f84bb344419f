//! Analytic gradients and Hessians of the contrasts against central finite
//! differences with relative step 1e-5.

use cojump::Contrast;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-6;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = STEP * x.abs().max(1e-3);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn check(label: &str, analytic: f64, numeric: f64) -> f64 {
    let err = (analytic - numeric).abs() / analytic.abs();
    assert!(err < REL_TOL, "{label}: analytic {analytic:e}, numeric {numeric:e}, rel err {err:e}");
    err
}

/// Pairs off the diagonal, where every derivative of interest is bounded away
/// from 0, with `y/z` at most 1e4 either way. Beyond that the differenced
/// gradient loses about `5e-12 (y+z)²/(yz)` to rounding, which the finite
/// difference cannot resolve at this step.
fn llr_points() -> Vec<(f64, f64)> {
    let g = log_grid(1e-3, 1e3, 25);
    let mut pts = Vec::new();
    for &y in &g {
        for &z in &g {
            if (0.3..=1e4f64.ln()).contains(&(y / z).ln().abs()) {
                pts.push((y, z));
            }
        }
    }
    pts
}

#[test]
fn llr_gradient_matches_finite_differences() {
    let c = Contrast::LogLikelihoodRatio;
    let mut worst: f64 = 0.0;
    for (y, z) in llr_points() {
        let g = c.gradient(y, z);
        worst = worst.max(check("d1", g.d1, central(|t| c.eval(t, z), y)));
        worst = worst.max(check("d2", g.d2, central(|t| c.eval(y, t), z)));
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn llr_hessian_matches_finite_differences() {
    let c = Contrast::LogLikelihoodRatio;
    for (y, z) in llr_points() {
        let h = c.hessian(y, z);
        check("d11", h.d11, central(|t| c.gradient(t, z).d1, y));
        check("d22", h.d22, central(|t| c.gradient(y, t).d2, z));
        check("d12", h.d12, central(|t| c.gradient(y, t).d1, z));
    }
}

/// Differences `u = y - z` on a log grid of magnitudes, both signs, avoiding
/// the zeros of `h'` (u = 0) and `h''` (u² = 1/3).
fn smooth_points() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for u in log_grid(1e-3, 1e3, 40) {
        if ((u * u) - 1.0 / 3.0).abs() < 0.05 {
            continue;
        }
        for base in [0.01, 1.0, 50.0] {
            pts.push((base + u, base));
            pts.push((base, base + u));
        }
    }
    pts
}

#[test]
fn smooth_difference_derivatives_match_finite_differences() {
    let c = Contrast::SmoothDifference;
    for (y, z) in smooth_points() {
        let g = c.gradient(y, z);
        let h = c.hessian(y, z);
        // step relative to the difference, which is what h depends on
        let u = (y - z).abs();
        let fd = |f: &dyn Fn(f64) -> f64, x: f64| {
            let s = STEP * u;
            (f(x + s) - f(x - s)) / (2.0 * s)
        };
        check("d1", g.d1, fd(&|t| c.eval(t, z), y));
        check("d2", g.d2, fd(&|t| c.eval(y, t), z));
        check("d11", h.d11, fd(&|t| c.gradient(t, z).d1, y));
        check("d22", h.d22, fd(&|t| c.gradient(y, t).d2, z));
        check("d12", h.d12, fd(&|t| c.gradient(y, t).d1, z));
    }
}

#[test]
fn llr_is_symmetric_and_scale_free() {
    let c = Contrast::LogLikelihoodRatio;
    for (y, z) in llr_points() {
        let g = c.eval(y, z);
        assert!((g - c.eval(z, y)).abs() <= 1e-15 * g.max(1.0));
        assert!((g - c.eval(7.0 * y, 7.0 * z)).abs() <= 1e-13 * g.max(1e-3));
        // Euler: the gradient is homogeneous of degree -1 and y g1 + z g2 = 0
        let gr = c.gradient(y, z);
        assert!((y * gr.d1 + z * gr.d2).abs() < 1e-12 * (y * gr.d1).abs().max(1e-12));
    }
}
