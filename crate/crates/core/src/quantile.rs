//! Upper quantiles of the chi-square and standard normal laws.
//!
//! Both come from the regularized upper incomplete gamma function
//! `Q(a, x) = Γ(a, x) / Γ(a)`: `P(χ²_n > z) = Q(n/2, z/2)` and
//! `P(|N(0,1)| > z) = Q(1/2, z²/2)`.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Chi-square density with `dof` degrees of freedom.
fn chisq_density(z: f64, dof: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let k = dof / 2.0;
    ((k - 1.0) * z.ln() - z / 2.0 - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// `z(α, n)` with `P(χ²_n > z) = α`.
pub fn chisq_quantile(alpha: f64, dof: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if dof == 0 {
        return Err(Error::domain("chi-square needs at least one degree of freedom"));
    }
    let n = dof as f64;
    let survival = |z: f64| gamma_q(n / 2.0, z / 2.0);

    let mut lo = 0.0;
    let mut hi = n.max(1.0);
    while survival(hi) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    // safeguarded Newton on the decreasing survival function
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = survival(z) - alpha;
        if f > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = chisq_density(z, n);
        let mut next = if slope > 0.0 { z + f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - z).abs();
        z = next;
        if step < 1e-14 * z.max(1.0) || hi - lo < 1e-14 * z.max(1.0) {
            break;
        }
    }
    Ok(z)
}

/// `z_α` with `P(|N(0,1)| > z_α) = α`.
pub fn normal_quantile_two_sided(alpha: f64) -> Result<f64> {
    Ok(chisq_quantile(alpha, 1)?.sqrt())
}
