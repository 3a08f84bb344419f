//! Admissibility of the tuning exponents `(varpi, rho)` given the declared
//! assumption indices `(r, v)`.
//!
//! The checks are advisory: a failing report never blocks a test, it is
//! attached to the test output.

use serde::{Deserialize, Serialize};

use crate::tuning::{AssumptionIndices, TuningParams};

/// Which limit theorem the test relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestKind {
    /// No-common-jump tests with an indicator-type `f`.
    DisjointClt,
    /// No-common-jump tests with a general `f`.
    DisjointCltGeneralF,
    /// Common-jump ratio test with an indicator-type `f`.
    CommonClt,
    /// Common-jump ratio test with a general `f` of smoothness index `p`.
    CommonCltGeneralF { p: f64 },
}

/// One inequality `lhs < rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl RateCheck {
    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.to_owned(), lhs, rhs, pass: lhs < rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: TestKind,
    pub checks: Vec<RateCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Evaluates the rate conditions relevant to `kind`.
pub fn validate_rate_conditions(
    assume: &AssumptionIndices,
    tuning: &TuningParams,
    kind: TestKind,
) -> ValidationReport {
    let r = assume.r();
    let v = assume.v();
    let varpi = tuning.varpi;
    let rho = tuning.rho;
    let vol_rate = 2.0 * v / (1.0 + 2.0 * v);

    let checks = match kind {
        TestKind::CommonClt => {
            let rhs = (2.0 * varpi * (2.0 - r)).min(vol_rate);
            vec![RateCheck::strict("rho < 2 varpi (2 - r) ^ 2v/(1+2v)", rho, rhs)]
        }
        TestKind::DisjointClt => {
            let rhs = (2.0 * varpi * (2.0 - r)).min(vol_rate).min(0.5);
            vec![RateCheck::strict("rho < 2 varpi (2 - r) ^ 2v/(1+2v) ^ 1/2", rho, rhs)]
        }
        TestKind::DisjointCltGeneralF => {
            let v2 = (2.0 * v).min(1.0);
            let rhs = (varpi * (4.0 - r) - 1.0).min(v2 / (1.0 + v2)).min(0.5);
            vec![RateCheck::strict(
                "rho < (varpi (4 - r) - 1) ^ (2v^1)/(1+(2v^1)) ^ 1/2",
                rho,
                rhs,
            )]
        }
        TestKind::CommonCltGeneralF { p } => {
            let mut checks = vec![RateCheck::strict("1 + r/2 < p", 1.0 + r / 2.0, p)];
            let mut rhs = (2.0 * varpi * (p.min(2.0) - r)).min(vol_rate);
            if r > 0.0 {
                checks.push(RateCheck::strict("varpi < 1/(2r)", varpi, 1.0 / (2.0 * r)));
                rhs = rhs.min((2.0 * p - 2.0 - r) / r);
            }
            checks.push(RateCheck::strict(
                "rho < 2 varpi (p^2 - r) ^ (2p-2-r)/r ^ 2v/(1+2v)",
                rho,
                rhs,
            ));
            checks
        }
    };
    ValidationReport { kind, checks }
}
