//! Linearization engines: limits of `e^{−tB₀}Γ_t(x)` (plain and corrected),
//! the integral criterion, corrector synthesis, the Taylor/Sylvester solver,
//! cohomology verification and coboundary detection.

mod corrector;
mod integral;
mod limit;
mod taylor;
mod verify;

use serde::{Deserialize, Serialize};

use crate::algebra::{serde_complex, CMatrix, CVector, MapExpr};

pub use corrector::{corrector_fit, Corrector, CorrectorOptions, DEFAULT_FIT_TIMES};
pub use integral::{integral_criterion, IntegralOutcome, DEFAULT_T_MAX};
pub use limit::{
    corrected_limit, degradation_study, first_passage, limit_at, naive_limit, DegradationReport, DegradationRow,
    LimitRun, Schedule,
};
pub use taylor::{generator_series, taylor_linearize, taylor_series};
pub use verify::{coboundary_check, verify_cohomology, Gauge, LimitGauge, DEFAULT_T_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Converged,
    Oscillating,
    Undecided,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub status: Status,
    pub t_reached: f64,
    pub cauchy_tail: f64,
    /// Fitted growth exponent backing a divergence verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<f64>,
}

impl ConvergenceVerdict {
    /// Worst status across samples; times, tails and witnesses take maxima.
    pub fn combine(all: &[ConvergenceVerdict]) -> ConvergenceVerdict {
        let status = all.iter().map(|v| v.status).max().unwrap_or(Status::Undecided);
        let fold = |f: fn(&ConvergenceVerdict) -> f64| all.iter().map(f).fold(0.0, f64::max);
        let witness = all
            .iter()
            .filter(|v| v.status == status)
            .filter_map(|v| v.witness)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))));
        ConvergenceVerdict {
            status,
            t_reached: fold(|v| v.t_reached),
            cauchy_tail: fold(|v| v.cauchy_tail),
            witness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Corrected,
    Taylor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleValue {
    #[serde(with = "serde_complex::vector")]
    pub x: CVector,
    #[serde(rename = "M", with = "serde_complex::matrix")]
    pub m: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationResult {
    pub method: Method,
    pub verdict: ConvergenceVerdict,
    #[serde(rename = "B0", with = "serde_complex::matrix")]
    pub b0: CMatrix,
    pub ell: Option<f64>,
    pub resonant_k: Option<Vec<u32>>,
    /// Set whenever the verdict is `Converged`.
    pub cohomology_residual: Option<f64>,
    #[serde(rename = "integral_L", skip_serializing_if = "Option::is_none")]
    pub integral_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrector: Option<Corrector>,
    #[serde(rename = "M_fit", skip_serializing_if = "Option::is_none")]
    pub m_fit: Option<MapExpr>,
    pub samples: Vec<SampleValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl LinearizationResult {
    pub fn converged(&self) -> bool {
        self.verdict.status == Status::Converged
    }

    /// Value at the sample equal to `x`, if any.
    pub fn m_at(&self, x: &CVector) -> Option<&CMatrix> {
        self.samples.iter().find(|s| &s.x == x).map(|s| &s.m)
    }
}
