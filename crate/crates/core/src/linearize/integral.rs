use serde::{Deserialize, Serialize};

use super::limit::require_star;
use crate::algebra::{op_norm, CVector};
use crate::dynamics::SemigroupSpec;
use crate::error::{Error, Result};
use crate::fit::line_fit;
use crate::semicocycle::{frame, frame_growth, CocycleStepper, SemicocycleSpec};
use crate::tolerances::Tolerances;

pub const DEFAULT_T_MAX: f64 = 40.0;
/// Integrand samples in the fit window `[T/2, T]`.
const FIT_POINTS: usize = 21;
/// The horizon may double this many times while the tail is too large.
const MAX_DOUBLINGS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IntegralOutcome {
    Finite {
        #[serde(rename = "L")]
        l: f64,
        /// Extrapolated `∫_T^∞` added to the quadrature.
        tail: f64,
        t_end: f64,
    },
    Divergent {
        exponent: f64,
        t_end: f64,
    },
}

/// `L(x) = ∫₀^∞ ‖e^{−tB₀}B(F_t x)e^{tB₀} − B₀‖ dt`, or the growth exponent
/// of the integrand when it does not decay.
pub fn integral_criterion(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    x: &CVector,
    t_max: f64,
    tol: &Tolerances,
) -> Result<IntegralOutcome> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Precondition("T_max must be positive".into()));
    }
    require_star(base, std::slice::from_ref(x), tol)?;
    let b0 = spec.b0();
    let width = frame_growth(b0);
    let mut stepper = CocycleStepper::new(base, spec, x, true, tol)?;
    let mut t_end = t_max;
    for doubling in 0..=MAX_DOUBLINGS {
        if t_end * width > 600.0 {
            return Err(Error::UndecidedIntegral(format!(
                "rotated frame overflows before the integrand settles (T = {t_end})"
            )));
        }
        let lo = t_end / 2.0;
        let mut ts = Vec::with_capacity(FIT_POINTS);
        let mut gs = Vec::with_capacity(FIT_POINTS);
        let mut q = 0.0;
        for i in 0..FIT_POINTS {
            let t = lo + (t_end - lo) * i as f64 / (FIT_POINTS - 1) as f64;
            if t < stepper.t() {
                continue;
            }
            let snap = stepper.advance(t)?;
            let (e, e_inv) = frame(b0, t)?;
            let dev = spec.gamma.generator_deviation(base, &(&snap.u - &base.x0))?;
            ts.push(t);
            gs.push(op_norm(&(e_inv * dev * e), base.norm));
            q = snap.integral.unwrap_or(0.0);
        }
        let g_end = *gs.last().unwrap_or(&0.0);
        let (fts, fys): (Vec<f64>, Vec<f64>) = ts
            .iter()
            .zip(&gs)
            .filter(|(_, g)| **g > 0.0)
            .map(|(t, g)| (*t, g.ln()))
            .unzip();
        if fts.len() < 3 {
            // integrand vanishes (to underflow) on the window
            return Ok(IntegralOutcome::Finite { l: q, tail: 0.0, t_end });
        }
        let fit = line_fit(&fts, &fys).ok_or_else(|| Error::UndecidedIntegral("degenerate fit window".into()))?;
        if fit.r2 < tol.r2_min {
            return Err(Error::UndecidedIntegral(format!(
                "log-integrand fit has R² = {:.3} on [{lo}, {t_end}]",
                fit.r2
            )));
        }
        if fit.slope >= 0.0 {
            return Ok(IntegralOutcome::Divergent {
                exponent: fit.slope,
                t_end,
            });
        }
        let tail = g_end / fit.slope.abs();
        if tail <= tol.tail_tol {
            return Ok(IntegralOutcome::Finite { l: q + tail, tail, t_end });
        }
        if doubling == MAX_DOUBLINGS {
            return Err(Error::UndecidedIntegral(format!(
                "extrapolated tail {tail:.3e} still above tail_tol at T = {t_end}"
            )));
        }
        t_end *= 2.0;
    }
    unreachable!()
}
