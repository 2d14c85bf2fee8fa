use rayon::prelude::*;

use super::limit::{limit_at, naive_limit, Schedule};
use super::{LinearizationResult, Status};
use crate::algebra::{mat_exp, min_singular_value, op_norm, CMatrix, CVector, MapExpr};
use crate::dynamics::SemigroupSpec;
use crate::error::{Error, Result};
use crate::semicocycle::{evolve, SemicocycleSpec};
use crate::tolerances::Tolerances;

pub const DEFAULT_T_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Anything that yields a candidate linearizing map at a point.
pub trait Gauge: Sync {
    fn eval(&self, x: &CVector) -> Result<CMatrix>;
}

impl Gauge for MapExpr {
    fn eval(&self, x: &CVector) -> Result<CMatrix> {
        MapExpr::eval(self, x)
    }
}

/// The (optionally corrected) limit evaluated on demand, with known values
/// reused at their own points.
pub struct LimitGauge<'a> {
    pub base: &'a SemigroupSpec,
    pub spec: &'a SemicocycleSpec,
    pub corrector: Option<&'a MapExpr>,
    pub schedule: Schedule,
    pub tol: &'a Tolerances,
    pub known: Vec<(CVector, CMatrix)>,
}

impl Gauge for LimitGauge<'_> {
    fn eval(&self, x: &CVector) -> Result<CMatrix> {
        if let Some((_, m)) = self.known.iter().find(|(y, _)| y == x) {
            return Ok(m.clone());
        }
        let run = limit_at(
            self.base,
            self.spec,
            self.corrector,
            x,
            &self.schedule.times(),
            self.tol.lim_tol,
            self.tol,
        )?;
        if run.verdict.status != Status::Converged {
            return Err(Error::Precondition(format!(
                "limit gauge did not converge at a flowed point ({:?})",
                run.verdict.status
            )));
        }
        Ok(run.m)
    }
}

/// `sup ‖M(F_t x)Γ_t(x) − e^{tB₀}M(x)‖ / (1 + ‖e^{tB₀}‖)` over samples × times.
pub fn verify_cohomology(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    gauge: &dyn Gauge,
    b0: &CMatrix,
    samples: &[CVector],
    t_grid: &[f64],
    tol: &Tolerances,
) -> Result<f64> {
    let at_samples: Vec<CMatrix> = samples.iter().map(|x| gauge.eval(x)).collect::<Result<_>>()?;
    let smallest = at_samples.iter().map(min_singular_value).fold(f64::INFINITY, f64::min);
    if smallest < tol.inv_floor {
        return Err(Error::NonInvertibleGauge { min_singular: smallest });
    }
    let norm = base.norm;
    let exps: Vec<CMatrix> = t_grid.iter().map(|t| mat_exp(b0, *t)).collect::<Result<_>>()?;
    let per_sample: Vec<f64> = samples
        .par_iter()
        .zip(&at_samples)
        .map(|(x, mx)| {
            let path = evolve(base, spec, x, t_grid, tol)?;
            let mut worst = 0.0f64;
            for ((g, u), e) in path.gammas.iter().zip(&path.flow_states).zip(&exps) {
                let lhs = gauge.eval(u)? * g;
                let r = op_norm(&(lhs - e * mx), norm) / (1.0 + op_norm(e, norm));
                worst = worst.max(r);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.into_iter().fold(0.0, f64::max))
}

/// `B₀ = 0` and the naive limit converges; the result carries `M`.
pub fn coboundary_check(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    samples: &[CVector],
    schedule: &Schedule,
    tol: &Tolerances,
) -> Result<(bool, Option<LinearizationResult>)> {
    if op_norm(spec.b0(), base.norm) > tol.norm_tol {
        return Ok((false, None));
    }
    let res = naive_limit(base, spec, samples, schedule, tol)?;
    Ok((res.converged(), Some(res)))
}
