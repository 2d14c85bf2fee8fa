use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::verify::{verify_cohomology, LimitGauge, DEFAULT_T_GRID};
use super::{ConvergenceVerdict, LinearizationResult, Method, SampleValue, Status};
use crate::algebra::{op_norm, CMatrix, CVector, MapExpr, NormKind};
use crate::dynamics::{SemigroupSpec, StarVerdict};
use crate::error::{Error, Result};
use crate::fit::line_fit;
use crate::semicocycle::{frame, frame_growth, CocycleStepper, SemicocycleSpec};
use crate::spectra::spectra_block;
use crate::tolerances::Tolerances;

/// Successive differences that must all fall below the threshold.
const CAUCHY_WINDOW: usize = 3;
/// Points in the growth-rate fit of the differences.
const RATE_WINDOW: usize = 5;
/// Rate fits only start once the window begins after this time.
const RATE_START: f64 = 5.0;
const RATE_MIN_SLOPE: f64 = 1e-3;
/// Largest `t·max(μ(X), μ(−X))`, `X = B₀ − τI`, before the rotated frame
/// is abandoned.
const FRAME_LIMIT: f64 = 600.0;
/// Below this offset `F_t(x) − x₀` has lost relative accuracy in double
/// precision; the rotated integrand would only amplify rounding.
const SETTLED_OFFSET: f64 = 1e-250;

/// Geometric time grid `t_k = t0·ratio^k`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub t0: f64,
    pub ratio: f64,
    pub steps: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            t0: 1.0,
            ratio: 1.5,
            steps: 40,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite() && self.ratio > 1.0 && self.ratio.is_finite() && self.steps >= CAUCHY_WINDOW)
        {
            return Err(Error::Precondition(format!(
                "schedule needs t0 > 0, ratio > 1 and at least {CAUCHY_WINDOW} steps"
            )));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.t0 * self.ratio.powi(k as i32)).collect()
    }
}

/// Outcome of the limit at one point.
#[derive(Debug, Clone)]
pub struct LimitRun {
    pub verdict: ConvergenceVerdict,
    /// Last value of `v(t)`.
    pub m: CMatrix,
    /// `(t_k, ‖v(t_k)‖, ‖v(t_k) − v(t_{k−1})‖)`.
    pub trace: Vec<(f64, f64, f64)>,
}

fn rate_fit(ts: &[f64], ds: &[f64]) -> Option<(f64, f64)> {
    if ds.iter().any(|d| *d <= 0.0) {
        return None;
    }
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    line_fit(ts, &ys).map(|f| (f.slope, f.r2))
}

fn log_norm_slope(trace: &[(f64, f64, f64)]) -> f64 {
    let k = trace.len().saturating_sub(RATE_WINDOW);
    let ts: Vec<f64> = trace[k..].iter().map(|e| e.0).collect();
    let ys: Vec<f64> = trace[k..].iter().map(|e| e.1.max(f64::MIN_POSITIVE).ln()).collect();
    match line_fit(&ts, &ys) {
        Some(f) if f.slope > 0.0 => f.slope,
        _ => trace.last().map_or(0.0, |e| e.1.ln() / e.0),
    }
}

/// The limit of `e^{−tB₀}N(F_t x)Γ_t(x)` along `times` at one point
/// (`N ≡ 1` when `corrector` is `None`), classified against `threshold`.
pub fn limit_at(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    corrector: Option<&MapExpr>,
    x: &CVector,
    times: &[f64],
    threshold: f64,
    tol: &Tolerances,
) -> Result<LimitRun> {
    let norm: NormKind = base.norm;
    let b0 = spec.b0();
    let width = frame_growth(b0);
    let mut stepper = CocycleStepper::new(base, spec, x, false, tol)?;
    let mut trace: Vec<(f64, f64, f64)> = Vec::with_capacity(times.len());
    let mut prev: Option<CMatrix> = None;
    let mut diffs: Vec<f64> = Vec::new();
    let mut diff_times: Vec<f64> = Vec::new();
    // ‖Δv‖/Δt: on a geometric schedule raw differences of a slowly
    // converging v still grow with the step length
    let mut rates: Vec<f64> = Vec::new();
    let mut prev_t = 0.0;
    let finish = |status, t, tail, witness, m: CMatrix, trace| LimitRun {
        verdict: ConvergenceVerdict {
            status,
            t_reached: t,
            cauchy_tail: tail,
            witness,
        },
        m,
        trace,
    };
    let tail_of = |d: &[f64]| {
        if d.len() >= CAUCHY_WINDOW {
            d[d.len() - CAUCHY_WINDOW..].iter().copied().fold(0.0, f64::max)
        } else {
            f64::INFINITY
        }
    };
    for &t in times {
        if t * width > FRAME_LIMIT {
            break;
        }
        let snap = match stepper.advance(t) {
            Ok(s) => s,
            Err(Error::Overflow { .. }) => break,
            Err(e) => return Err(e),
        };
        let offset = base.norm_of(&(&snap.u - &base.x0));
        if offset > 0.0 && offset < SETTLED_OFFSET {
            break;
        }
        let v = match corrector {
            None => snap.v,
            Some(n) => {
                let (e, e_inv) = match frame(b0, t) {
                    Ok(f) => f,
                    Err(Error::Overflow { .. }) => break,
                    Err(e) => return Err(e),
                };
                let dev = n.deviation_offset(&(&snap.u - &base.x0))?;
                &snap.v + e_inv * dev * e * &snap.v
            }
        };
        let nv = op_norm(&v, norm);
        let d = prev.as_ref().map(|p| op_norm(&(&v - p), norm));
        trace.push((t, nv, d.unwrap_or(f64::NAN)));
        if !nv.is_finite() || nv > tol.div_cap {
            let w = log_norm_slope(&trace);
            return Ok(finish(Status::Diverged, t, tail_of(&diffs), Some(w), v, trace));
        }
        if let Some(d) = d {
            diffs.push(d);
            diff_times.push(t);
            rates.push(d / (t - prev_t));
            let tail = tail_of(&diffs);
            if tail < threshold {
                return Ok(finish(Status::Converged, t, tail, None, v, trace));
            }
            if diffs.len() >= RATE_WINDOW {
                let k = diffs.len() - RATE_WINDOW;
                if diff_times[k] >= RATE_START {
                    if let Some((slope, r2)) = rate_fit(&diff_times[k..], &rates[k..]) {
                        if slope > RATE_MIN_SLOPE && r2 >= tol.r2_min {
                            return Ok(finish(Status::Diverged, t, tail, Some(slope), v, trace));
                        }
                    }
                }
            }
        }
        prev = Some(v);
        prev_t = t;
    }
    let t = trace.last().map_or(0.0, |e| e.0);
    let tail = tail_of(&diffs);
    let m = prev.unwrap_or_else(|| CMatrix::identity(b0.nrows(), b0.nrows()));
    let status = if diffs.len() >= RATE_WINDOW {
        let k = diffs.len() - RATE_WINDOW;
        match rate_fit(&diff_times[k..], &rates[k..]) {
            Some((slope, _)) if slope.abs() <= RATE_MIN_SLOPE => Status::Oscillating,
            _ => Status::Undecided,
        }
    } else {
        Status::Undecided
    };
    Ok(finish(status, t, tail, None, m, trace))
}

/// First schedule time at which the Cauchy tail drops below `threshold`.
pub fn first_passage(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    x: &CVector,
    schedule: &Schedule,
    threshold: f64,
    tol: &Tolerances,
) -> Result<Option<f64>> {
    schedule.validate()?;
    let run = limit_at(base, spec, None, x, &schedule.times(), threshold, tol)?;
    Ok((run.verdict.status == Status::Converged).then_some(run.verdict.t_reached))
}

pub(crate) fn require_star(base: &SemigroupSpec, grid: &[CVector], tol: &Tolerances) -> Result<()> {
    let a = base.linear_part()?;
    let kappa = crate::spectra::kappa_plus(&a)?;
    let horizon = base.star_horizon(kappa, tol);
    let report = base.condition_star(grid, horizon, tol)?;
    if report.verdict == StarVerdict::Fails {
        return Err(Error::Precondition(format!(
            "condition (*) fails: kappa_plus(A) = {:.3e}",
            report.kappa_plus
        )));
    }
    Ok(())
}

pub(crate) fn fill_spectra(res: &mut LinearizationResult, base: &SemigroupSpec, tol: &Tolerances) -> Result<()> {
    let block = spectra_block(&base.linear_part()?, &res.b0, tol)?;
    res.ell = block.ell;
    res.resonant_k = block.resonant_k;
    Ok(())
}

fn run_limits(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    corrector: Option<&MapExpr>,
    samples: &[CVector],
    schedule: &Schedule,
    method: Method,
    tol: &Tolerances,
) -> Result<LinearizationResult> {
    schedule.validate()?;
    if samples.is_empty() {
        return Err(Error::Precondition("no sample points".into()));
    }
    require_star(base, samples, tol)?;
    let times = schedule.times();
    let runs: Vec<LimitRun> = samples
        .par_iter()
        .map(|x| limit_at(base, spec, corrector, x, &times, tol.lim_tol, tol))
        .collect::<Result<_>>()?;
    let verdicts: Vec<ConvergenceVerdict> = runs.iter().map(|r| r.verdict).collect();
    let mut res = LinearizationResult {
        method,
        verdict: ConvergenceVerdict::combine(&verdicts),
        b0: spec.b0().clone(),
        ell: None,
        resonant_k: None,
        cohomology_residual: None,
        integral_l: None,
        corrector: None,
        m_fit: None,
        samples: samples
            .iter()
            .zip(&runs)
            .map(|(x, r)| SampleValue { x: x.clone(), m: r.m.clone() })
            .collect(),
        notes: Vec::new(),
    };
    fill_spectra(&mut res, base, tol)?;
    if res.converged() {
        let gauge = LimitGauge {
            base,
            spec,
            corrector,
            schedule: *schedule,
            tol,
            known: res.samples.iter().map(|s| (s.x.clone(), s.m.clone())).collect(),
        };
        res.cohomology_residual = Some(verify_cohomology(base, spec, &gauge, spec.b0(), samples, &DEFAULT_T_GRID, tol)?);
        res.notes.push("uniformity certified on the sample grid only".into());
    }
    Ok(res)
}

/// `M(x) = lim e^{−tB₀}Γ_t(x)` on each sample.
pub fn naive_limit(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    samples: &[CVector],
    schedule: &Schedule,
    tol: &Tolerances,
) -> Result<LinearizationResult> {
    run_limits(base, spec, None, samples, schedule, Method::Naive, tol)
}

/// `M(x) = lim e^{−tB₀}N(F_t x)Γ_t(x)` on each sample.
pub fn corrected_limit(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    n: &MapExpr,
    samples: &[CVector],
    schedule: &Schedule,
    tol: &Tolerances,
) -> Result<LinearizationResult> {
    let m = spec.algebra_dim();
    if n.input_dim() != base.dim || n.shape().rows != m || n.shape().cols != m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            got: n.shape().rows * n.shape().cols,
        });
    }
    let n = n.clone().centered_default(&base.x0).with_denom_floor(tol.denom_floor);
    let at_x0 = crate::algebra::max_abs_diff(&n.value_at_center()?, &CMatrix::identity(m, m));
    if at_x0 > tol.norm_tol {
        return Err(Error::Precondition(format!("corrector is not normalized at x0 (deviation {at_x0:.3e})")));
    }
    run_limits(base, spec, Some(&n), samples, schedule, Method::Corrected, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRow {
    pub n: usize,
    /// First time the Cauchy tail fell below the threshold; `None` if never.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub threshold: f64,
    pub schedule: Schedule,
    pub rows: Vec<DegradationRow>,
    /// `T(n)` strictly increasing in `n` (and defined for every row).
    pub increasing: bool,
}

/// First-passage times of the naive limit for a family of truncations.
pub fn degradation_study(
    cases: &[(usize, SemigroupSpec, SemicocycleSpec, CVector)],
    schedule: &Schedule,
    threshold: f64,
    tol: &Tolerances,
) -> Result<DegradationReport> {
    let rows: Vec<DegradationRow> = cases
        .par_iter()
        .map(|(n, base, spec, x)| {
            Ok(DegradationRow {
                n: *n,
                t: first_passage(base, spec, x, schedule, threshold, tol)?,
            })
        })
        .collect::<Result<_>>()?;
    let increasing = rows.iter().all(|r| r.t.is_some())
        && rows.windows(2).all(|w| w[0].n < w[1].n && w[0].t < w[1].t);
    Ok(DegradationReport {
        threshold,
        schedule: *schedule,
        rows,
        increasing,
    })
}
