//! Run reports (JSON) and time-series / sample tables (CSV).

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::{op_norm, CMatrix, CVector, C64};
use crate::dynamics::{StarReport, StarVerdict};
use crate::error::{Error, Result};
use crate::linearize::{
    coboundary_check, corrector_fit, degradation_study, integral_criterion, naive_limit, taylor_linearize,
    verify_cohomology, CorrectorOptions, DegradationReport, IntegralOutcome, LinearizationResult, Schedule, Status,
    DEFAULT_T_GRID, DEFAULT_T_MAX,
};
use crate::scenario::{builtin, Scenario};
use crate::semicocycle::{chain_residual, generator_extract, CocyclePath};
use crate::spectra::{spectra_block, SpectraBlock};

/// Default degree of the Taylor solver.
pub const DEFAULT_TAYLOR_DEGREE: u32 = 3;
/// Pass threshold for cohomology residuals in reports.
pub const RESIDUAL_PASS: f64 = 1e-6;
pub const DEGRADATION_TRUNCATIONS: [usize; 4] = [2, 4, 8, 16];
pub const DEGRADATION_THRESHOLD: f64 = 1e-6;
pub const DEGRADATION_SCHEDULE: Schedule = Schedule {
    t0: 1.0,
    ratio: 1.05,
    steps: 150,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Naive,
    Corrected,
    Taylor,
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<Option<String>>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    #[serde(with = "crate::algebra::serde_complex::vector")]
    pub x: CVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<IntegralOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undecided: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    pub status: Status,
    pub spectra: SpectraBlock,
    pub star: StarReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coboundary: Option<bool>,
    pub linearization: Vec<LinearizationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral: Option<IntegralReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationReport>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// 0 when the final linearization converged (and every check passed).
    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Converged && self.checks.iter().all(|c| c.pass) {
            0
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub method: MethodChoice,
    /// Corrector or Taylor degree; defaults to `⌊ℓ⌋` and 3 respectively.
    pub degree: Option<u32>,
    /// Integral criterion, reference gauge and degradation study.
    pub full: bool,
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            degree: None,
            full: false,
            timing: true,
        }
    }
}

fn rejected_status(e: &Error) -> Option<Status> {
    match e {
        Error::FitRejected { status } if status == "Diverged" => Some(Status::Diverged),
        Error::FitRejected { .. } => Some(Status::Undecided),
        _ => None,
    }
}

/// Runs the linearization pipeline on a prepared scenario.
pub fn run_pipeline(sc: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let base = &sc.semigroup;
    let spec = &sc.semicocycle;
    let tol = &sc.tolerances;
    let samples = sc.samples()?;
    let a = base.linear_part()?;
    let spectra = spectra_block(&a, spec.b0(), tol)?;
    let star = base.condition_star(&samples, base.star_horizon(spectra.kappa_plus_a, tol), tol)?;
    let mut checks = vec![Check::new(
        "star_condition",
        star.verdict == StarVerdict::Holds,
        format!("{:?}", star.verdict).to_lowercase(),
    )];
    let mut notes = Vec::new();
    if let Some(n) = sc.truncation {
        notes.push(format!(
            "sequence-space example at truncation n = {n}; infinite-dimensional statements are represented at truncation only"
        ));
    }

    // B₀ recovered from Γ near t = 0
    let extracted = generator_extract(base, spec, &base.x0, tol)?;
    let dev = op_norm(&(extracted - spec.b0()), base.norm);
    checks.push(Check::new("b0_from_gamma", dev <= tol.gen_tol, format!("{dev:.3e}")));
    if let Some(x) = samples.get(1) {
        let r = chain_residual(base, spec, x, 0.5, 0.5, tol)?;
        let scale = crate::semicocycle::evolve(base, spec, x, &[1.0], tol)?.gammas[0].clone();
        let bound = 100.0 * tol.ode_tol * op_norm(&scale, base.norm).max(1.0);
        checks.push(Check::new("chain_rule", r <= bound, format!("{r:.3e}")));
    }

    let ell_cap = spectra.ell.map(|l| l.floor().max(0.0) as u32);
    let mut results: Vec<LinearizationResult> = Vec::new();
    let mut coboundary = None;
    let mut status = Status::Undecided;
    let schedule = &sc.schedule;
    let try_corrector = |degree: u32, allow: bool, results: &mut Vec<LinearizationResult>, notes: &mut Vec<String>| {
        let mut o = CorrectorOptions::new(degree);
        o.allow_over_cap = allow;
        match corrector_fit(base, spec, &o, &samples, schedule, tol) {
            Ok((_, audit)) => {
                let s = audit.verdict.status;
                results.push(audit);
                Ok(s)
            }
            Err(e) => match rejected_status(&e) {
                Some(s) => {
                    notes.push(format!("corrector of degree {degree}: {e}"));
                    Ok(s)
                }
                None => Err(e),
            },
        }
    };
    match opts.method {
        MethodChoice::Naive => {
            let r = naive_limit(base, spec, &samples, schedule, tol)?;
            status = r.verdict.status;
            results.push(r);
        }
        MethodChoice::Corrected => {
            let degree = opts.degree.or(ell_cap).unwrap_or(0);
            status = try_corrector(degree, opts.degree.is_some(), &mut results, &mut notes)?;
        }
        MethodChoice::Taylor => {
            let r = taylor_linearize(base, spec, opts.degree.unwrap_or(DEFAULT_TAYLOR_DEGREE), &samples, tol)?;
            status = r.verdict.status;
            results.push(r);
        }
        MethodChoice::Auto => {
            if op_norm(spec.b0(), base.norm) <= tol.norm_tol {
                let (yes, r) = coboundary_check(base, spec, &samples, schedule, tol)?;
                coboundary = Some(yes);
                if let Some(r) = r {
                    status = r.verdict.status;
                    results.push(r);
                }
            } else {
                coboundary = Some(false);
                let r = naive_limit(base, spec, &samples, schedule, tol)?;
                status = r.verdict.status;
                results.push(r);
            }
            if status != Status::Converged {
                let degree = opts.degree.or(ell_cap).unwrap_or(0);
                status = try_corrector(degree, opts.degree.is_some(), &mut results, &mut notes)?;
            }
            if status != Status::Converged && spectra.omega.is_some() {
                let degree = opts.degree.unwrap_or(DEFAULT_TAYLOR_DEGREE);
                let resonant = spectra.resonant_k.as_ref().is_some_and(|ks| ks.iter().any(|&k| k <= degree));
                if !resonant {
                    match taylor_linearize(base, spec, degree, &samples, tol) {
                        Ok(r) => {
                            status = r.verdict.status;
                            results.push(r);
                        }
                        Err(e) => notes.push(format!("taylor: {e}")),
                    }
                }
            }
        }
    }
    if let Some(last) = results.last() {
        if let Some(r) = last.cohomology_residual {
            checks.push(Check::new("cohomology_residual", r <= RESIDUAL_PASS, format!("{r:.3e}")));
        }
        if let Some(c) = &last.corrector {
            notes.push(format!(
                "corrector degree {} (ell = {}), null directions {}",
                c.degree,
                spectra.ell.map_or("undefined".into(), |l| format!("{l}")),
                c.null_dim
            ));
        }
    }

    let mut integral = None;
    let mut reference_residual = None;
    let mut degradation = None;
    if opts.full {
        if let Some(x) = samples.get(1) {
            integral = Some(match integral_criterion(base, spec, x, DEFAULT_T_MAX, tol) {
                Ok(o) => IntegralReport {
                    x: x.clone(),
                    outcome: Some(o),
                    undecided: None,
                },
                Err(Error::UndecidedIntegral(msg)) => IntegralReport {
                    x: x.clone(),
                    outcome: None,
                    undecided: Some(msg),
                },
                Err(e) => return Err(e),
            });
        }
        if let Some(m) = &spec.reference_m {
            let r = verify_cohomology(base, spec, m, spec.b0(), &samples, &DEFAULT_T_GRID, tol)?;
            checks.push(Check::new("reference_gauge", r <= RESIDUAL_PASS, format!("{r:.3e}")));
            reference_residual = Some(r);
        }
        if sc.name == "examp123" && sc.truncation.is_some() {
            let cases = DEGRADATION_TRUNCATIONS
                .iter()
                .map(|&n| {
                    let s = builtin("examp123", Some(n))?;
                    let x = CVector::from_element(n, C64::new(0.5, 0.0));
                    Ok((n, s.semigroup, s.semicocycle, x))
                })
                .collect::<Result<Vec<_>>>()?;
            let rep = degradation_study(&cases, &DEGRADATION_SCHEDULE, DEGRADATION_THRESHOLD, tol)?;
            checks.push(Check::new(
                "degradation_trend",
                rep.increasing,
                if rep.increasing {
                    "T(n) strictly increasing".to_string()
                } else {
                    "T(n) not strictly increasing".to_string()
                },
            ));
            degradation = Some(rep);
        }
    }

    Ok(RunReport {
        scenario: sc.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: sc.sample.seed,
        truncation: sc.truncation,
        status,
        spectra,
        star,
        coboundary,
        linearization: results,
        integral,
        reference_residual,
        degradation,
        checks,
        notes,
        timing: opts.timing.then(|| Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        }),
    })
}

fn push_num(line: &mut String, v: f64) {
    let _ = write!(line, ",{v:.16e}");
}

fn push_matrix(line: &mut String, m: &CMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            push_num(line, m[(i, j)].re);
            push_num(line, m[(i, j)].im);
        }
    }
}

fn matrix_header(prefix: &str, rows: usize, cols: usize) -> String {
    let mut h = String::new();
    for i in 0..rows {
        for j in 0..cols {
            let _ = write!(h, ",{prefix}{i}{j}_re,{prefix}{i}{j}_im");
        }
    }
    h
}

/// `t`, then re/im of each `Γ` entry in row-major order.
pub fn cocycle_csv(path: &CocyclePath) -> String {
    let m = path.gammas.first().map_or(0, |g| g.nrows());
    let mut out = format!("t{}\n", matrix_header("g", m, m));
    for (t, g) in path.times.iter().zip(&path.gammas) {
        let mut line = format!("{t:.16e}");
        push_matrix(&mut line, g);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// `t`, then re/im of each coordinate of `F_t(x)`.
pub fn flow_csv(path: &CocyclePath) -> String {
    let n = path.x.len();
    let mut out = String::from("t");
    for k in 0..n {
        let _ = write!(out, ",x{k}_re,x{k}_im");
    }
    out.push('\n');
    for (t, u) in path.times.iter().zip(&path.flow_states) {
        let mut line = format!("{t:.16e}");
        for z in u.iter() {
            push_num(&mut line, z.re);
            push_num(&mut line, z.im);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Sample coordinates followed by the entries of `M`.
pub fn samples_csv(res: &LinearizationResult) -> String {
    let Some(first) = res.samples.first() else {
        return String::new();
    };
    let (n, m) = (first.x.len(), first.m.nrows());
    let mut out = String::new();
    for k in 0..n {
        let _ = write!(out, "{}x{k}_re,x{k}_im", if k == 0 { "" } else { "," });
    }
    out.push_str(&matrix_header("m", m, m));
    out.push('\n');
    for s in &res.samples {
        let mut line = String::new();
        for (k, z) in s.x.iter().enumerate() {
            let _ = write!(line, "{}{:.16e},{:.16e}", if k == 0 { "" } else { "," }, z.re, z.im);
        }
        push_matrix(&mut line, &s.m);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::vec_re;
    use crate::semicocycle::evolve;

    #[test]
    fn csv_layout() {
        let sc = builtin("examp-uniq", None).unwrap();
        let p = evolve(&sc.semigroup, &sc.semicocycle, &vec_re(&[0.3]), &[0.0, 1.0], &sc.tolerances).unwrap();
        let c = cocycle_csv(&p);
        let lines: Vec<&str> = c.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 1 + 8);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
        let f = flow_csv(&p);
        assert_eq!(f.lines().next().unwrap(), "t,x0_re,x0_im");
    }

    #[test]
    fn examp_uniq_report() {
        let sc = builtin("examp-uniq", None).unwrap();
        let rep = run_pipeline(
            &sc,
            &RunOptions {
                timing: false,
                full: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.exit_code(), 0, "{:?}", rep.checks);
        assert_eq!(rep.spectra.resonant_k, Some(vec![1]));
        assert!(rep.timing.is_none());
        let json = rep.to_json();
        assert!(json.contains("\"method\": \"naive\""));
    }
}
