//! Least-squares synthesis of a polynomial corrector `N` with `N(x₀) = 1`.
//!
//! With `N(x₀ + z) = 1 + Σ_α C_α z^α` the corrected rotated value
//! `e^{−tB₀}N(F_t x)Γ_t(x) = v + Σ_α z_t^α E⁻¹C_αE·v` is affine in the
//! unknown coefficients, and `vec(E⁻¹CEv) = ((Ev)ᵀ ⊗ E⁻¹)·vec(C)`. Each pair
//! of times `t₁ < t₂` contributes the rows forcing the two values to agree.

use serde::{Deserialize, Serialize};

use super::limit::{corrected_limit, fill_spectra, require_star, Schedule};
use super::LinearizationResult;
use crate::algebra::{CMatrix, CVector, MapExpr, MultiIndex, Poly, C64};
use crate::dynamics::SemigroupSpec;
use crate::error::{Error, Result};
use crate::semicocycle::{frame, CocycleStepper, SemicocycleSpec};
use crate::spectra::char_ratio;
use crate::tolerances::Tolerances;

pub const DEFAULT_FIT_TIMES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    #[serde(rename = "N")]
    pub n: MapExpr,
    pub degree: u32,
    pub normalization_residual: f64,
    /// Directions left undetermined by the data (non-uniqueness).
    pub null_dim: usize,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorOptions {
    pub degree: u32,
    /// Permit a degree above `⌊ℓ⌋`.
    pub allow_over_cap: bool,
    pub times: Vec<f64>,
}

impl CorrectorOptions {
    pub fn new(degree: u32) -> Self {
        Self {
            degree,
            allow_over_cap: false,
            times: DEFAULT_FIT_TIMES.to_vec(),
        }
    }
}

/// `((Ev)ᵀ ⊗ E⁻¹)`: maps `vec(C)` to `vec(E⁻¹CEv)` (column-major).
fn kron_block(ev: &CMatrix, e_inv: &CMatrix) -> CMatrix {
    let m = e_inv.nrows();
    let mut k = CMatrix::zeros(m * m, m * m);
    for j in 0..m {
        for l in 0..m {
            let s = ev[(l, j)];
            for a in 0..m {
                for b in 0..m {
                    k[(j * m + a, l * m + b)] = s * e_inv[(a, b)];
                }
            }
        }
    }
    k
}

/// Fits the corrector, then audits it with `corrected_limit`; the audit
/// result is returned alongside.
pub fn corrector_fit(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    opts: &CorrectorOptions,
    samples: &[CVector],
    schedule: &Schedule,
    tol: &Tolerances,
) -> Result<(Corrector, LinearizationResult)> {
    require_star(base, samples, tol)?;
    let ell = char_ratio(spec.b0(), &base.linear_part()?, tol.star_margin)?;
    let cap = ell.floor().max(0.0) as u32;
    if opts.degree > cap && !opts.allow_over_cap {
        return Err(Error::Precondition(format!(
            "corrector degree {} exceeds floor(ell) = {cap}",
            opts.degree
        )));
    }
    let mut times = opts.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 || times[0] < 0.0 {
        return Err(Error::Precondition("corrector fit needs at least two non-negative times".into()));
    }
    let (n, m) = (base.dim, spec.algebra_dim());
    let mm = m * m;
    let alphas: Vec<MultiIndex> = (1..=opts.degree).flat_map(|k| MultiIndex::of_degree(n, k)).collect();
    let cols = alphas.len() * mm;

    let mut coeffs: Vec<CMatrix> = Vec::new();
    let mut null_dim = 0;
    if cols > 0 {
        // per sample and time: block row for each alpha, and vec(v)
        let mut blocks: Vec<Vec<(Vec<CMatrix>, CMatrix)>> = Vec::with_capacity(samples.len());
        for x in samples {
            let mut stepper = CocycleStepper::new(base, spec, x, false, tol)?;
            let mut per_time = Vec::with_capacity(times.len());
            for &t in &times {
                let snap = stepper.advance(t)?;
                let (e, e_inv) = frame(spec.b0(), t)?;
                let z = &snap.u - &base.x0;
                let k = kron_block(&(&e * &snap.v), &e_inv);
                let powers = crate::algebra::poly::power_table(&z, opts.degree);
                let row: Vec<CMatrix> = alphas.iter().map(|a| &k * a.monomial(&powers)).collect();
                per_time.push((row, CMatrix::from_column_slice(mm, 1, snap.v.as_slice())));
            }
            blocks.push(per_time);
        }
        let pairs = times.len() * (times.len() - 1) / 2;
        let rows = samples.len() * pairs * mm;
        let mut a = CMatrix::zeros(rows, cols);
        let mut b = CMatrix::zeros(rows, 1);
        let mut r0 = 0;
        for per_time in &blocks {
            for i in 0..times.len() {
                for j in i + 1..times.len() {
                    let (ki, vi) = &per_time[i];
                    let (kj, vj) = &per_time[j];
                    for (c, (bi, bj)) in ki.iter().zip(kj).enumerate() {
                        a.view_mut((r0, c * mm), (mm, mm)).copy_from(&(bj - bi));
                    }
                    b.view_mut((r0, 0), (mm, 1)).copy_from(&(vi - vj));
                    r0 += mm;
                }
            }
        }
        let svd = a.svd(true, true);
        let s = &svd.singular_values;
        let s_max = s.iter().copied().fold(0.0, f64::max);
        let lambda = tol.ridge;
        null_dim = s.iter().filter(|&&si| si <= tol.rank_tol * s_max).count() + cols.saturating_sub(s.len());
        let u = svd.u.as_ref().expect("left singular vectors");
        let v_t = svd.v_t.as_ref().expect("right singular vectors");
        let mut sol = CMatrix::zeros(cols, 1);
        for k in 0..s.len() {
            if s[k] == 0.0 {
                continue;
            }
            let proj = (u.column(k).adjoint() * &b)[(0, 0)];
            let f = s[k] / (s[k] * s[k] + lambda);
            sol += v_t.row(k).adjoint() * (proj * C64::new(f, 0.0));
        }
        coeffs = (0..alphas.len())
            .map(|c| CMatrix::from_column_slice(m, m, &sol.as_slice()[c * mm..(c + 1) * mm]))
            .collect();
    }
    let mut poly = Poly::constant(n, CMatrix::identity(m, m));
    for (alpha, c) in alphas.into_iter().zip(coeffs) {
        poly.add_term(alpha, c);
    }
    let nmap = MapExpr::polynomial(poly).with_center(base.x0.clone());
    let normalization_residual = crate::algebra::max_abs_diff(&nmap.value_at_center()?, &CMatrix::identity(m, m));
    let corrector = Corrector {
        n: nmap,
        degree: opts.degree,
        normalization_residual,
        null_dim,
        rank_deficient: null_dim > 0,
    };
    let mut audit = corrected_limit(base, spec, &corrector.n, samples, schedule, tol)?;
    if !audit.converged() {
        return Err(Error::FitRejected {
            status: format!("{:?}", audit.verdict.status),
        });
    }
    fill_spectra(&mut audit, base, tol)?;
    audit.corrector = Some(corrector.clone());
    if corrector.rank_deficient {
        audit.notes.push(format!("corrector not unique: {null_dim} null direction(s)"));
    }
    Ok((corrector, audit))
}
