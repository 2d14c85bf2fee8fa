//! Degree-by-degree solution of `M'(x)[f(x)] = B₀M(x) − M(x)B(x)` when
//! `f'(x₀) = −ω·1`. With `z = x − x₀` the degree-`k` coefficients solve
//!
//! ```text
//! (B₀ + kω)M_α − M_α B₀ = [Σ_{j<k} M_j B_{k−j} + Σ_{1≤j<k} M_j'[f_{k−j+1}]]_α
//! ```

use super::limit::fill_spectra;
use super::verify::{verify_cohomology, DEFAULT_T_GRID};
use super::{ConvergenceVerdict, LinearizationResult, Method, SampleValue, Status};
use crate::algebra::{op_norm, spectrum, sylvester_solve, CMatrix, CVector, MapExpr, MultiIndex, Poly, C64};
use crate::dynamics::SemigroupSpec;
use crate::error::{Error, Result};
use crate::semicocycle::{GammaTree, SemicocycleSpec};
use crate::spectra::{resonance, scalar_rate};
use crate::tolerances::Tolerances;

fn centered_series(map: &MapExpr, x0: &CVector, deg: u32) -> Result<Poly> {
    if map.center() != *x0 {
        return Err(Error::Precondition("series expansion needs maps centered at x0".into()));
    }
    map.taylor(deg)
}

/// Taylor series of the generator `B(x₀ + z)` through degree `deg`.
pub fn generator_series(base: &SemigroupSpec, tree: &GammaTree, deg: u32) -> Result<Poly> {
    let x0 = &base.x0;
    match tree {
        GammaTree::Constant { b0 } => Ok(Poly::constant(base.dim, b0.clone())),
        GammaTree::Generated { b } => centered_series(b, x0, deg),
        GammaTree::Gauge { m, inner } => {
            let g = centered_series(m, x0, deg)?;
            let f = centered_series(&base.generator_f, x0, deg)?;
            let g_inv = g.inverse_series(deg)?;
            let inner = generator_series(base, inner, deg)?;
            Ok(g_inv.mul(&inner.mul(&g, deg).sub(&g.directional(&f, deg)), deg))
        }
    }
}

fn resonant_pair(b0: &CMatrix, k: u32, omega: f64) -> Result<(C64, C64)> {
    let eig = spectrum(b0)?;
    let shift = C64::new(k as f64 * omega, 0.0);
    let mut best = (f64::INFINITY, eig[0], eig[0]);
    for p in &eig {
        for q in &eig {
            let gap = (*p + shift - *q).norm();
            if gap < best.0 {
                best = (gap, *p + shift, *q);
            }
        }
    }
    Ok((best.1, best.2))
}

/// The series of `M` through `max_degree`, with `M(x₀) = 1`.
pub fn taylor_series(base: &SemigroupSpec, spec: &SemicocycleSpec, max_degree: u32, tol: &Tolerances) -> Result<Poly> {
    let omega = scalar_rate(&base.linear_part()?, tol.res_tol.max(tol.spec_tol))?;
    let b0 = spec.b0();
    let report = resonance(b0, omega, tol.res_tol)?;
    if let Some(&k) = report.resonant_k.iter().find(|&&k| k <= max_degree) {
        let (p, q) = resonant_pair(b0, k, omega)?;
        return Err(Error::ResonantDegree { degree: k as usize, p, q });
    }
    let (n, m) = (base.dim, spec.algebra_dim());
    let bs = generator_series(base, &spec.gamma, max_degree)?;
    let fs = centered_series(&base.generator_f, &base.x0, max_degree)?;
    let b_hom: Vec<Poly> = (0..=max_degree).map(|k| bs.homogeneous(k)).collect();
    let f_hom: Vec<Poly> = (0..=max_degree).map(|k| fs.homogeneous(k)).collect();
    let mut parts: Vec<Poly> = vec![Poly::constant(n, CMatrix::identity(m, m))];
    for k in 1..=max_degree {
        let mut rhs = Poly::zero(n, m, m);
        for j in 0..k {
            rhs = rhs.add(&parts[j as usize].mul(&b_hom[(k - j) as usize], k));
        }
        for j in 1..k {
            rhs = rhs.add(&parts[j as usize].directional(&f_hom[(k - j + 1) as usize], k));
        }
        let rhs = rhs.homogeneous(k);
        let p = b0 + CMatrix::identity(m, m) * C64::new(k as f64 * omega, 0.0);
        let mut part = Poly::zero(n, m, m);
        for alpha in MultiIndex::of_degree(n, k) {
            let r = rhs.coefficient(&alpha);
            let x = sylvester_solve(&p, b0, &r, tol.syl_tol).map_err(|e| match e {
                Error::ResonantSylvester { p, q } => Error::ResonantDegree { degree: k as usize, p, q },
                other => other,
            })?;
            part.add_term(alpha, x);
        }
        parts.push(part);
    }
    Ok(parts.iter().fold(Poly::zero(n, m, m), |acc, p| acc.add(p)))
}

/// Truncated Taylor linearization, checked by `verify_cohomology` on the samples.
pub fn taylor_linearize(
    base: &SemigroupSpec,
    spec: &SemicocycleSpec,
    max_degree: u32,
    samples: &[CVector],
    tol: &Tolerances,
) -> Result<LinearizationResult> {
    let series = taylor_series(base, spec, max_degree, tol)?;
    let last = series.homogeneous(max_degree);
    let m_fit = MapExpr::polynomial(series).with_center(base.x0.clone());
    let mut values = Vec::with_capacity(samples.len());
    let mut tail = 0.0f64;
    let mut radius = 0.0f64;
    for x in samples {
        let z = x - &base.x0;
        values.push(SampleValue {
            x: x.clone(),
            m: m_fit.eval(x)?,
        });
        tail = tail.max(op_norm(&last.eval(&z), base.norm));
        radius = radius.max(base.norm_of(&z));
    }
    let residual = verify_cohomology(base, spec, &m_fit, spec.b0(), samples, &DEFAULT_T_GRID, tol)?;
    let bound = tol.taylor_tol * radius.powi(max_degree as i32 + 1);
    let mut res = LinearizationResult {
        method: Method::Taylor,
        verdict: ConvergenceVerdict {
            status: Status::Converged,
            t_reached: 0.0,
            cauchy_tail: tail,
            witness: None,
        },
        b0: spec.b0().clone(),
        ell: None,
        resonant_k: None,
        cohomology_residual: Some(residual),
        integral_l: None,
        corrector: None,
        m_fit: Some(m_fit),
        samples: values,
        notes: vec![format!(
            "truncation bound taylor_tol*r^{} = {bound:.3e} at r = {radius:.3}: {}",
            max_degree + 1,
            if residual <= bound { "met" } else { "exceeded" }
        )],
    };
    fill_spectra(&mut res, base, tol)?;
    Ok(res)
}
