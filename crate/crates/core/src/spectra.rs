//! Lyapunov indices, the characteristic ratio and resonance analysis.

use serde::{Deserialize, Serialize};

use crate::algebra::{mat_exp, op_norm, serde_complex, spectrum, CMatrix, NormKind, C64};
use crate::error::{Error, Result};
use crate::fit::line_fit;

pub const DEFAULT_WINDOW: (f64, f64) = (20.0, 60.0);
const EMPIRICAL_POINTS: usize = 41;

/// Largest real part of the spectrum.
pub fn kappa_plus(a: &CMatrix) -> Result<f64> {
    Ok(spectrum(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest real part of the spectrum, defined as `−κ₊(−a)`.
pub fn kappa_minus(a: &CMatrix) -> Result<f64> {
    Ok(-kappa_plus(&(-a))?)
}

fn shift(a: &CMatrix) -> f64 {
    a.trace().re / a.nrows() as f64
}

/// Growth exponent of `‖e^{ta}‖` fitted on `[t_lo, t_hi]`.
pub fn kappa_plus_empirical(a: &CMatrix, window: (f64, f64)) -> Result<f64> {
    let (t_lo, t_hi) = window;
    if !(t_lo >= 0.0 && t_hi > t_lo) {
        return Err(Error::Precondition(format!("bad empirical window {window:?}")));
    }
    // remove the mean real part first so that the exponentials stay in range
    let tau = shift(a);
    let centered = a - CMatrix::identity(a.nrows(), a.nrows()) * C64::new(tau, 0.0);
    let mut ts = Vec::with_capacity(EMPIRICAL_POINTS);
    let mut logs = Vec::with_capacity(EMPIRICAL_POINTS);
    for i in 0..EMPIRICAL_POINTS {
        let t = t_lo + (t_hi - t_lo) * i as f64 / (EMPIRICAL_POINTS - 1) as f64;
        let e = mat_exp(&centered, t)?;
        ts.push(t);
        logs.push(op_norm(&e, NormKind::Spectral).ln());
    }
    let fit = line_fit(&ts, &logs).expect("window has distinct abscissae");
    Ok(fit.slope + tau)
}

pub fn kappa_minus_empirical(a: &CMatrix, window: (f64, f64)) -> Result<f64> {
    Ok(-kappa_plus_empirical(&(-a), window)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMethod {
    Spectral,
    Empirical,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub method: IndexMethod,
    pub empirical_window: (f64, f64),
    /// Largest of the κ₊ and κ₋ discrepancies when both methods ran.
    pub discrepancy: Option<f64>,
}

pub fn lyapunov(a: &CMatrix, method: IndexMethod, window: (f64, f64)) -> Result<LyapunovReport> {
    let spectral = || -> Result<(f64, f64)> { Ok((kappa_plus(a)?, kappa_minus(a)?)) };
    let empirical =
        || -> Result<(f64, f64)> { Ok((kappa_plus_empirical(a, window)?, kappa_minus_empirical(a, window)?)) };
    let ((kp, km), discrepancy) = match method {
        IndexMethod::Spectral => (spectral()?, None),
        IndexMethod::Empirical => (empirical()?, None),
        IndexMethod::Both => {
            let s = spectral()?;
            let e = empirical()?;
            (s, Some((s.0 - e.0).abs().max((s.1 - e.1).abs())))
        }
    };
    Ok(LyapunovReport {
        kappa_plus: kp,
        kappa_minus: km.min(kp),
        method,
        empirical_window: window,
        discrepancy,
    })
}

/// `ℓ = (κ₊(B₀) − κ₋(B₀)) / |κ₊(A)|`.
pub fn char_ratio(b0: &CMatrix, a: &CMatrix, star_margin: f64) -> Result<f64> {
    let ka = kappa_plus(a)?;
    if ka.abs() < star_margin {
        return Err(Error::ZeroDenominator { kappa: ka });
    }
    Ok((kappa_plus(b0)? - kappa_minus(b0)?) / ka.abs())
}

/// `ω` with `A = −ω·I`, or `NotScalarLinearPart`.
pub fn scalar_rate(a: &CMatrix, tol: f64) -> Result<f64> {
    let n = a.nrows();
    let omega = -a.trace().re / n as f64;
    let dev = op_norm(&(a + CMatrix::identity(n, n) * C64::new(omega, 0.0)), NormKind::Spectral);
    if dev > tol {
        return Err(Error::NotScalarLinearPart { deviation: dev });
    }
    if omega <= 0.0 {
        return Err(Error::Precondition(format!(
            "linear part −ω·I needs ω > 0, got ω = {omega}"
        )));
    }
    Ok(omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub omega: f64,
    #[serde(with = "pairs")]
    pub diff_set: Vec<C64>,
    pub resonant_k: Vec<u32>,
    pub k_max_tested: u32,
    pub tolerance: f64,
}

mod pairs {
    use super::*;
    use serde::{Deserializer, Serializer};
    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(serde_complex::pair).collect::<Vec<_>>().serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[a, b]| C64::new(a, b))
            .collect())
    }
}

/// Resonant `k`: `|kω − d| ≤ tol` for some `d ∈ σ(B₀) − σ(B₀)`. Only
/// `k ≤ ⌈width/ω⌉ + 1` can qualify, since `kω` beyond that exceeds every
/// real part in the difference set.
pub fn resonance(b0: &CMatrix, omega: f64, tol: f64) -> Result<ResonanceReport> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Precondition(format!("omega must be positive, got {omega}")));
    }
    let sigma = spectrum(b0)?;
    let mut diff_set: Vec<C64> = Vec::with_capacity(sigma.len() * sigma.len());
    for a in &sigma {
        for b in &sigma {
            let d = a - b;
            if !diff_set.iter().any(|e| (e - d).norm() <= tol) {
                diff_set.push(d);
            }
        }
    }
    let width = kappa_plus(b0)? - kappa_minus(b0)?;
    let k_max = (width / omega).ceil().max(0.0) as u32 + 1;
    let resonant_k = (1..=k_max)
        .filter(|&k| {
            let kw = k as f64 * omega;
            diff_set
                .iter()
                .any(|d| (kw - d.re).abs() <= tol && d.im.abs() <= tol)
        })
        .collect();
    Ok(ResonanceReport {
        omega,
        diff_set,
        resonant_k,
        k_max_tested: k_max,
        tolerance: tol,
    })
}

/// The report's "spectra" block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraBlock {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub kappa_plus_a: f64,
    pub ell: Option<f64>,
    pub omega: Option<f64>,
    pub resonant_k: Option<Vec<u32>>,
    pub k_max_tested: Option<u32>,
    #[serde(with = "serde_complex::matrix")]
    pub b0: CMatrix,
    #[serde(with = "serde_complex::matrix")]
    pub a: CMatrix,
    /// Why `omega`/`resonant_k` are absent, if they are.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn spectra_block(a: &CMatrix, b0: &CMatrix, tol: &crate::Tolerances) -> Result<SpectraBlock> {
    let ell = match char_ratio(b0, a, tol.star_margin) {
        Ok(l) => Some(l),
        Err(Error::ZeroDenominator { .. }) => None,
        Err(e) => return Err(e),
    };
    let (omega, res, note) = match scalar_rate(a, tol.res_tol.max(tol.spec_tol)) {
        Ok(w) => {
            let r = resonance(b0, w, tol.res_tol)?;
            (Some(w), Some(r), None)
        }
        Err(e @ (Error::NotScalarLinearPart { .. } | Error::Precondition(_))) => (None, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(SpectraBlock {
        kappa_plus: kappa_plus(b0)?,
        kappa_minus: kappa_minus(b0)?,
        kappa_plus_a: kappa_plus(a)?,
        ell,
        omega,
        resonant_k: res.as_ref().map(|r| r.resonant_k.clone()),
        k_max_tested: res.as_ref().map(|r| r.k_max_tested),
        b0: b0.clone(),
        a: a.clone(),
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{c, diag_re, mat_re};
    use proptest::prelude::*;

    #[test]
    fn index_examples() {
        let d = diag_re(&[3.0, 1.0]);
        assert_eq!(kappa_plus(&d).unwrap(), 3.0);
        assert_eq!(kappa_minus(&d).unwrap(), 1.0);
        let z = CMatrix::zeros(2, 2);
        assert_eq!(kappa_plus(&z).unwrap(), 0.0);
        assert_eq!(kappa_minus(&z).unwrap(), 0.0);
        let j = mat_re(2, &[1.0, 10.0, 0.0, 1.0]);
        assert_eq!(kappa_plus(&j).unwrap(), 1.0);
        assert_eq!(kappa_minus(&j).unwrap(), 1.0);
        let e = kappa_plus_empirical(&j, DEFAULT_WINDOW).unwrap();
        assert!((e - 1.0).abs() < 5e-2, "{e}");
    }

    #[test]
    fn ratio_examples() {
        let a = diag_re(&[-1.0]);
        assert!((char_ratio(&diag_re(&[3.0, 1.0]), &a, 1e-6).unwrap() - 2.0).abs() < 1e-15);
        assert!((char_ratio(&diag_re(&[1.0, 2.0]), &a, 1e-6).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(char_ratio(&CMatrix::zeros(2, 2), &diag_re(&[-0.3, -2.0]), 1e-6).unwrap(), 0.0);
        assert!(matches!(
            char_ratio(&diag_re(&[1.0]), &diag_re(&[0.0]), 1e-6),
            Err(Error::ZeroDenominator { .. })
        ));
    }

    #[test]
    fn resonance_examples() {
        assert_eq!(resonance(&diag_re(&[3.0, 1.0]), 1.0, 1e-8).unwrap().resonant_k, vec![2]);
        assert_eq!(resonance(&diag_re(&[1.0, 2.0]), 1.0, 1e-8).unwrap().resonant_k, vec![1]);
        assert!(resonance(&diag_re(&[0.3, 0.1]), 1.0, 1e-8).unwrap().resonant_k.is_empty());
        // complex differences never resonate
        let b = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]));
        assert!(resonance(&b, 1.0, 1e-8).unwrap().resonant_k.is_empty());
    }

    #[test]
    fn scalar_rate_checks() {
        assert_eq!(scalar_rate(&diag_re(&[-2.0, -2.0]), 1e-8).unwrap(), 2.0);
        assert!(matches!(
            scalar_rate(&diag_re(&[-1.0, -0.5]), 1e-8),
            Err(Error::NotScalarLinearPart { .. })
        ));
    }

    fn arb(n: usize, scale: f64) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let m = CMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| c(a, b)));
            let s = op_norm(&m, NormKind::Spectral).max(1e-12);
            m * C64::new(scale / s.max(1.0), 0.0)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn minus_is_reflected_plus(a in (1usize..7).prop_flat_map(|n| arb(n, 3.0))) {
            prop_assert_eq!(kappa_minus(&a).unwrap(), -kappa_plus(&(-&a)).unwrap());
        }

        #[test]
        fn width_is_max_real_difference(a in (1usize..7).prop_flat_map(|n| arb(n, 3.0))) {
            let s = spectrum(&a).unwrap();
            let mut w = 0.0f64;
            for x in &s { for y in &s { w = w.max((x - y).re); } }
            let width = kappa_plus(&a).unwrap() - kappa_minus(&a).unwrap();
            prop_assert!((width - w).abs() <= 1e-10 * (1.0 + op_norm(&a, NormKind::Spectral)));
        }

        #[test]
        fn no_resonance_past_bound(a in (1usize..5).prop_flat_map(|n| arb(n, 3.0)), omega in 0.05f64..2.0) {
            let r = resonance(&a, omega, 1e-8).unwrap();
            let s = spectrum(&a).unwrap();
            let maxre = s.iter().flat_map(|x| s.iter().map(move |y| (x - y).re)).fold(0.0, f64::max);
            prop_assert!((r.k_max_tested + 1) as f64 * omega > maxre + 1e-8);
        }

        #[test]
        fn ratio_unitary_invariant(d in proptest::collection::vec(-2.0f64..2.0, 3), theta in 0.0f64..6.28) {
            let b0 = diag_re(&d);
            let (s, co) = theta.sin_cos();
            let u = CMatrix::from_row_slice(3, 3, &[
                c(co, 0.0), c(0.0, s), c(0.0, 0.0),
                c(0.0, s), c(co, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            let rotated = &u * &b0 * u.adjoint();
            let a = diag_re(&[-1.5, -1.5, -1.5]);
            let l1 = char_ratio(&b0, &a, 1e-6).unwrap();
            let l2 = char_ratio(&rotated, &a, 1e-6).unwrap();
            prop_assert!((l1 - l2).abs() <= 1e-10);
        }
    }
}
