//! The base semigroup: flow of the generator `f`, its linear part at the
//! fixed point, attraction (condition (*)) and strict-inside checks.
//!
//! The flow is integrated for the offset `w = F_t(x) − x₀` under relative
//! error control, so trajectories keep full relative accuracy while they
//! approach the fixed point.

use serde::{Deserialize, Serialize};

use crate::algebra::{serde_complex, CMatrix, CVector, MapExpr, NormKind, C64};
use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::spectra;
use crate::tolerances::Tolerances;

/// Absolute error floor for flow components; control is effectively relative.
pub(crate) const FLOW_ATOL: f64 = 1e-300;

/// Number of mesh points used by [`SemigroupSpec::inside_check`].
const INSIDE_MESH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSpec {
    pub dim: usize,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(with = "serde_complex::vector")]
    pub x0: CVector,
    pub sample_radius: f64,
    pub generator_f: MapExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarReport {
    pub verdict: StarVerdict,
    pub kappa_plus: f64,
    /// Largest `‖F_{t_max}(x) − x₀‖` over the grid (absent when not computed).
    pub max_distance: Option<f64>,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsideReport {
    pub inside: bool,
    /// `1 − sup ‖F_t(x)‖` over grid and mesh.
    pub margin: f64,
    /// First sample that left the ball, with the escape time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<(Vec<[f64; 2]>, f64)>,
}

impl SemigroupSpec {
    pub fn new(norm: NormKind, x0: CVector, sample_radius: f64, generator_f: MapExpr) -> Self {
        Self {
            dim: x0.len(),
            norm,
            generator_f: generator_f.centered_default(&x0),
            x0,
            sample_radius,
        }
    }

    /// Centers the generator at `x₀` and checks the structural invariants.
    pub fn prepared(mut self, tol: &Tolerances) -> Result<Self> {
        if self.dim == 0 || self.x0.len() != self.dim {
            return Err(Error::Scenario(format!(
                "semigroup dim {} does not match x0 of length {}",
                self.dim,
                self.x0.len()
            )));
        }
        crate::algebra::check_vector(&self.x0, "x0")?;
        if !(self.sample_radius > 0.0 && self.sample_radius < 1.0) {
            return Err(Error::Scenario(format!(
                "sample_radius {} must lie in (0, 1)",
                self.sample_radius
            )));
        }
        let f = &self.generator_f;
        if f.input_dim() != self.dim || f.shape().rows != self.dim || !f.shape().is_vector() {
            return Err(Error::Scenario(
                "generator_f must map the base space to itself".into(),
            ));
        }
        if self.norm.vector(&self.x0) >= 1.0 {
            return Err(Error::Scenario("x0 must lie in the open unit ball".into()));
        }
        self.generator_f = self
            .generator_f
            .centered_default(&self.x0)
            .with_denom_floor(tol.denom_floor);
        let fx0 = self.norm.vector(&self.generator_f.eval_vec(&self.x0)?);
        if fx0 > tol.fp_tol {
            return Err(Error::Scenario(format!(
                "x0 is not a null point of f (|f(x0)| = {fx0:.3e})"
            )));
        }
        Ok(self)
    }

    pub fn norm_of(&self, x: &CVector) -> f64 {
        self.norm.vector(x)
    }

    /// `f(x₀ + w)`.
    pub(crate) fn f_offset(&self, w: &CVector) -> Result<CVector> {
        Ok(self.generator_f.eval_offset(w)?.column(0).into_owned())
    }

    pub(crate) fn escape_check(&self, t: f64, w: &[C64]) -> Result<()> {
        let x = &self.x0 + CVector::from_column_slice(w);
        let nrm = self.norm_of(&x);
        if nrm > 1.0 {
            Err(Error::DomainEscape { t, norm: nrm })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_start(&self, x: &CVector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        crate::algebra::check_vector(x, "flow start")?;
        let nrm = self.norm_of(x);
        if nrm >= 1.0 {
            return Err(Error::DomainEscape { t: 0.0, norm: nrm });
        }
        Ok(())
    }

    /// Error control for a state whose first `dim` components are the flow
    /// offset and whose remaining `extra` components use `ode_tol` both ways.
    pub(crate) fn tolerance(&self, extra: usize, ode_tol: f64) -> Tolerance {
        let mut tol = Tolerance::uniform(self.dim + extra, ode_tol);
        tol.set_block(0..self.dim, FLOW_ATOL, ode_tol);
        tol
    }

    /// `F_t(x)` for each of the non-decreasing `times`.
    pub fn flow_path(&self, x: &CVector, times: &[f64], tol: &Tolerances) -> Result<Vec<CVector>> {
        self.check_start(x)?;
        let w0: Vec<C64> = (x - &self.x0).iter().copied().collect();
        let (states, _) = ode::integrate(
            |_, w, dw| {
                let fw = self.f_offset(&CVector::from_column_slice(w))?;
                dw.copy_from_slice(fw.as_slice());
                Ok(())
            },
            0.0,
            &w0,
            times,
            &self.tolerance(0, tol.ode_tol),
            |t, w| self.escape_check(t, w),
        )?;
        Ok(states
            .into_iter()
            .map(|w| &self.x0 + CVector::from_vec(w))
            .collect())
    }

    pub fn flow(&self, x: &CVector, t: f64, tol: &Tolerances) -> Result<CVector> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Precondition(format!("flow time {t} must be finite and non-negative")));
        }
        Ok(self.flow_path(x, &[t], tol)?.remove(0))
    }

    /// `A = f'(x₀)`.
    pub fn linear_part(&self) -> Result<CMatrix> {
        self.generator_f.jacobian(&self.x0)
    }

    /// Condition (*): spectral attraction plus convergence of the grid to `x₀`.
    pub fn condition_star(&self, grid: &[CVector], t_max: f64, tol: &Tolerances) -> Result<StarReport> {
        let kappa = spectra::kappa_plus(&self.linear_part()?)?;
        // a non-negative index (up to the margin) rules attraction out
        if kappa >= -tol.star_margin {
            return Ok(StarReport {
                verdict: StarVerdict::Fails,
                kappa_plus: kappa,
                max_distance: None,
                t_max,
            });
        }
        let mut max_distance = 0.0f64;
        for x in grid {
            let y = self.flow(x, t_max, tol)?;
            max_distance = max_distance.max(self.norm_of(&(y - &self.x0)));
        }
        let verdict = if kappa < -tol.star_margin && max_distance <= tol.star_conv_tol {
            StarVerdict::Holds
        } else {
            StarVerdict::Inconclusive
        };
        Ok(StarReport {
            verdict,
            kappa_plus: kappa,
            max_distance: Some(max_distance),
            t_max,
        })
    }

    /// Horizon long enough for a contraction at rate `|kappa|` to bring the
    /// sample ball within `star_conv_tol` of `x₀`, with some slack.
    pub fn star_horizon(&self, kappa_plus: f64, tol: &Tolerances) -> f64 {
        if kappa_plus >= 0.0 {
            return 10.0;
        }
        let decades = (self.sample_radius.max(tol.star_conv_tol) / tol.star_conv_tol).ln();
        ((decades + 4.0) / kappa_plus.abs() * 1.5).min(2000.0)
    }

    /// Whether every trajectory from the grid stays within `1 − inside_margin`
    /// on a uniform mesh of `[0, t_max]`.
    pub fn inside_check(&self, grid: &[CVector], t_max: f64, tol: &Tolerances) -> Result<InsideReport> {
        let mesh: Vec<f64> = (0..=INSIDE_MESH)
            .map(|i| t_max * i as f64 / INSIDE_MESH as f64)
            .collect();
        let mut sup = 0.0f64;
        for x in grid {
            match self.flow_path(x, &mesh, tol) {
                Ok(path) => {
                    for y in &path {
                        sup = sup.max(self.norm_of(y));
                    }
                }
                Err(Error::DomainEscape { t, norm }) => {
                    return Ok(InsideReport {
                        inside: false,
                        margin: 1.0 - norm,
                        escape: Some((serde_complex::vec_pairs(x), t)),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(InsideReport {
            inside: sup <= 1.0 - tol.inside_margin,
            margin: 1.0 - sup,
            escape: None,
        })
    }
}

/// `(F_h(x) − x)/h` extrapolated over `h ∈ {h0, h0/2, h0/4}`.
pub fn generator_estimate<F>(flow: F, x: &CVector, h0: f64) -> Result<CVector>
where
    F: Fn(&CVector, f64) -> Result<CVector>,
{
    let quotient = |h: f64| -> Result<CVector> { Ok((flow(x, h)? - x) / C64::new(h, 0.0)) };
    let d0 = quotient(h0)?;
    let d1 = quotient(h0 / 2.0)?;
    let d2 = quotient(h0 / 4.0)?;
    // forward differences carry an error series in h, h², ...
    let r0 = &d1 * C64::new(2.0, 0.0) - &d0;
    let r1 = &d2 * C64::new(2.0, 0.0) - &d1;
    Ok((r1 * C64::new(4.0, 0.0) - r0) / C64::new(3.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{diag_re, mat_re, vec_re, MultiIndex, Poly, ONE, ZERO};
    use proptest::prelude::*;

    fn linear(a: CMatrix, norm: NormKind) -> SemigroupSpec {
        let n = a.nrows();
        SemigroupSpec::new(norm, CVector::zeros(n), 0.5, MapExpr::linear(&a))
            .prepared(&Tolerances::default())
            .unwrap()
    }

    fn quadratic() -> SemigroupSpec {
        // f(x) = (−x₁ + x₂², −x₂)
        let mut p = Poly::linear(&diag_re(&[-1.0, -1.0]));
        p.add_term(MultiIndex::new(vec![0, 2]), CMatrix::from_column_slice(2, 1, &[ONE, ZERO]));
        SemigroupSpec::new(NormKind::Spectral, CVector::zeros(2), 0.5, MapExpr::polynomial(p))
            .prepared(&Tolerances::default())
            .unwrap()
    }

    fn rates(n: usize) -> CMatrix {
        diag_re(&(1..=n).map(|k| -1.0 / k as f64).collect::<Vec<_>>())
    }

    #[test]
    fn contraction_halves() {
        let s = linear(diag_re(&[-1.0]), NormKind::Spectral);
        let y = s.flow(&vec_re(&[0.5]), 2f64.ln(), &Tolerances::default()).unwrap();
        assert!((y[0].re - 0.25).abs() < 1e-10);
        let y = s.flow(&vec_re(&[0.0]), 7.0, &Tolerances::default()).unwrap();
        assert_eq!(y[0], ZERO);
    }

    #[test]
    fn diagonal_rates() {
        let s = linear(rates(3), NormKind::Sup);
        let y = s.flow(&vec_re(&[0.5, 0.5, 0.5]), 1.0, &Tolerances::default()).unwrap();
        for k in 0..3 {
            let expect = 0.5 * (-1.0 / (k as f64 + 1.0)).exp();
            assert!((y[k].re - expect).abs() < 1e-10 * expect.max(1.0));
        }
    }

    #[test]
    fn linear_parts() {
        assert_eq!(linear(diag_re(&[-1.0, -1.0]), NormKind::Spectral).linear_part().unwrap(), diag_re(&[-1.0, -1.0]));
        assert_eq!(linear(diag_re(&[-1.0, -0.5]), NormKind::Spectral).linear_part().unwrap(), diag_re(&[-1.0, -0.5]));
        assert_eq!(quadratic().linear_part().unwrap(), diag_re(&[-1.0, -1.0]));
    }

    #[test]
    fn star_condition_cases() {
        let tol = Tolerances::default();
        let grid = vec![vec_re(&[0.3, 0.2]), vec_re(&[-0.1, 0.4])];
        let s = linear(diag_re(&[-1.0, -1.0]), NormKind::Spectral);
        let r = s.condition_star(&grid, 20.0, &tol).unwrap();
        assert_eq!(r.verdict, StarVerdict::Holds);
        assert_eq!(r.kappa_plus, -1.0);

        let rot = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(0.0, 1.0)]));
        let s = linear(rot, NormKind::Spectral);
        assert_eq!(s.condition_star(&grid, 20.0, &tol).unwrap().verdict, StarVerdict::Fails);

        let s = linear(rates(5), NormKind::Sup);
        let grid5 = vec![CVector::from_element(5, C64::new(0.4, 0.0))];
        let r = s.condition_star(&grid5, s.star_horizon(-0.2, &tol), &tol).unwrap();
        assert_eq!(r.verdict, StarVerdict::Holds);
        assert!((r.kappa_plus + 0.2).abs() < 1e-15);
    }

    #[test]
    fn inside_cases() {
        let tol = Tolerances::default();
        let s = linear(diag_re(&[-1.0]), NormKind::Spectral);
        let r = s.inside_check(&[vec_re(&[0.5]), vec_re(&[-0.3])], 10.0, &tol).unwrap();
        assert!(r.inside && r.margin >= 0.5);

        let s = linear(diag_re(&[0.0]), NormKind::Spectral);
        assert!(s.inside_check(&[vec_re(&[0.9])], 3.0, &tol).unwrap().inside);

        let s = linear(diag_re(&[1.0]), NormKind::Spectral);
        let r = s.inside_check(&[vec_re(&[0.9])], 5.0, &tol).unwrap();
        assert!(!r.inside);
        let (_, t) = r.escape.unwrap();
        assert!((t - (1.0f64 / 0.9).ln()).abs() < 0.05);
    }

    #[test]
    fn generator_from_closed_forms() {
        let decay = |x: &CVector, t: f64| Ok(x * C64::new((-t).exp(), 0.0));
        let g = generator_estimate(decay, &vec_re(&[0.3]), 1e-3).unwrap();
        assert!((g[0].re + 0.3).abs() < 1e-9);
        let g = generator_estimate(decay, &vec_re(&[0.0]), 1e-3).unwrap();
        assert_eq!(g[0], ZERO);
        let rates = |x: &CVector, t: f64| {
            Ok(CVector::from_fn(x.len(), |k, _| x[k] * (-t / (k as f64 + 1.0)).exp()))
        };
        let g = generator_estimate(rates, &vec_re(&[0.2, 0.2]), 1e-3).unwrap();
        assert!((g[0].re + 0.2).abs() < 1e-9 && (g[1].re + 0.1).abs() < 1e-9);
    }

    #[test]
    fn generator_from_integrated_flow() {
        let tol = Tolerances::default();
        let s = quadratic();
        let x = vec_re(&[0.2, -0.3]);
        let g = generator_estimate(|x, t| s.flow(x, t, &tol), &x, 1e-3).unwrap();
        let f = s.generator_f.eval_vec(&x).unwrap();
        assert!(s.norm_of(&(g - f)) <= tol.gen_tol);
    }

    #[test]
    fn rejects_bad_fixed_point() {
        let mut p = Poly::linear(&diag_re(&[-1.0]));
        p.add_term(MultiIndex::new(vec![0]), CMatrix::from_element(1, 1, C64::new(1e-3, 0.0)));
        let r = SemigroupSpec::new(NormKind::Spectral, CVector::zeros(1), 0.5, MapExpr::polynomial(p))
            .prepared(&Tolerances::default());
        assert!(matches!(r, Err(Error::Scenario(_))));
    }

    fn arb_field() -> impl Strategy<Value = SemigroupSpec> {
        // f(x) = A x + q(x) with A = −(a I + small), q quadratic and small
        (0.5f64..2.0, proptest::collection::vec(-0.2f64..0.2, 4), proptest::collection::vec(-0.3f64..0.3, 6))
            .prop_map(|(a, off, quad)| {
                let lin = mat_re(2, &[-a + off[0], off[1], off[2], -a + off[3]]);
                let mut p = Poly::linear(&lin);
                let alphas = [[2, 0], [1, 1], [0, 2]];
                for (k, al) in alphas.iter().enumerate() {
                    p.add_term(
                        MultiIndex::new(al.to_vec()),
                        CMatrix::from_column_slice(2, 1, &[C64::new(quad[2 * k], 0.0), C64::new(quad[2 * k + 1], 0.0)]),
                    );
                }
                SemigroupSpec::new(NormKind::Spectral, CVector::zeros(2), 0.5, MapExpr::polynomial(p))
                    .prepared(&Tolerances::default())
                    .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn semigroup_law(s in arb_field(), x in (-0.3f64..0.3, -0.3f64..0.3), t in 0.0f64..3.0, u in 0.0f64..3.0) {
            let tol = Tolerances::default();
            let x = vec_re(&[x.0, x.1]);
            let direct = s.flow(&x, t + u, &tol).unwrap();
            let composed = s.flow(&s.flow(&x, u, &tol).unwrap(), t, &tol).unwrap();
            prop_assert!(s.norm_of(&(direct - composed)) <= 10.0 * tol.ode_tol * (1.0 + t + u));
        }

        #[test]
        fn fixed_point_stays(s in arb_field(), t in 0.0f64..50.0) {
            let tol = Tolerances::default();
            let y = s.flow(&s.x0, t, &tol).unwrap();
            prop_assert!(s.norm_of(&(y - &s.x0)) <= tol.ode_tol);
        }
    }
}
