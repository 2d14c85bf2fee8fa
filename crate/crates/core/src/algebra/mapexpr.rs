//! Evaluable holomorphic maps: polynomials, rational maps with a common
//! scalar denominator, and `exp(P)·R` with scalar `P`. Coefficients live in
//! coordinates centered at a base point (the scenario's fixed point).

use serde::{Deserialize, Serialize};

use super::poly::{MultiIndex, Poly};
use super::{CMatrix, CVector, C64};
use crate::error::{Error, Result};

pub const DEFAULT_DENOM_FLOOR: f64 = 1e-12;

/// Output is `rows × cols`; vector-valued maps have one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputShape {
    pub rows: usize,
    pub cols: usize,
}

impl OutputShape {
    pub fn vector(n: usize) -> Self {
        Self { rows: n, cols: 1 }
    }

    pub fn matrix(n: usize) -> Self {
        Self { rows: n, cols: n }
    }

    pub fn is_vector(&self) -> bool {
        self.cols == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Polynomial(Poly),
    Rational { num: Poly, den: Poly },
    ExpPoly { exponent: Poly, factor: Box<Body> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapJson", into = "MapJson")]
pub struct MapExpr {
    input_dim: usize,
    shape: OutputShape,
    center: Option<CVector>,
    body: Body,
    denom_floor: f64,
}

fn expm1(w: C64) -> C64 {
    let ea = w.re.exp_m1();
    let (s, c) = w.im.sin_cos();
    let half = (0.5 * w.im).sin();
    C64::new(ea * c - 2.0 * half * half, (ea + 1.0) * s)
}

fn scalar_of(m: &CMatrix) -> C64 {
    m[(0, 0)]
}

impl Body {
    fn value(&self, z: &CVector, floor: f64) -> Result<CMatrix> {
        match self {
            Body::Polynomial(p) => Ok(p.eval(z)),
            Body::Rational { num, den } => {
                let d = scalar_of(&den.eval(z));
                if d.norm() < floor {
                    return Err(Error::NearPole { modulus: d.norm() });
                }
                Ok(num.eval(z) / d)
            }
            Body::ExpPoly { exponent, factor } => {
                let e = scalar_of(&exponent.eval(z)).exp();
                Ok(factor.value(z, floor)? * e)
            }
        }
    }

    /// `value(z) − value(0)` without forming the difference of two values.
    fn deviation(&self, z: &CVector, floor: f64) -> Result<CMatrix> {
        match self {
            Body::Polynomial(p) => Ok(p.eval_nonconstant(z)),
            Body::Rational { num, den } => {
                let d0 = scalar_of(&den.constant_term());
                let dd = scalar_of(&den.eval_nonconstant(z));
                let d = d0 + dd;
                if d.norm() < floor || d0.norm() < floor {
                    return Err(Error::NearPole {
                        modulus: d.norm().min(d0.norm()),
                    });
                }
                let dn = num.eval_nonconstant(z);
                let n0 = num.constant_term();
                Ok((dn * d0 - n0 * dd) / (d * d0))
            }
            Body::ExpPoly { exponent, factor } => {
                let p0 = scalar_of(&exponent.constant_term());
                let dp = scalar_of(&exponent.eval_nonconstant(z));
                let r = factor.value(z, floor)?;
                let dr = factor.deviation(z, floor)?;
                Ok((r * expm1(dp) + dr) * p0.exp())
            }
        }
    }

    fn dderiv(&self, z: &CVector, h: &CVector, floor: f64) -> Result<CMatrix> {
        match self {
            Body::Polynomial(p) => Ok(p.dderiv(z, h)),
            Body::Rational { num, den } => {
                let d = scalar_of(&den.eval(z));
                if d.norm() < floor {
                    return Err(Error::NearPole { modulus: d.norm() });
                }
                let dd = scalar_of(&den.dderiv(z, h));
                Ok((num.dderiv(z, h) * d - num.eval(z) * dd) / (d * d))
            }
            Body::ExpPoly { exponent, factor } => {
                let e = scalar_of(&exponent.eval(z)).exp();
                let dp = scalar_of(&exponent.dderiv(z, h));
                Ok((factor.value(z, floor)? * dp + factor.dderiv(z, h, floor)?) * e)
            }
        }
    }

    fn series(&self, max_deg: u32) -> Result<Poly> {
        match self {
            Body::Polynomial(p) => Ok(p.truncate(max_deg)),
            Body::Rational { num, den } => num.div_scalar_series(den, max_deg),
            Body::ExpPoly { exponent, factor } => {
                let e = exponent.exp_series(max_deg);
                Ok(factor.series(max_deg)?.mul_scalar_series(&e, max_deg))
            }
        }
    }
}

impl MapExpr {
    pub fn polynomial(p: Poly) -> Self {
        let (rows, cols) = p.shape();
        Self {
            input_dim: p.nvars(),
            shape: OutputShape { rows, cols },
            center: None,
            body: Body::Polynomial(p),
            denom_floor: DEFAULT_DENOM_FLOOR,
        }
    }

    /// `num / den` with a scalar (1×1) denominator series.
    pub fn rational(num: Poly, den: Poly) -> Result<Self> {
        if den.shape() != (1, 1) || den.nvars() != num.nvars() {
            return Err(Error::Scenario(
                "rational map needs a scalar denominator in the same variables".into(),
            ));
        }
        let mut m = Self::polynomial(num.clone());
        m.body = Body::Rational { num, den };
        Ok(m)
    }

    /// `exp(exponent) · factor` with a scalar exponent.
    pub fn exp_poly(exponent: Poly, factor: MapExpr) -> Result<Self> {
        if exponent.shape() != (1, 1) || exponent.nvars() != factor.input_dim {
            return Err(Error::Scenario(
                "exponent must be a scalar polynomial in the map's variables".into(),
            ));
        }
        if matches!(factor.body, Body::ExpPoly { .. }) {
            return Err(Error::Scenario("nested exponential factors are not supported".into()));
        }
        Ok(Self {
            body: Body::ExpPoly {
                exponent,
                factor: Box::new(factor.body),
            },
            ..factor
        })
    }

    pub fn constant(input_dim: usize, value: CMatrix) -> Self {
        Self::polynomial(Poly::constant(input_dim, value))
    }

    pub fn identity(input_dim: usize, m: usize) -> Self {
        Self::constant(input_dim, CMatrix::identity(m, m))
    }

    /// Linear vector field `x ↦ a·(x − center)`.
    pub fn linear(a: &CMatrix) -> Self {
        Self::polynomial(Poly::linear(a))
    }

    pub fn with_center(mut self, center: CVector) -> Self {
        self.center = Some(center);
        self
    }

    /// Sets the center if the map does not carry one yet.
    pub fn centered_default(mut self, center: &CVector) -> Self {
        if self.center.is_none() {
            self.center = Some(center.clone());
        }
        self
    }

    pub fn with_denom_floor(mut self, floor: f64) -> Self {
        self.denom_floor = floor;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn shape(&self) -> OutputShape {
        self.shape
    }

    pub fn center(&self) -> CVector {
        self.center
            .clone()
            .unwrap_or_else(|| CVector::zeros(self.input_dim))
    }

    pub fn as_polynomial(&self) -> Option<&Poly> {
        match &self.body {
            Body::Polynomial(p) => Some(p),
            _ => None,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self.body {
            Body::Polynomial(_) => "polynomial",
            Body::Rational { .. } => "rational",
            Body::ExpPoly { .. } => "exp_poly",
        }
    }

    fn offset(&self, x: &CVector) -> Result<CVector> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        super::check_vector(x, "map argument")?;
        Ok(match &self.center {
            Some(c) => x - c,
            None => x.clone(),
        })
    }

    pub fn eval(&self, x: &CVector) -> Result<CMatrix> {
        let z = self.offset(x)?;
        self.body.value(&z, self.denom_floor)
    }

    pub fn eval_vec(&self, x: &CVector) -> Result<CVector> {
        Ok(self.eval(x)?.column(0).into_owned())
    }

    pub fn value_at_center(&self) -> Result<CMatrix> {
        self.body
            .value(&CVector::zeros(self.input_dim), self.denom_floor)
    }

    /// `eval(x) − eval(center)`, accurate even when `x` is very close to the
    /// center.
    pub fn deviation(&self, x: &CVector) -> Result<CMatrix> {
        let z = self.offset(x)?;
        self.body.deviation(&z, self.denom_floor)
    }

    /// Evaluation at `center + z`, without forming that sum.
    pub fn eval_offset(&self, z: &CVector) -> Result<CMatrix> {
        self.body.value(z, self.denom_floor)
    }

    pub fn deviation_offset(&self, z: &CVector) -> Result<CMatrix> {
        self.body.deviation(z, self.denom_floor)
    }

    pub fn dderiv_offset(&self, z: &CVector, h: &CVector) -> Result<CMatrix> {
        self.body.dderiv(z, h, self.denom_floor)
    }

    /// Exact directional derivative `m'(x)[h]` from the coefficients.
    pub fn dderiv(&self, x: &CVector, h: &CVector) -> Result<CMatrix> {
        let z = self.offset(x)?;
        if h.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: h.len(),
            });
        }
        self.body.dderiv(&z, h, self.denom_floor)
    }

    /// Jacobian of a vector-valued map.
    pub fn jacobian(&self, x: &CVector) -> Result<CMatrix> {
        if !self.shape.is_vector() {
            return Err(Error::Precondition("jacobian of a matrix-valued map".into()));
        }
        let n = self.input_dim;
        let mut j = CMatrix::zeros(self.shape.rows, n);
        for i in 0..n {
            let mut e = CVector::zeros(n);
            e[i] = super::ONE;
            j.set_column(i, &self.dderiv(x, &e)?.column(0));
        }
        Ok(j)
    }

    /// Taylor series about the center, truncated at `max_deg`.
    pub fn taylor(&self, max_deg: u32) -> Result<Poly> {
        self.body.series(max_deg)
    }
}

// ---- JSON form ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffJson {
    alpha: Vec<u32>,
    /// Row-major entries.
    value: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum MapJson {
    Polynomial {
        input_dim: usize,
        shape: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<[f64; 2]>>,
        coeffs: Vec<CoeffJson>,
    },
    Rational {
        input_dim: usize,
        shape: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<[f64; 2]>>,
        numerator: Vec<CoeffJson>,
        denominator: Vec<CoeffJson>,
    },
    ExpPoly {
        input_dim: usize,
        shape: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<[f64; 2]>>,
        exponent: Vec<CoeffJson>,
        factor: Box<MapJson>,
    },
}

fn poly_to_json(p: &Poly) -> Vec<CoeffJson> {
    p.terms()
        .map(|(alpha, value)| CoeffJson {
            alpha: alpha.exponents().to_vec(),
            value: (0..value.nrows())
                .flat_map(|i| (0..value.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| [value[(i, j)].re, value[(i, j)].im])
                .collect(),
        })
        .collect()
}

fn poly_from_json(nvars: usize, rows: usize, cols: usize, coeffs: &[CoeffJson]) -> Result<Poly> {
    let mut terms = Vec::with_capacity(coeffs.len());
    for c in coeffs {
        if c.value.len() != rows * cols {
            return Err(Error::Scenario(format!(
                "coefficient {:?} has {} entries, expected {}",
                c.alpha,
                c.value.len(),
                rows * cols
            )));
        }
        let m = CMatrix::from_row_iterator(rows, cols, c.value.iter().map(|[a, b]| C64::new(*a, *b)));
        if !super::all_finite_mat(&m) {
            return Err(Error::NonFinite("map coefficient"));
        }
        terms.push((MultiIndex::new(c.alpha.clone()), m));
    }
    Poly::from_terms(nvars, rows, cols, terms)
        .map_err(|e| Error::Scenario(format!("bad coefficient: {e}")))
}

fn center_json(c: &Option<CVector>) -> Option<Vec<[f64; 2]>> {
    c.as_ref().map(super::serde_complex::vec_pairs)
}

fn body_to_json(input_dim: usize, shape: [usize; 2], center: Option<Vec<[f64; 2]>>, body: &Body) -> MapJson {
    match body {
        Body::Polynomial(p) => MapJson::Polynomial {
            input_dim,
            shape,
            center,
            coeffs: poly_to_json(p),
        },
        Body::Rational { num, den } => MapJson::Rational {
            input_dim,
            shape,
            center,
            numerator: poly_to_json(num),
            denominator: poly_to_json(den),
        },
        Body::ExpPoly { exponent, factor } => MapJson::ExpPoly {
            input_dim,
            shape,
            center,
            exponent: poly_to_json(exponent),
            factor: Box::new(body_to_json(input_dim, shape, None, factor)),
        },
    }
}

impl From<MapExpr> for MapJson {
    fn from(m: MapExpr) -> Self {
        body_to_json(
            m.input_dim,
            [m.shape.rows, m.shape.cols],
            center_json(&m.center),
            &m.body,
        )
    }
}

impl TryFrom<MapJson> for MapExpr {
    type Error = Error;

    fn try_from(j: MapJson) -> Result<Self> {
        let (input_dim, shape, center) = match &j {
            MapJson::Polynomial { input_dim, shape, center, .. }
            | MapJson::Rational { input_dim, shape, center, .. }
            | MapJson::ExpPoly { input_dim, shape, center, .. } => (*input_dim, *shape, center.clone()),
        };
        if input_dim == 0 || shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Scenario("map dimensions must be positive".into()));
        }
        let [rows, cols] = shape;
        let mut m = match j {
            MapJson::Polynomial { coeffs, .. } => {
                MapExpr::polynomial(poly_from_json(input_dim, rows, cols, &coeffs)?)
            }
            MapJson::Rational {
                numerator,
                denominator,
                ..
            } => MapExpr::rational(
                poly_from_json(input_dim, rows, cols, &numerator)?,
                poly_from_json(input_dim, 1, 1, &denominator)?,
            )?,
            MapJson::ExpPoly {
                exponent, factor, ..
            } => {
                let factor = MapExpr::try_from(*factor)?;
                if factor.input_dim != input_dim || factor.shape != (OutputShape { rows, cols }) {
                    return Err(Error::Scenario("exp_poly factor dimensions differ".into()));
                }
                MapExpr::exp_poly(poly_from_json(input_dim, 1, 1, &exponent)?, factor)?
            }
        };
        if let Some(c) = center {
            if c.len() != input_dim {
                return Err(Error::Scenario("map center has the wrong dimension".into()));
            }
            let v = CVector::from_iterator(c.len(), c.iter().map(|[a, b]| C64::new(*a, *b)));
            super::check_vector(&v, "map center")?;
            m.center = Some(v);
        }
        Ok(m)
    }
}
