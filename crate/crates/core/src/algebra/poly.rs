//! Multivariate polynomials (and truncated power series) with matrix
//! coefficients, in coordinates centered at the fixed point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CMatrix, CVector, C64, ONE, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(nvars: usize) -> Self {
        Self(vec![0; nvars])
    }

    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self − e_i` if the `i`-th exponent is positive.
    pub fn lower(&self, i: usize) -> Option<MultiIndex> {
        if self.0[i] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[i] -= 1;
        Some(MultiIndex(e))
    }

    /// All multi-indices in `nvars` variables with total degree `deg`, in
    /// lexicographic order.
    pub fn of_degree(nvars: usize, deg: u32) -> Vec<MultiIndex> {
        fn rec(nvars: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if cur.len() + 1 == nvars {
                cur.push(left);
                out.push(MultiIndex(cur.clone()));
                cur.pop();
                return;
            }
            for e in (0..=left).rev() {
                cur.push(e);
                rec(nvars, left - e, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if nvars == 0 {
            return out;
        }
        rec(nvars, deg, &mut Vec::with_capacity(nvars), &mut out);
        out
    }

    pub fn monomial(&self, powers: &[Vec<C64>]) -> C64 {
        let mut m = ONE;
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                m *= powers[i][e as usize];
            }
        }
        m
    }
}

/// Table `powers[i][e] = z_i^e` up to `max_exp`.
pub(crate) fn power_table(z: &CVector, max_exp: u32) -> Vec<Vec<C64>> {
    z.iter()
        .map(|&zi| {
            let mut p = Vec::with_capacity(max_exp as usize + 1);
            p.push(ONE);
            for e in 1..=max_exp as usize {
                let prev = p[e - 1];
                p.push(prev * zi);
            }
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<MultiIndex, CMatrix>,
}

impl Poly {
    pub fn zero(nvars: usize, rows: usize, cols: usize) -> Self {
        Self {
            nvars,
            rows,
            cols,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, value: CMatrix) -> Self {
        let mut p = Self::zero(nvars, value.nrows(), value.ncols());
        p.add_term(MultiIndex::zero(nvars), value);
        p
    }

    pub fn scalar_constant(nvars: usize, value: C64) -> Self {
        Self::constant(nvars, CMatrix::from_element(1, 1, value))
    }

    /// Linear vector field `z ↦ a·z`.
    pub fn linear(a: &CMatrix) -> Self {
        let n = a.ncols();
        let mut p = Self::zero(n, a.nrows(), 1);
        for i in 0..n {
            p.add_term(MultiIndex::unit(n, i), CMatrix::from_column_slice(a.nrows(), 1, a.column(i).as_slice()));
        }
        p
    }

    pub fn from_terms(
        nvars: usize,
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (MultiIndex, CMatrix)>,
    ) -> Result<Self> {
        let mut p = Self::zero(nvars, rows, cols);
        for (alpha, value) in terms {
            if alpha.nvars() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    got: alpha.nvars(),
                });
            }
            if value.nrows() != rows || value.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    got: value.nrows() * value.ncols(),
                });
            }
            p.add_term(alpha, value);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CMatrix)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, alpha: MultiIndex, value: CMatrix) {
        debug_assert_eq!(alpha.nvars(), self.nvars);
        match self.terms.get_mut(&alpha) {
            Some(v) => *v += value,
            None => {
                self.terms.insert(alpha, value);
            }
        }
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> CMatrix {
        self.terms
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    pub fn constant_term(&self) -> CMatrix {
        self.coefficient(&MultiIndex::zero(self.nvars))
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(_, v)| v.iter().any(|z| *z != ZERO))
            .map(|(a, _)| a.degree())
            .max()
            .unwrap_or(0)
    }

    fn max_exponent(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|a| a.exponents().iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Value at the centered coordinate `z`.
    pub fn eval(&self, z: &CVector) -> CMatrix {
        self.eval_filtered(z, false)
    }

    /// Value minus the constant term, accumulated without cancellation.
    pub fn eval_nonconstant(&self, z: &CVector) -> CMatrix {
        self.eval_filtered(z, true)
    }

    fn eval_filtered(&self, z: &CVector, skip_constant: bool) -> CMatrix {
        let powers = power_table(z, self.max_exponent());
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            if skip_constant && alpha.is_zero() {
                continue;
            }
            let m = alpha.monomial(&powers);
            out += coef * m;
        }
        out
    }

    /// Exact directional derivative `P'(z)[h]`.
    pub fn dderiv(&self, z: &CVector, h: &CVector) -> CMatrix {
        let powers = power_table(z, self.max_exponent());
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            for i in 0..self.nvars {
                if let Some(lower) = alpha.lower(i) {
                    let m = lower.monomial(&powers) * h[i] * alpha.exponents()[i] as f64;
                    out += coef * m;
                }
            }
        }
        out
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            if let Some(lower) = alpha.lower(i) {
                out.add_term(lower, coef * C64::new(alpha.exponents()[i] as f64, 0.0));
            }
        }
        out
    }

    pub fn homogeneous(&self, deg: u32) -> Poly {
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            if alpha.degree() == deg {
                out.add_term(alpha.clone(), coef.clone());
            }
        }
        out
    }

    pub fn truncate(&self, max_deg: u32) -> Poly {
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            if alpha.degree() <= max_deg {
                out.add_term(alpha.clone(), coef.clone());
            }
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (alpha, coef) in &other.terms {
            out.add_term(alpha.clone(), coef.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Poly {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out
    }

    /// Matrix product of coefficient series, truncated at `max_deg`.
    pub fn mul(&self, other: &Poly, max_deg: u32) -> Poly {
        assert_eq!(self.cols, other.rows, "series product shape mismatch");
        let mut out = Poly::zero(self.nvars, self.rows, other.cols);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.degree() + b.degree() <= max_deg {
                    out.add_term(a.add(b), ca * cb);
                }
            }
        }
        out
    }

    /// Product with a scalar (1×1) series.
    pub fn mul_scalar_series(&self, s: &Poly, max_deg: u32) -> Poly {
        assert_eq!(s.shape(), (1, 1));
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for (a, ca) in &self.terms {
            for (b, cb) in &s.terms {
                if a.degree() + b.degree() <= max_deg {
                    out.add_term(a.add(b), ca * cb[(0, 0)]);
                }
            }
        }
        out
    }

    /// Scalar (1×1) series of the `(i, j)` entry.
    pub fn entry(&self, i: usize, j: usize) -> Poly {
        let mut out = Poly::zero(self.nvars, 1, 1);
        for (alpha, coef) in &self.terms {
            out.add_term(alpha.clone(), CMatrix::from_element(1, 1, coef[(i, j)]));
        }
        out
    }

    /// `Σ_i ∂_i P · g_i` for a vector series `g` (shape `nvars × 1`).
    pub fn directional(&self, g: &Poly, max_deg: u32) -> Poly {
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for i in 0..self.nvars {
            let gi = g.entry(i, 0);
            out = out.add(&self.partial(i).mul_scalar_series(&gi, max_deg));
        }
        out
    }

    /// Series of the inverse of a square series with invertible constant term.
    pub fn inverse_series(&self, max_deg: u32) -> Result<Poly> {
        let p0_inv = super::inverse(&self.constant_term())?;
        let n = self.rows;
        let mut parts: Vec<Poly> = vec![Poly::constant(self.nvars, p0_inv.clone())];
        let pk: Vec<Poly> = (0..=max_deg).map(|k| self.homogeneous(k)).collect();
        for k in 1..=max_deg {
            let mut acc = Poly::zero(self.nvars, n, n);
            for j in 1..=k {
                acc = acc.add(&pk[j as usize].mul(&parts[(k - j) as usize], max_deg));
            }
            let left = Poly::constant(self.nvars, -p0_inv.clone());
            parts.push(left.mul(&acc, max_deg));
        }
        Ok(parts.iter().fold(Poly::zero(self.nvars, n, n), |a, b| a.add(b)))
    }

    /// Series of `exp(p)` for a scalar series `p`.
    pub fn exp_series(&self, max_deg: u32) -> Poly {
        assert_eq!(self.shape(), (1, 1));
        let p0 = self.constant_term()[(0, 0)];
        let pk: Vec<Poly> = (0..=max_deg).map(|k| self.homogeneous(k)).collect();
        let mut parts: Vec<Poly> = vec![Poly::scalar_constant(self.nvars, p0.exp())];
        // k·E_k = Σ_{j=1..k} j·P_j·E_{k−j}  (Euler operator identity)
        for k in 1..=max_deg {
            let mut acc = Poly::zero(self.nvars, 1, 1);
            for j in 1..=k {
                acc = acc.add(&pk[j as usize].mul(&parts[(k - j) as usize], max_deg).scale(C64::new(j as f64, 0.0)));
            }
            parts.push(acc.scale(C64::new(1.0 / k as f64, 0.0)));
        }
        parts.iter().fold(Poly::zero(self.nvars, 1, 1), |a, b| a.add(b))
    }

    /// Series of `self / den` for a scalar series `den` with nonzero constant term.
    pub fn div_scalar_series(&self, den: &Poly, max_deg: u32) -> Result<Poly> {
        assert_eq!(den.shape(), (1, 1));
        let d0 = den.constant_term()[(0, 0)];
        if d0 == ZERO {
            return Err(Error::NearPole { modulus: 0.0 });
        }
        let dk: Vec<Poly> = (0..=max_deg).map(|k| den.homogeneous(k)).collect();
        let mut parts: Vec<Poly> = Vec::new();
        for k in 0..=max_deg {
            let mut acc = self.homogeneous(k);
            for j in 1..=k {
                acc = acc.sub(&parts[(k - j) as usize].mul_scalar_series(&dk[j as usize], max_deg));
            }
            parts.push(acc.scale(ONE / d0));
        }
        Ok(parts
            .iter()
            .fold(Poly::zero(self.nvars, self.rows, self.cols), |a, b| a.add(b)))
    }

    /// Drops coefficients whose largest entry modulus is at most `eps`.
    pub fn pruned(&self, eps: f64) -> Poly {
        let mut out = Poly::zero(self.nvars, self.rows, self.cols);
        for (alpha, coef) in &self.terms {
            if coef.iter().any(|z| z.norm() > eps) {
                out.add_term(alpha.clone(), coef.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::{c, mat_re, max_abs_diff, re, vec_re};
    use super::*;

    fn scalar(nvars: usize, terms: &[(Vec<u32>, f64)]) -> Poly {
        Poly::from_terms(
            nvars,
            1,
            1,
            terms
                .iter()
                .map(|(a, v)| (MultiIndex::new(a.clone()), CMatrix::from_element(1, 1, re(*v)))),
        )
        .unwrap()
    }

    #[test]
    fn degree_enumeration() {
        let d2 = MultiIndex::of_degree(2, 2);
        assert_eq!(d2.len(), 3);
        assert!(d2.iter().all(|a| a.degree() == 2));
        assert_eq!(MultiIndex::of_degree(3, 2).len(), 6);
    }

    #[test]
    fn evaluate_and_differentiate() {
        // x² at 0.3, derivative along 1 is 0.6
        let p = scalar(1, &[(vec![2], 1.0)]);
        let z = vec_re(&[0.3]);
        assert!((p.eval(&z)[(0, 0)] - re(0.09)).norm() < 1e-16);
        assert!((p.dderiv(&z, &vec_re(&[1.0]))[(0, 0)] - re(0.6)).norm() < 1e-16);
    }

    #[test]
    fn inverse_series_of_one_minus_x() {
        // 1/(1 − x) = 1 + x + x² + ...
        let p = scalar(1, &[(vec![0], 1.0), (vec![1], -1.0)]);
        let inv = p.inverse_series(5).unwrap();
        for k in 0..=5 {
            assert!((inv.coefficient(&MultiIndex::new(vec![k]))[(0, 0)] - re(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn exp_series_matches_factorials() {
        // exp(2x + y): coefficient of x^a y^b is 2^a / (a! b!)
        let p = scalar(2, &[(vec![1, 0], 2.0), (vec![0, 1], 1.0)]);
        let e = p.exp_series(4);
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let expect = 2f64.powi(a as i32) / (fact(a) * fact(b));
                let got = e.coefficient(&MultiIndex::new(vec![a, b]))[(0, 0)];
                assert!((got - re(expect)).norm() < 1e-14, "{a} {b}");
            }
        }
    }

    #[test]
    fn division_series() {
        // x / (1 − x²) = x + x³ + x⁵ ...
        let num = scalar(1, &[(vec![1], 1.0)]);
        let den = scalar(1, &[(vec![0], 1.0), (vec![2], -1.0)]);
        let q = num.div_scalar_series(&den, 5).unwrap();
        let expect = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((q.coefficient(&MultiIndex::new(vec![k as u32]))[(0, 0)] - re(*e)).norm() < 1e-15);
        }
    }

    #[test]
    fn matrix_inverse_series_truncates_nilpotent() {
        // [[1, x], [0, 1]]⁻¹ = [[1, −x], [0, 1]]
        let p = Poly::from_terms(
            1,
            2,
            2,
            [
                (MultiIndex::new(vec![0]), CMatrix::identity(2, 2)),
                (MultiIndex::new(vec![1]), mat_re(2, &[0.0, 1.0, 0.0, 0.0])),
            ],
        )
        .unwrap();
        let inv = p.inverse_series(4).unwrap();
        let z = CVector::from_element(1, c(0.3, 0.2));
        let expect = CMatrix::from_row_slice(2, 2, &[ONE, -c(0.3, 0.2), ZERO, ONE]);
        assert!(max_abs_diff(&inv.eval(&z), &expect) < 1e-15);
    }
}
