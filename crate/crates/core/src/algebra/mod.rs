//! Complex linear algebra kernel: dense matrices, operator norms, spectra,
//! matrix exponentials, Sylvester solves and evaluable holomorphic maps.

mod eig;
mod expm;
mod mapexpr;
pub(crate) mod poly;
pub mod serde_complex;
mod sylvester;

pub use eig::{schur, spectrum, Schur};
pub use expm::{mat_exp, mat_exp_with};
pub use mapexpr::{MapExpr, OutputShape};
pub use poly::{MultiIndex, Poly};
pub use sylvester::sylvester_solve;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Norm on the base space and the operator norm it induces on the algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Euclidean vector norm, largest singular value on matrices.
    #[default]
    Spectral,
    /// Max-modulus vector norm, max absolute row sum on matrices.
    Sup,
}

impl NormKind {
    pub fn vector(self, x: &CVector) -> f64 {
        match self {
            NormKind::Spectral => x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            NormKind::Sup => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    pub fn matrix(self, a: &CMatrix) -> f64 {
        op_norm(a, self)
    }
}

/// Operator norm induced by `kind`.
pub fn op_norm(a: &CMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Sup => a
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Spectral => {
            if is_diagonal(a) {
                return a.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
            }
            singular_values(a).iter().copied().fold(0.0, f64::max)
        }
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.clone().singular_values().iter().copied().collect()
}

pub fn min_singular_value(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn is_diagonal(a: &CMatrix) -> bool {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j && a[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

pub fn is_upper_triangular(a: &CMatrix) -> bool {
    for i in 0..a.nrows() {
        for j in 0..i.min(a.ncols()) {
            if a[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

pub fn all_finite_mat(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn all_finite_vec(x: &CVector) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(entries: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

pub fn diag_re(entries: &[f64]) -> CMatrix {
    let v: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
    diag(&v)
}

/// Row-major construction from real entries.
pub fn mat_re(n: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(n, n, entries.iter().map(|&x| re(x)))
}

pub fn vec_re(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&x| re(x)))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .filter(all_finite_mat)
        .ok_or(Error::NonInvertibleGauge {
            min_singular: min_singular_value(a),
        })
}

/// Largest absolute entry difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks a vector for finiteness and positive length.
pub fn check_vector(x: &CVector, what: &'static str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if !all_finite_vec(x) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

pub fn check_matrix(a: &CMatrix, what: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if !all_finite_mat(a) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}
