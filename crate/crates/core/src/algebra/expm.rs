use super::{all_finite_mat, is_diagonal, op_norm, CMatrix, NormKind, C64};
use crate::error::{Error, Result};

const PADE_ORDER: usize = 8;
const SCALE_THRESHOLD: f64 = 0.5;

fn pade_coefficients() -> [f64; PADE_ORDER + 1] {
    let q = PADE_ORDER as f64;
    let mut c = [0.0; PADE_ORDER + 1];
    c[0] = 1.0;
    for k in 1..=PADE_ORDER {
        let kf = k as f64;
        c[k] = c[k - 1] * (q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0));
    }
    c
}

/// `exp(t·a)` by scaling and squaring with a diagonal Padé approximant.
///
/// The argument is halved until its max-row-sum norm is at most 0.5, the
/// [8/8] approximant is applied and the result squared back. Diagonal
/// inputs are exponentiated entrywise.
pub fn mat_exp(a: &CMatrix, t: f64) -> Result<CMatrix> {
    mat_exp_with(a, t)
}

pub fn mat_exp_with(a: &CMatrix, t: f64) -> Result<CMatrix> {
    if !t.is_finite() {
        return Err(Error::NonFinite("mat_exp time"));
    }
    super::check_matrix(a, "mat_exp argument")?;
    let n = a.nrows();
    if t == 0.0 {
        return Ok(CMatrix::identity(n, n));
    }
    let x = a * C64::new(t, 0.0);
    let norm = op_norm(&x, NormKind::Sup);
    if is_diagonal(&x) {
        let out = CMatrix::from_diagonal(&x.diagonal().map(|z| z.exp()));
        return finite_or_overflow(out, norm);
    }

    let mut s = 0i32;
    let mut scaled_norm = norm;
    while scaled_norm > SCALE_THRESHOLD {
        scaled_norm *= 0.5;
        s += 1;
    }
    let x = x * C64::new(0.5f64.powi(s), 0.0);

    let coef = pade_coefficients();
    let ident = CMatrix::identity(n, n);
    let mut num = ident.clone() * C64::new(coef[0], 0.0);
    let mut den = num.clone();
    let mut power = ident;
    for (k, &ck) in coef.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = &power * C64::new(ck, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or(Error::Overflow { magnitude: norm })?;
    for _ in 0..s {
        r = &r * &r;
        if !all_finite_mat(&r) {
            return Err(Error::Overflow { magnitude: norm });
        }
    }
    finite_or_overflow(r, norm)
}

fn finite_or_overflow(m: CMatrix, norm: f64) -> Result<CMatrix> {
    if all_finite_mat(&m) {
        Ok(m)
    } else {
        Err(Error::Overflow { magnitude: norm })
    }
}
