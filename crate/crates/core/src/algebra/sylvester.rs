use super::{op_norm, schur, CMatrix, NormKind, C64};
use crate::error::{Error, Result};

/// Solves `p·x − x·q = r` by the Bartels–Stewart method on complex Schur forms.
///
/// Fails with `ResonantSylvester` when an eigenvalue of `p` lies within
/// `spec_tol·max(1, |p| + |q|)` of an eigenvalue of `q`.
pub fn sylvester_solve(p: &CMatrix, q: &CMatrix, r: &CMatrix, spec_tol: f64) -> Result<CMatrix> {
    super::check_matrix(p, "sylvester p")?;
    super::check_matrix(q, "sylvester q")?;
    let (n, m) = (p.nrows(), q.nrows());
    if r.nrows() != n || r.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            got: r.nrows() * r.ncols(),
        });
    }
    let scale = (op_norm(p, NormKind::Spectral) + op_norm(q, NormKind::Spectral)).max(1.0);
    let sp = schur(p)?;
    let sq = schur(q)?;
    let (u, t) = (&sp.q, &sp.t);
    let (v, s) = (&sq.q, &sq.t);
    for i in 0..n {
        for j in 0..m {
            if (t[(i, i)] - s[(j, j)]).norm() <= spec_tol * scale {
                return Err(Error::ResonantSylvester {
                    p: t[(i, i)],
                    q: s[(j, j)],
                });
            }
        }
    }
    let f = u.adjoint() * r * v;
    // t·y − y·s = f, column by column since s is upper triangular
    let mut y = CMatrix::zeros(n, m);
    for j in 0..m {
        let mut rhs: Vec<C64> = (0..n).map(|i| f[(i, j)]).collect();
        for k in 0..j {
            let skj = s[(k, j)];
            if skj != C64::new(0.0, 0.0) {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r += y[(i, k)] * skj;
                }
            }
        }
        let sjj = s[(j, j)];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in (i + 1)..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = acc / (t[(i, i)] - sjj);
        }
    }
    Ok(u * y * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::super::{c, diag_re, identity, max_abs_diff};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_multiple() {
        let r = CMatrix::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let x = sylvester_solve(&(identity(2) * c(2.0, 0.0)), &identity(2), &r, 1e-10).unwrap();
        assert!(max_abs_diff(&x, &r) < 1e-15);
    }

    #[test]
    fn diagonal_entrywise_formula() {
        let p = [2.0, 3.0];
        let q = [0.0, 1.0];
        let r = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let x = sylvester_solve(&diag_re(&p), &diag_re(&q), &r, 1e-10).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((x[(i, j)] - c(1.0 / (p[i] - q[j]), 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_spectra_resonant() {
        let r = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(
            sylvester_solve(&identity(2), &identity(2), &r, 1e-10),
            Err(Error::ResonantSylvester { .. })
        ));
    }

    fn arb(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n)
            .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| c(a, b))))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn residual_bound((p, q, r) in (1usize..5).prop_flat_map(|n| (arb(n), arb(n), arb(n)))) {
            if let Ok(x) = sylvester_solve(&p, &q, &r, 1e-10) {
                let res = &p * &x - &x * &q - &r;
                let bound = 1e-10 * (op_norm(&p, NormKind::Spectral) + op_norm(&q, NormKind::Spectral))
                    * op_norm(&x, NormKind::Spectral);
                prop_assert!(op_norm(&res, NormKind::Spectral) <= bound.max(1e-14));
            }
        }
    }
}
