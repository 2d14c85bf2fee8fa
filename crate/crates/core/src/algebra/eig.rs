//! Complex Schur decomposition: Householder reduction to upper-Hessenberg
//! form followed by single-shift QR sweeps with Wilkinson shifts.

use super::{is_upper_triangular, CMatrix, C64, ZERO};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DIM: usize = 32;
const ITERS_PER_EIGENVALUE: usize = 60;

/// `a = q · t · qᴴ` with `q` unitary and `t` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: CMatrix,
    pub t: CMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal().iter().copied().collect()
    }
}

/// Eigenvalues with multiplicity. Triangular inputs are read off the diagonal.
pub fn spectrum(a: &CMatrix) -> Result<Vec<C64>> {
    spectrum_with(a, DEFAULT_MAX_DIM)
}

pub fn spectrum_with(a: &CMatrix, max_dim: usize) -> Result<Vec<C64>> {
    super::check_matrix(a, "spectrum argument")?;
    if a.nrows() > max_dim {
        return Err(Error::TooLarge {
            dim: a.nrows(),
            max: max_dim,
        });
    }
    if is_upper_triangular(a) || is_upper_triangular(&a.transpose()) {
        return Ok(a.diagonal().iter().copied().collect());
    }
    Ok(schur(a)?.eigenvalues())
}

pub fn schur(a: &CMatrix) -> Result<Schur> {
    super::check_matrix(a, "schur argument")?;
    let n = a.nrows();
    if is_upper_triangular(a) {
        return Ok(Schur {
            q: CMatrix::identity(n, n),
            t: a.clone(),
        });
    }
    let (mut h, mut q) = hessenberg(a);
    qr_iterate(&mut h, &mut q)?;
    // clean the strictly lower part left by rounding
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t: h })
}

/// Householder reduction `a = q · h · qᴴ`.
fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut v: Vec<C64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() > 0.0 {
            v[0] / v[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // h <- (I - 2 v vᴴ) h on rows k+1..n
        for j in 0..n {
            let mut s = ZERO;
            for i in 0..len {
                s += v[i].conj() * h[(k + 1 + i, j)];
            }
            s *= 2.0;
            for i in 0..len {
                h[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // h <- h (I - 2 v vᴴ) and q <- q (I - 2 v vᴴ) on columns k+1..n
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = ZERO;
                for jj in 0..len {
                    s += m[(i, k + 1 + jj)] * v[jj];
                }
                s *= 2.0;
                for jj in 0..len {
                    m[(i, k + 1 + jj)] -= s * v[jj].conj();
                }
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

/// Unitary rotation `[[c, s], [-s̄, c]]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, b.conj() / b.norm());
    }
    let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / rho;
    let s = (a / a.norm()) * b.conj() / rho;
    (c, s)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mu1 = (a + d) * 0.5 + disc;
    let mu2 = (a + d) * 0.5 - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn qr_iterate(h: &mut CMatrix, q: &mut CMatrix) -> Result<()> {
    let n = h.nrows();
    if n < 2 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let max_iter = ITERS_PER_EIGENVALUE * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= eps * diag || sub <= eps * eps * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence { iterations: total });
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = ZERO;
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            let last = (k + 2).min(hi);
            for i in 0..=last {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = q[(i, k)];
                let y = q[(i, k + 1)];
                q[(i, k)] = x * c + y * s.conj();
                q[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(())
}
