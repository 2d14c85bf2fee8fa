//! Seeded low-discrepancy sample points in the ball around `x₀`.
//!
//! Each complex coordinate uses two Halton dimensions (modulus via √h, angle),
//! shifted modulo 1 by a ChaCha8 Cranley–Patterson offset. Points fill the
//! polydisk of radius `r`; for the spectral norm the polydisk is shrunk by
//! `1/√n` so it lies in the Euclidean ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{CVector, NormKind, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            radius: 0.5,
            count: 12,
            seed: 1,
        }
    }
}

fn primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut p = 2u64;
    while out.len() < k {
        if out.iter().all(|q| p % q != 0) {
            out.push(p);
        }
        p += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `x₀` followed by `count − 1` shifted Halton points.
pub fn sample_points(x0: &CVector, norm: NormKind, spec: &SampleSpec) -> Result<Vec<CVector>> {
    if !(spec.radius > 0.0 && spec.radius < 1.0) {
        return Err(Error::Precondition(format!("sample radius {} must lie in (0, 1)", spec.radius)));
    }
    let n = x0.len();
    let bases = primes(2 * n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shift: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
    let r = match norm {
        NormKind::Sup => spec.radius,
        NormKind::Spectral => spec.radius / (n as f64).sqrt(),
    };
    let mut out = Vec::with_capacity(spec.count.max(1));
    out.push(x0.clone());
    for i in 1..spec.count as u64 {
        let h = |d: usize| (radical_inverse(i, bases[d]) + shift[d]).fract();
        let z = CVector::from_fn(n, |k, _| C64::from_polar(r * h(2 * k).sqrt(), std::f64::consts::TAU * h(2 * k + 1)));
        out.push(x0 + z);
    }
    Ok(out)
}

/// Real points `x₀ + s·d` on the real segment through `x₀` along `d`.
pub fn real_line(x0: &CVector, dir: &CVector, values: &[f64]) -> Vec<CVector> {
    values.iter().map(|s| x0 + dir * C64::new(*s, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_point_is_center_and_reproducible() {
        let x0 = CVector::zeros(3);
        let s = SampleSpec {
            radius: 0.4,
            count: 20,
            seed: 7,
        };
        let a = sample_points(&x0, NormKind::Sup, &s).unwrap();
        let b = sample_points(&x0, NormKind::Sup, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], x0);
        assert_eq!(a.len(), 20);
        let c = sample_points(&x0, NormKind::Sup, &SampleSpec { seed: 8, ..s }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_radius() {
        let s = SampleSpec {
            radius: 1.2,
            ..Default::default()
        };
        assert!(sample_points(&CVector::zeros(1), NormKind::Sup, &s).is_err());
    }

    proptest! {
        #[test]
        fn points_stay_in_ball(n in 1usize..6, r in 0.05f64..0.95, seed in 0u64..1000, spectral in any::<bool>()) {
            let norm = if spectral { NormKind::Spectral } else { NormKind::Sup };
            let s = SampleSpec { radius: r, count: 16, seed };
            for p in sample_points(&CVector::zeros(n), norm, &s).unwrap() {
                prop_assert!(norm.vector(&p) <= r + 1e-12);
            }
        }
    }
}
