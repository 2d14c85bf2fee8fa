//! Dormand–Prince 5(4) integrator for complex-valued systems.
//!
//! Output times are hit exactly by clipping the step; no dense output.
//! Error control is per component, `atol_i + rtol_i·max(|y_i|, |ŷ_i|)`,
//! measured in the max norm.

use crate::algebra::C64;
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MIN_STEP_REL: f64 = 1e-14;
const MAX_STEPS: usize = 2_000_000;

/// Per-component tolerances. Components sharing a group measure their
/// relative error against the largest modulus in the group, so a block
/// holding one vector is controlled relative to that vector's size.
#[derive(Debug, Clone)]
pub struct Tolerance {
    pub atol: Vec<f64>,
    pub rtol: Vec<f64>,
    pub group: Vec<usize>,
}

impl Tolerance {
    pub fn uniform(n: usize, tol: f64) -> Self {
        Self {
            atol: vec![tol; n],
            rtol: vec![tol; n],
            group: (0..n).collect(),
        }
    }

    /// Puts `range` into one group with the given tolerances.
    pub fn set_block(&mut self, range: std::ops::Range<usize>, atol: f64, rtol: f64) {
        let id = range.start;
        for i in range {
            self.atol[i] = atol;
            self.rtol[i] = rtol;
            self.group[i] = id;
        }
    }

    fn magnitudes(&self, y: &[C64], ynew: &[C64], out: &mut [f64]) {
        out.iter_mut().for_each(|m| *m = 0.0);
        for i in 0..y.len() {
            let g = self.group[i];
            out[g] = out[g].max(y[i].norm()).max(ynew[i].norm());
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn axpy(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (a, k) in terms {
            acc += k[i] * *a;
        }
        out[i] = y[i] + acc * h;
    }
}

fn finite(y: &[C64]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Resumable Dormand–Prince state: advance to successive target times.
#[derive(Debug, Clone)]
pub struct Dp5 {
    t: f64,
    y: Vec<C64>,
    k: Vec<Vec<C64>>,
    h: f64,
    tol: Tolerance,
    stats: Stats,
}

impl Dp5 {
    pub fn new<R>(rhs: &mut R, t0: f64, y0: &[C64], tol: Tolerance) -> Result<Self>
    where
        R: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        let n = y0.len();
        assert_eq!(tol.atol.len(), n);
        assert_eq!(tol.rtol.len(), n);
        assert_eq!(tol.group.len(), n);
        let mut stats = Stats::default();
        let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
        rhs(t0, y0, &mut k[0])?;
        stats.evaluations += 1;
        let h = initial_step(rhs, t0, y0, &k[0], &tol, &mut stats)?;
        Ok(Self {
            t: t0,
            y: y0.to_vec(),
            k,
            h,
            tol,
            stats,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[C64] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Steps until `target` is reached exactly. `accept` runs after every
    /// accepted step and may abort the integration.
    pub fn advance<R, A>(&mut self, rhs: &mut R, target: f64, accept: &mut A) -> Result<()>
    where
        R: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
        A: FnMut(f64, &[C64]) -> Result<()>,
    {
        if !target.is_finite() || target < self.t {
            return Err(Error::Precondition(format!(
                "cannot integrate from t = {} back to {target}",
                self.t
            )));
        }
        let n = self.y.len();
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        let mut ynew = vec![C64::new(0.0, 0.0); n];
        let mut mags = vec![0.0; n];
        let (tol, stats) = (&self.tol, &mut self.stats);
        let (t, y, k, h) = (&mut self.t, &mut self.y, &mut self.k, &mut self.h);
        while *t < target {
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::Stiffness { t: *t, h: *h });
            }
            let remaining = target - *t;
            let clipped = *h >= remaining * (1.0 - 1e-12);
            let step = if clipped { remaining } else { *h };
            if step < MIN_STEP_REL * t.abs().max(1.0) && !clipped {
                return Err(Error::Stiffness { t: *t, h: step });
            }
            let t0 = *t;

            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            axpy(&mut tmp, y, step, &[(A21, k1)]);
            rhs(t0 + C2 * step, &tmp, &mut rest[0])?;
            axpy(&mut tmp, y, step, &[(A31, k1), (A32, &rest[0])]);
            rhs(t0 + C3 * step, &tmp, &mut rest[1])?;
            axpy(&mut tmp, y, step, &[(A41, k1), (A42, &rest[0]), (A43, &rest[1])]);
            rhs(t0 + C4 * step, &tmp, &mut rest[2])?;
            axpy(
                &mut tmp,
                y,
                step,
                &[(A51, k1), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])],
            );
            rhs(t0 + C5 * step, &tmp, &mut rest[3])?;
            axpy(
                &mut tmp,
                y,
                step,
                &[
                    (A61, k1),
                    (A62, &rest[0]),
                    (A63, &rest[1]),
                    (A64, &rest[2]),
                    (A65, &rest[3]),
                ],
            );
            rhs(t0 + step, &tmp, &mut rest[4])?;
            axpy(
                &mut ynew,
                y,
                step,
                &[
                    (A71, k1),
                    (A73, &rest[1]),
                    (A74, &rest[2]),
                    (A75, &rest[3]),
                    (A76, &rest[4]),
                ],
            );
            rhs(t0 + step, &ynew, &mut rest[5])?;
            stats.evaluations += 6;

            tol.magnitudes(y, &ynew, &mut mags);
            let mut err = 0.0f64;
            for i in 0..n {
                let e = (k1[i] * E1
                    + rest[1][i] * E3
                    + rest[2][i] * E4
                    + rest[3][i] * E5
                    + rest[4][i] * E6
                    + rest[5][i] * E7)
                    * step;
                let sc = tol.atol[i] + tol.rtol[i] * mags[tol.group[i]];
                err = err.max(e.norm() / sc);
            }
            if !err.is_finite() || !finite(&ynew) {
                stats.rejected += 1;
                *h = step * MIN_FACTOR;
                continue;
            }

            if err <= 1.0 {
                stats.accepted += 1;
                *t = if clipped { target } else { t0 + step };
                std::mem::swap(y, &mut ynew);
                k.swap(0, 6);
                accept(*t, y)?;
                let fac = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let grown = step * fac;
                // a clipped step says nothing about the natural step size
                *h = if clipped { h.max(grown) } else { grown };
            } else {
                stats.rejected += 1;
                let fac = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                *h = step * fac;
            }
        }
        Ok(())
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` and returns the state at each of
/// `t_out` (non-decreasing, all ≥ `t0`).
pub fn integrate<R, A>(
    mut rhs: R,
    t0: f64,
    y0: &[C64],
    t_out: &[f64],
    tol: &Tolerance,
    mut accept: A,
) -> Result<(Vec<Vec<C64>>, Stats)>
where
    R: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    A: FnMut(f64, &[C64]) -> Result<()>,
{
    if t_out.iter().any(|t| !t.is_finite() || *t < t0) || t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition(
            "output times must be finite, non-decreasing and not before the start".into(),
        ));
    }
    let mut solver = Dp5::new(&mut rhs, t0, y0, tol.clone())?;
    let mut out = Vec::with_capacity(t_out.len());
    for &target in t_out {
        solver.advance(&mut rhs, target, &mut accept)?;
        out.push(solver.state().to_vec());
    }
    Ok((out, solver.stats()))
}

fn weighted_norm(y: &[C64], scale_from: &[C64], tol: &Tolerance) -> f64 {
    let mut mags = vec![0.0; y.len()];
    tol.magnitudes(scale_from, scale_from, &mut mags);
    y.iter()
        .enumerate()
        .map(|(i, v)| v.norm() / (tol.atol[i] + tol.rtol[i] * mags[tol.group[i]]))
        .fold(0.0, f64::max)
}

/// Starting step from the first and an estimated second derivative.
fn initial_step<R>(rhs: &mut R, t: f64, y: &[C64], f0: &[C64], tol: &Tolerance, stats: &mut Stats) -> Result<f64>
where
    R: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let d0 = weighted_norm(y, y, tol);
    let d1 = weighted_norm(f0, y, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
    rhs(t + h0, &y1, &mut f1)?;
    stats.evaluations += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = weighted_norm(&diff, y, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_check(_: f64, _: &[C64]) -> Result<()> {
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let (ys, _) = integrate(
            |_, y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[C64::new(0.5, 0.0)],
            &[2f64.ln(), 5.0],
            &Tolerance::uniform(1, 1e-10),
            no_check,
        )
        .unwrap();
        assert!((ys[0][0] - C64::new(0.25, 0.0)).norm() < 1e-10);
        assert!((ys[1][0].re - 0.5 * (-5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_modulus() {
        let (ys, _) = integrate(
            |_, y, dy| {
                dy[0] = C64::new(0.0, 1.0) * y[0];
                Ok(())
            },
            0.0,
            &[C64::new(1.0, 0.0)],
            &[std::f64::consts::PI],
            &Tolerance::uniform(1, 1e-10),
            no_check,
        )
        .unwrap();
        assert!((ys[0][0] - C64::new(-1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn time_dependent_rhs_hits_requested_times() {
        // y' = 2t, y = t²
        let times = [0.0, 0.3, 0.3, 1.7, 4.0];
        let (ys, _) = integrate(
            |t, _, dy| {
                dy[0] = C64::new(2.0 * t, 0.0);
                Ok(())
            },
            0.0,
            &[C64::new(0.0, 0.0)],
            &times,
            &Tolerance::uniform(1, 1e-12),
            no_check,
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0].re - t * t).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn finite_time_blowup_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[C64::new(1.0, 0.0)],
            &[2.0],
            &Tolerance::uniform(1, 1e-10),
            no_check,
        );
        assert!(matches!(r, Err(Error::Stiffness { .. })));
    }

    #[test]
    fn accept_hook_aborts() {
        let r = integrate(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            &[C64::new(0.5, 0.0)],
            &[5.0],
            &Tolerance::uniform(1, 1e-10),
            |t, y| {
                if y[0].norm() > 1.0 {
                    Err(Error::DomainEscape { t, norm: y[0].norm() })
                } else {
                    Ok(())
                }
            },
        );
        match r {
            Err(Error::DomainEscape { t, .. }) => assert!(t > 0.6 && t < 0.8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_backwards_output_times() {
        let r = integrate(
            |_, _, dy| {
                dy[0] = C64::new(0.0, 0.0);
                Ok(())
            },
            0.0,
            &[C64::new(0.0, 0.0)],
            &[1.0, 0.5],
            &Tolerance::uniform(1, 1e-10),
            no_check,
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
