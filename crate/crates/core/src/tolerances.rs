//! Numerical tolerances and thresholds shared by every engine.
//!
//! Scenario files and the CLI may override any field by its short name
//! (`ode` for `ode_tol`, `div_cap` for `div_cap`, ...).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative accuracy target of the matrix exponential.
    pub exp_tol: f64,
    /// Backward-error scale for eigenvalues and the spectral-collision test.
    pub spec_tol: f64,
    pub syl_tol: f64,
    /// Smallest admissible denominator modulus in rational maps.
    pub denom_floor: f64,
    /// Step for numerical derivatives.
    pub dstep: f64,
    /// Local error tolerance of the time integrator.
    pub ode_tol: f64,
    pub fp_tol: f64,
    pub star_margin: f64,
    pub star_conv_tol: f64,
    pub inside_margin: f64,
    pub gen_tol: f64,
    pub inv_floor: f64,
    pub bound_tol: f64,
    pub res_tol: f64,
    pub lim_tol: f64,
    pub div_cap: f64,
    pub tail_tol: f64,
    pub norm_tol: f64,
    /// Constant in the truncation bound `taylor_tol * r^(degree + 1)`.
    pub taylor_tol: f64,
    pub ridge: f64,
    /// Relative singular-value threshold below which a corrector direction counts as null.
    pub rank_tol: f64,
    /// Minimum coefficient of determination for exponent fits.
    pub r2_min: f64,
    pub max_dim: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exp_tol: 1e-12,
            spec_tol: 1e-10,
            syl_tol: 1e-10,
            denom_floor: 1e-12,
            dstep: 1e-6,
            ode_tol: 1e-10,
            fp_tol: 1e-10,
            star_margin: 1e-6,
            star_conv_tol: 1e-6,
            inside_margin: 1e-3,
            gen_tol: 1e-6,
            inv_floor: 1e-8,
            bound_tol: 1e-6,
            res_tol: 1e-8,
            lim_tol: 1e-9,
            div_cap: 1e8,
            tail_tol: 1e-8,
            norm_tol: 1e-10,
            taylor_tol: 1.0,
            ridge: 1e-10,
            rank_tol: 1e-8,
            r2_min: 0.9,
            max_dim: 32,
        }
    }
}

impl Tolerances {
    /// Applies one `key=value` override. `key` may omit the `_tol` suffix.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Scenario(format!(
                "tolerance override `{key}` must be positive, got {value}"
            )));
        }
        let mut map = match serde_json::to_value(&*self)? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!(),
        };
        let full = if map.contains_key(key) {
            key.to_string()
        } else {
            format!("{key}_tol")
        };
        if !map.contains_key(&full) {
            return Err(Error::Scenario(format!("unknown tolerance `{key}`")));
        }
        let json_value = if full == "max_dim" {
            serde_json::Value::from(value as u64)
        } else {
            serde_json::Value::from(value)
        };
        map.insert(full, json_value);
        *self = serde_json::from_value(serde_json::Value::Object(map))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let value = serde_json::to_value(self)?;
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let x = v.as_f64().unwrap_or(0.0);
                if !(x.is_finite() && x > 0.0) {
                    return Err(Error::Scenario(format!(
                        "tolerance `{k}` must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_and_full_names() {
        let mut t = Tolerances::default();
        t.set("lim", 1e-7).unwrap();
        t.set("div_cap", 1e6).unwrap();
        t.set("ode_tol", 1e-9).unwrap();
        assert_eq!(t.lim_tol, 1e-7);
        assert_eq!(t.div_cap, 1e6);
        assert_eq!(t.ode_tol, 1e-9);
        assert!(t.set("bogus", 1.0).is_err());
        assert!(t.set("lim", -1.0).is_err());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"lim_tol": 1e-6}"#).unwrap();
        assert_eq!(t.lim_tol, 1e-6);
        assert_eq!(t.ode_tol, 1e-10);
        t.validate().unwrap();
    }
}
