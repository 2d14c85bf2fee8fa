//! Scenario files and the built-in examples.

use serde::{Deserialize, Serialize};

use crate::algebra::{diag_re, mat_re, CMatrix, CVector, MapExpr, MultiIndex, NormKind, Poly, C64};
use crate::dynamics::SemigroupSpec;
use crate::error::{Error, Result};
use crate::linearize::Schedule;
use crate::sampling::{sample_points, SampleSpec};
use crate::semicocycle::{GammaTree, SemicocycleSpec};
use crate::tolerances::Tolerances;

pub const SCHEMA: &str = "semicocycle-lab/1";
/// Default truncation of the sequence-space examples.
pub const DEFAULT_TRUNCATION: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Truncation of a sequence-space example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    pub semigroup: SemigroupSpec,
    pub semicocycle: SemicocycleSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sample: SampleSpec,
    #[serde(default)]
    pub schedule: Schedule,
}

fn check_tolerances(tol: &Tolerances) -> Result<()> {
    let value = serde_json::to_value(tol)?;
    for (k, v) in value.as_object().into_iter().flatten() {
        let ok = v.as_f64().is_some_and(|x| x > 0.0 && x.is_finite());
        if !ok {
            return Err(Error::Scenario(format!("tolerance `{k}` must be positive and finite")));
        }
    }
    Ok(())
}

impl Scenario {
    /// Parses and validates a scenario; JSON errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::Scenario(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        raw.prepared()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Validates tolerances, centers every map at `x₀` and runs the
    /// structural audits of both specs.
    pub fn prepared(mut self) -> Result<Self> {
        if self.schema != SCHEMA {
            return Err(Error::Scenario(format!(
                "unsupported schema `{}` (expected `{SCHEMA}`)",
                self.schema
            )));
        }
        check_tolerances(&self.tolerances)?;
        self.schedule.validate()?;
        if self.sample.count == 0 || !(self.sample.radius > 0.0 && self.sample.radius < 1.0) {
            return Err(Error::Scenario("sample needs count ≥ 1 and radius in (0, 1)".into()));
        }
        let base = self.semigroup.prepared(&self.tolerances)?;
        self.semicocycle = self.semicocycle.prepared(&base, &self.tolerances)?;
        self.semigroup = base;
        Ok(self)
    }

    pub fn samples(&self) -> Result<Vec<CVector>> {
        sample_points(&self.semigroup.x0, self.semigroup.norm, &self.sample)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

pub struct Builtin {
    pub name: &'static str,
    pub summary: &'static str,
    pub truncated: bool,
}

pub const BUILTINS: [Builtin; 4] = [
    Builtin {
        name: "examp-uniq",
        summary: "B(x) = diag(1,2) gauged by [[1,x],[0,1]] over f = -x: linearizable by two different maps",
        truncated: false,
    },
    Builtin {
        name: "ex1",
        summary: "[[1,x],[x,1]]-gauge of exp(t diag(3,1)) over f = -x: naive limit diverges, degree-2 corrector needed",
        truncated: false,
    },
    Builtin {
        name: "ex-2",
        summary: "coboundary exp[P(x) - P(e^-t x)], P = sum (2x_k)^k, over f = -x in sup norm (truncated)",
        truncated: true,
    },
    Builtin {
        name: "examp123",
        summary: "same coboundary over f = diag(-1/k) x: naive limit slows down as the truncation grows",
        truncated: true,
    },
];

fn one_var_gauge(linear: [f64; 4]) -> MapExpr {
    let p = Poly::from_terms(
        1,
        2,
        2,
        [
            (MultiIndex::new(vec![0]), CMatrix::identity(2, 2)),
            (MultiIndex::new(vec![1]), mat_re(2, &linear)),
        ],
    )
    .expect("well-formed gauge");
    MapExpr::polynomial(p)
}

/// `exp(Σ_k (2x_k)^k)` on `n` variables.
pub fn coboundary_gauge(n: usize) -> MapExpr {
    let mut exponent = Poly::zero(n, 1, 1);
    for k in 1..=n {
        let mut e = vec![0u32; n];
        e[k - 1] = k as u32;
        exponent.add_term(MultiIndex::new(e), CMatrix::from_element(1, 1, C64::new(2f64.powi(k as i32), 0.0)));
    }
    MapExpr::exp_poly(exponent, MapExpr::identity(n, 1)).expect("scalar exponent")
}

fn gauge_scenario(name: &str, g: MapExpr, inner_b0: CMatrix) -> SemicocycleSpec {
    SemicocycleSpec::new(GammaTree::Gauge {
        m: g.clone(),
        inner: Box::new(GammaTree::Constant { b0: inner_b0 }),
    })
    .unwrap_or_else(|e| panic!("builtin {name}: {e}"))
    .with_reference(g)
}

/// A built-in example; `n` is the truncation of the sequence-space ones.
pub fn builtin(name: &str, n: Option<usize>) -> Result<Scenario> {
    let entry = BUILTINS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::UnknownExample(name.to_string()))?;
    let n = if entry.truncated {
        let n = n.unwrap_or(DEFAULT_TRUNCATION);
        if n == 0 || n > 32 {
            return Err(Error::Precondition(format!("truncation {n} outside 1..=32")));
        }
        Some(n)
    } else {
        None
    };
    let scalar_decay = |dim: usize, norm: NormKind, radius: f64| {
        SemigroupSpec::new(norm, CVector::zeros(dim), radius, MapExpr::linear(&diag_re(&vec![-1.0; dim])))
    };
    let (semigroup, semicocycle, radius) = match name {
        "examp-uniq" => (
            scalar_decay(1, NormKind::Spectral, 0.6),
            gauge_scenario(name, one_var_gauge([0.0, 1.0, 0.0, 0.0]), diag_re(&[1.0, 2.0])),
            0.6,
        ),
        "ex1" => (
            scalar_decay(1, NormKind::Spectral, 0.6),
            gauge_scenario(name, one_var_gauge([0.0, 1.0, 1.0, 0.0]), diag_re(&[3.0, 1.0])),
            0.6,
        ),
        "ex-2" => {
            let n = n.expect("truncated");
            (
                scalar_decay(n, NormKind::Sup, 0.4),
                gauge_scenario(name, coboundary_gauge(n), CMatrix::zeros(1, 1)),
                0.4,
            )
        }
        "examp123" => {
            let n = n.expect("truncated");
            let rates: Vec<f64> = (1..=n).map(|k| -1.0 / k as f64).collect();
            (
                SemigroupSpec::new(NormKind::Sup, CVector::zeros(n), 0.5, MapExpr::linear(&diag_re(&rates))),
                gauge_scenario(name, coboundary_gauge(n), CMatrix::zeros(1, 1)),
                0.5,
            )
        }
        _ => unreachable!("registry and match agree"),
    };
    let description = match n {
        Some(n) => format!(
            "{} [truncation n = {n}; infinite-dimensional statements are represented at this truncation only]",
            entry.summary
        ),
        None => entry.summary.to_string(),
    };
    Scenario {
        schema: SCHEMA.into(),
        name: name.into(),
        description: Some(description),
        truncation: n,
        semigroup,
        semicocycle,
        tolerances: Tolerances::default(),
        sample: SampleSpec {
            radius,
            count: 12,
            seed: 1,
        },
        schedule: Schedule::default(),
    }
    .prepared()
}
