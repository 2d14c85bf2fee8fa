use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix exponential overflow (scaled norm {magnitude:.3e})")]
    Overflow { magnitude: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("resonant Sylvester equation: eigenvalues {p} and {q} coincide")]
    ResonantSylvester { p: Complex64, q: Complex64 },

    #[error("resonant Sylvester equation at homogeneous degree {degree}: eigenvalues {p} and {q} coincide")]
    ResonantDegree {
        degree: usize,
        p: Complex64,
        q: Complex64,
    },

    #[error("evaluation too close to a pole (denominator modulus {modulus:.3e})")]
    NearPole { modulus: f64 },

    #[error("trajectory left the closed unit ball at t = {t:.6} (norm {norm:.6})")]
    DomainEscape { t: f64, norm: f64 },

    #[error("step size underflow at t = {t:.6} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("gauge is not invertible on the sample grid (min singular value {min_singular:.3e})")]
    NonInvertibleGauge { min_singular: f64 },

    #[error("linear part has vanishing growth exponent (kappa_plus = {kappa:.3e})")]
    ZeroDenominator { kappa: f64 },

    #[error("linear part is not scalar (deviation {deviation:.3e})")]
    NotScalarLinearPart { deviation: f64 },

    #[error("corrector rejected: corrected limit was {status}")]
    FitRejected { status: String },

    #[error("integral criterion undecided: {0}")]
    UndecidedIntegral(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("json: {0}")]
    Json(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
