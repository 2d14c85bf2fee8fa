pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod linearize;
pub mod ode;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod semicocycle;
pub mod spectra;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
