pub mod certify;
pub mod domain;
pub mod dualmap;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod io;

pub use domain::{Field, ModelParams, ReducedGrid, Regime, Sector};
pub use dualmap::DualMap;
pub use error::{Error, Result};
