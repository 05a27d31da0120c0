use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the domain of an operation (non-finite values and the like).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or configuration parameter violates its admissibility bounds.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Field length or axis layout does not match the grid.
    #[error("shape error: {0}")]
    Shape(String),

    /// The input makes the operation ill-posed (zero field, empty sample set, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Safeguarded inversion of the dual primitive did not converge.
    #[error("inversion of the dual primitive at t = {target} did not converge; last bracket [{lo}, {hi}]")]
    Inversion { target: f64, lo: f64, hi: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Backtracking shrank the step below the floor without satisfying the
    /// decrease condition. Carries the state reached so far.
    #[error("line search stagnated after {iterations} iterations (projected gradient norm {grad_norm:e})")]
    Stagnation {
        iterations: usize,
        grad_norm: f64,
        report: Box<crate::flow::SolveReport>,
    },
}

impl Error {
    pub fn is_parameter(&self) -> bool {
        matches!(self, Error::Parameter(_))
    }
}
