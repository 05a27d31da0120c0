use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem parameters: ambient dimension `N`, block dimension `m`,
/// nonlinearity exponent `p` and prescribed mass `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub m: usize,
    pub p: f64,
    pub lambda: f64,
}

/// Exponent regime of `p` relative to the two critical values `2 + 4/N`
/// and `4 + 4/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `p ∈ (2, 2 + 4/N)`: negative levels for every mass.
    Subcritical,
    /// `p ∈ [2 + 4/N, 4 + 4/N)`: negative levels only above a mass threshold.
    Intermediate,
}

impl ModelParams {
    pub fn new(n_dim: usize, m: usize, p: f64, lambda: f64) -> Result<Self> {
        let params = Self { n_dim, m, p, lambda };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_dim;
        if n < 4 {
            return Err(Error::Parameter(format!("N must be at least 4 (got N={n})")));
        }
        if self.m < 2 || 2 * self.m > n {
            return Err(Error::Parameter(format!(
                "m must lie in [2, N/2] = [2, {}] (got m={})",
                n as f64 / 2.0,
                self.m
            )));
        }
        if n - 2 * self.m == 1 {
            return Err(Error::Parameter(format!(
                "N-2m must not equal 1 (got N={n}, m={})",
                self.m
            )));
        }
        check_exponent(n, self.p)?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive (got lambda={})",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.n_dim, self.m, self.p, lambda)
    }

    /// `(m, m, N - 2m)`.
    pub fn block_dims(&self) -> [usize; 3] {
        [self.m, self.m, self.n_dim - 2 * self.m]
    }

    pub fn regime(&self) -> Regime {
        regime_of(self.n_dim, self.p)
    }
}

pub(crate) fn check_exponent(n_dim: usize, p: f64) -> Result<()> {
    let upper = upper_exponent(n_dim);
    if !(p > 2.0 && p < upper) {
        return Err(Error::Parameter(format!(
            "p must lie in (2, 4+4/N) = (2, {upper}) (got p={p})"
        )));
    }
    Ok(())
}

/// `2 + 4/N`.
pub fn critical_exponent(n_dim: usize) -> f64 {
    2.0 + 4.0 / n_dim as f64
}

/// `4 + 4/N`.
pub fn upper_exponent(n_dim: usize) -> f64 {
    4.0 + 4.0 / n_dim as f64
}

pub fn regime_of(n_dim: usize, p: f64) -> Regime {
    if p < critical_exponent(n_dim) {
        Regime::Subcritical
    } else {
        Regime::Intermediate
    }
}
