//! One-parameter exponential families for binary and count responses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response family of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseFamily {
    Gaussian,
    Logistic,
    Poisson,
}

impl ResponseFamily {
    /// The exponential-family form, absent for Gaussian responses.
    pub fn exponential(self) -> Option<ExponentialFamily> {
        match self {
            ResponseFamily::Gaussian => None,
            ResponseFamily::Logistic => Some(ExponentialFamily::Logistic),
            ResponseFamily::Poisson => Some(ExponentialFamily::Poisson),
        }
    }

    pub fn check_support(self, y: f64) -> Result<()> {
        match self.exponential() {
            Some(f) => f.check_support(y),
            None if y.is_finite() => Ok(()),
            None => Err(Error::Support { family: "gaussian", y }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentialFamily {
    Logistic,
    Poisson,
}

impl ExponentialFamily {
    pub fn name(self) -> &'static str {
        match self {
            ExponentialFamily::Logistic => "logistic",
            ExponentialFamily::Poisson => "poisson",
        }
    }

    /// Cumulant b(η).
    pub fn b(self, eta: f64) -> f64 {
        match self {
            ExponentialFamily::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
            ExponentialFamily::Poisson => eta.exp(),
        }
    }

    pub fn b_eval(self, eta: &[f64]) -> Vec<f64> {
        eta.iter().map(|&x| self.b(x)).collect()
    }

    /// Base-measure term c(y).
    pub fn c(self, y: f64) -> f64 {
        match self {
            ExponentialFamily::Logistic => 0.0,
            ExponentialFamily::Poisson => -(1..=y as u64).map(|k| (k as f64).ln()).sum::<f64>(),
        }
    }

    /// Support indicator h(y) ≠ 0.
    pub fn in_support(self, y: f64) -> bool {
        match self {
            ExponentialFamily::Logistic => y == 0.0 || y == 1.0,
            ExponentialFamily::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
        }
    }

    pub fn check_support(self, y: f64) -> Result<()> {
        if self.in_support(y) {
            Ok(())
        } else {
            Err(Error::Support { family: self.name(), y })
        }
    }

    /// Per-particle y·η − b(η); c(y) is shared by all particles and dropped.
    pub fn loglik_increment(self, y: f64, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_support(y)?;
        Ok(eta.iter().map(|&e| y * e - self.b(e)).collect())
    }
}
