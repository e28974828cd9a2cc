//! Prior hyperparameters shared by the batch and online samplers.

use serde::{Deserialize, Serialize};

use crate::design::BlockLayout;
use crate::error::{check_len, Error, Result};
use crate::linalg::{spd_inverse, SymMatrix};

/// β ~ N(μ_β, Σ_β); σ_ε ~ Half-Cauchy(s_ε); σ_ur ~ Half-Cauchy(s_ur).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperRaw", into = "HyperRaw")]
pub struct Hyperparameters {
    mu_beta: Vec<f64>,
    sigma_beta: SymMatrix,
    s_eps: f64,
    s_u: Vec<f64>,
    sigma_beta_inv: SymMatrix,
    sigma_beta_inv_mu: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct HyperRaw {
    mu_beta: Vec<f64>,
    sigma_beta: SymMatrix,
    s_eps: f64,
    s_u: Vec<f64>,
}

impl TryFrom<HyperRaw> for Hyperparameters {
    type Error = Error;
    fn try_from(r: HyperRaw) -> Result<Self> {
        Hyperparameters::new(r.mu_beta, r.sigma_beta, r.s_eps, r.s_u)
    }
}

impl From<Hyperparameters> for HyperRaw {
    fn from(h: Hyperparameters) -> Self {
        HyperRaw {
            mu_beta: h.mu_beta,
            sigma_beta: h.sigma_beta,
            s_eps: h.s_eps,
            s_u: h.s_u,
        }
    }
}

impl Hyperparameters {
    pub fn new(mu_beta: Vec<f64>, sigma_beta: SymMatrix, s_eps: f64, s_u: Vec<f64>) -> Result<Self> {
        check_len("prior mean", sigma_beta.order(), mu_beta.len())?;
        if !(s_eps > 0.0) || s_u.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter("prior scales must be positive".into()));
        }
        let sigma_beta_inv = spd_inverse(&sigma_beta, "Σ_β")?;
        let sigma_beta_inv_mu = sigma_beta_inv.mul_vec(&mu_beta)?;
        Ok(Hyperparameters {
            mu_beta,
            sigma_beta,
            s_eps,
            s_u,
            sigma_beta_inv,
            sigma_beta_inv_mu,
        })
    }

    /// μ_β = 0, Σ_β = var·I, common scale for every variance component.
    pub fn vague(layout: &BlockLayout, var: f64, scale: f64) -> Result<Self> {
        Self::new(
            vec![0.0; layout.p],
            SymMatrix::diagonal(&vec![var; layout.p]),
            scale,
            vec![scale; layout.n_blocks()],
        )
    }

    pub fn check_layout(&self, layout: &BlockLayout) -> Result<()> {
        check_len("fixed-effect prior", layout.p, self.mu_beta.len())?;
        check_len("random-effect scales", layout.n_blocks(), self.s_u.len())
    }

    pub fn mu_beta(&self) -> &[f64] {
        &self.mu_beta
    }

    pub fn sigma_beta(&self) -> &SymMatrix {
        &self.sigma_beta
    }

    pub fn sigma_beta_inv(&self) -> &SymMatrix {
        &self.sigma_beta_inv
    }

    pub fn sigma_beta_inv_mu(&self) -> &[f64] {
        &self.sigma_beta_inv_mu
    }

    pub fn s_eps(&self) -> f64 {
        self.s_eps
    }

    pub fn s_u(&self) -> &[f64] {
        &self.s_u
    }
}
