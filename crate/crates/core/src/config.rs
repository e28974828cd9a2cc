//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{Effect, ModelDesign, PredictorSpec};
use crate::engine::ModelConfig;
use crate::error::{Error, Result};
use crate::family::ResponseFamily;
use crate::gibbs::ChainSettings;
use crate::hyper::Hyperparameters;
use crate::linalg::SymMatrix;
use crate::model_glm::MhConfig;
use crate::warmup::WarmupPlan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub smc: SmcSection,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub warmup: WarmupSection,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: ResponseFamily,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default)]
    pub predictors: Vec<PredictorSpec>,
}

fn default_response() -> String {
    "y".into()
}

/// A scalar applies to every entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrList::Scalar(v) => Ok(vec![*v; len]),
            ScalarOrList::List(v) if v.len() == len => Ok(v.clone()),
            ScalarOrList::List(v) => Err(Error::Config(format!("{what}: expected {len} entries, found {}", v.len()))),
        }
    }
}

/// Prior covariance: scalar times identity, a diagonal, or a full matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    fn resolve(&self, p: usize) -> Result<SymMatrix> {
        match self {
            Covariance::Scalar(v) => Ok(SymMatrix::diagonal(&vec![*v; p])),
            Covariance::Diagonal(d) if d.len() == p => Ok(SymMatrix::diagonal(d)),
            Covariance::Diagonal(d) => Err(Error::Config(format!("sigma_beta: expected {p} entries, found {}", d.len()))),
            Covariance::Full(rows) => SymMatrix::from_rows(rows).map_err(|e| Error::Config(format!("sigma_beta: {e}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default = "zero")]
    pub mu_beta: ScalarOrList,
    #[serde(default = "vague_cov")]
    pub sigma_beta: Covariance,
    #[serde(default = "vague_scale", alias = "s_sigma2")]
    pub s_eps: f64,
    #[serde(default = "vague_scale_list", alias = "s_ur")]
    pub s_u: ScalarOrList,
}

fn zero() -> ScalarOrList {
    ScalarOrList::Scalar(0.0)
}
fn vague_cov() -> Covariance {
    Covariance::Scalar(1e10)
}
fn vague_scale() -> f64 {
    1e5
}
fn vague_scale_list() -> ScalarOrList {
    ScalarOrList::Scalar(1e5)
}

impl Default for HyperSection {
    fn default() -> Self {
        HyperSection {
            mu_beta: zero(),
            sigma_beta: vague_cov(),
            s_eps: vague_scale(),
            s_u: vague_scale_list(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcSection {
    #[serde(default = "default_particles", alias = "M")]
    pub particles: usize,
    /// Defaults to 2/M.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default = "default_upsilon")]
    pub upsilon: f64,
    #[serde(default = "yes")]
    pub adapt: bool,
    #[serde(default = "default_target")]
    pub target_accept: f64,
    #[serde(default = "default_rate")]
    pub adapt_rate: f64,
    #[serde(default)]
    pub strict_listing: bool,
}

fn default_particles() -> usize {
    1000
}
fn default_upsilon() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_target() -> f64 {
    0.23
}
fn default_rate() -> f64 {
    0.05
}

impl Default for SmcSection {
    fn default() -> Self {
        SmcSection {
            particles: default_particles(),
            tau: None,
            upsilon: default_upsilon(),
            adapt: true,
            target_accept: default_target(),
            adapt_rate: default_rate(),
            strict_listing: false,
        }
    }
}

impl SmcSection {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(2.0 / self.particles as f64)
    }
}

/// Batch chain settings shared by seeding, checkpoints and `batch-mcmc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    #[serde(default = "default_burn")]
    pub n_warm: usize,
    /// Kept draws for `batch-mcmc`; seeding always keeps M.
    #[serde(default)]
    pub n_kept: Option<usize>,
    #[serde(default = "one")]
    pub thin: usize,
}

fn default_burn() -> usize {
    1000
}
fn one() -> usize {
    1
}

impl Default for McmcSection {
    fn default() -> Self {
        McmcSection {
            n_warm: default_burn(),
            n_kept: None,
            thin: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupSection {
    #[serde(flatten)]
    pub plan: WarmupPlan,
    /// Run the validation loop before streaming in `fit-stream`.
    #[serde(default)]
    pub autotune: bool,
}

impl Default for WarmupSection {
    fn default() -> Self {
        WarmupSection {
            plan: WarmupPlan::new(100),
            autotune: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// Input table; `-` or absent reads standard input.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Emit a snapshot every this many observations.
    #[serde(default)]
    pub snapshot_every: Option<u64>,
}

impl IoSection {
    pub fn snapshot_every(&self) -> u64 {
        self.snapshot_every.unwrap_or(1).max(1)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = vec![self.model.response.as_str()];
        for p in &self.model.predictors {
            if names.contains(&p.name.as_str()) {
                return Err(Error::Config(format!("column `{}` named twice", p.name)));
            }
            names.push(&p.name);
            if p.effect == Effect::Nonlinear && p.k.is_none() {
                return Err(Error::Config(format!("nonlinear predictor `{}` needs K", p.name)));
            }
            if p.effect == Effect::Group && p.levels.is_none() {
                return Err(Error::Config(format!("group predictor `{}` needs levels", p.name)));
            }
        }
        if self.smc.particles == 0 {
            return Err(Error::Config("smc.particles must be positive".into()));
        }
        if let Some(t) = self.smc.tau {
            if !(t > 0.0) {
                return Err(Error::Config("smc.tau must be positive".into()));
            }
        }
        self.mh()?;
        Ok(())
    }

    pub fn mh(&self) -> Result<MhConfig> {
        let mh = MhConfig {
            upsilon: self.smc.upsilon,
            target_accept: self.smc.target_accept,
            adapt: self.smc.adapt,
            adapt_rate: self.smc.adapt_rate,
            strict_listing: self.smc.strict_listing,
        };
        mh.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(mh)
    }

    pub fn hyperparameters(&self, design: &ModelDesign) -> Result<Hyperparameters> {
        let layout = design.layout();
        let mu = self.hyper.mu_beta.expand(layout.p, "mu_beta")?;
        let sigma = self.hyper.sigma_beta.resolve(layout.p)?;
        let s_u = self.hyper.s_u.expand(layout.n_blocks(), "s_u")?;
        Hyperparameters::new(mu, sigma, self.hyper.s_eps, s_u).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn chain_settings(&self) -> ChainSettings {
        ChainSettings {
            adapt: self.smc.adapt,
            ..ChainSettings::new(self.mcmc.n_warm, self.smc.particles).thin(self.mcmc.thin)
        }
    }

    /// Sampler settings for a fitted design.
    pub fn model_config(&self, design: &ModelDesign) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            family: self.model.family,
            layout: design.layout().clone(),
            hyper: self.hyperparameters(design)?,
            coef_names: design.coefficient_names(),
            block_names: design.block_names(),
            particles: self.smc.particles,
            tau: self.smc.tau(),
            mh: self.mh()?,
            chain: self.chain_settings(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
