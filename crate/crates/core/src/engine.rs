//! Model-class dispatch: batch chains, particle seeding and the online
//! engine for Gaussian or generalized responses.

use serde::{Deserialize, Serialize};

use crate::design::BlockLayout;
use crate::discrete::DiscreteDistribution;
use crate::error::{check_len, Error, Result};
use crate::family::ResponseFamily;
use crate::gibbs::{gibbs_lmm, mh_gibbs_glmm, ChainOutput, ChainSettings};
use crate::hyper::Hyperparameters;
use crate::linalg::Matrix;
use crate::model_gaussian::{gaussian_prior_particles, GaussianLayout, GaussianModel};
use crate::model_glm::{glm_prior_particles, DataBuffer, GlmLayout, GlmModel, MhConfig};
use crate::random::RandomStream;
use crate::smc::{
    restore_engine, CycleDiagnostics, EngineOptions, ParamSummary, ParticleSystem, PosteriorSnapshot, SmcEngine,
    SnapshotRecord, StreamModel,
};
use crate::suffstats::SufficientStats;

/// Everything needed to build samplers for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ResponseFamily,
    pub layout: BlockLayout,
    pub hyper: Hyperparameters,
    pub coef_names: Vec<String>,
    pub block_names: Vec<String>,
    pub particles: usize,
    pub tau: f64,
    pub mh: MhConfig,
    /// Warm and thinning settings for batch chains; the kept count is set per call.
    pub chain: ChainSettings,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.check_layout(&self.layout)?;
        check_len("coefficient names", self.layout.total(), self.coef_names.len())?;
        check_len("block names", self.layout.n_blocks(), self.block_names.len())?;
        if self.particles == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config("resampling threshold must be positive".into()));
        }
        self.mh.validate()
    }

    pub fn dim(&self) -> usize {
        match self.family {
            ResponseFamily::Gaussian => GaussianLayout::new(self.layout.clone()).dim(),
            _ => GlmLayout::new(self.layout.clone()).dim(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self.family {
            ResponseFamily::Gaussian => {
                GaussianLayout::new(self.layout.clone()).labels(&self.coef_names, &self.block_names)
            }
            _ => GlmLayout::new(self.layout.clone()).labels(&self.coef_names, &self.block_names),
        }
    }

    /// Whether parameter row j is an auxiliary a-variable.
    pub fn is_auxiliary(&self, j: usize) -> bool {
        match self.family {
            ResponseFamily::Gaussian => GaussianLayout::new(self.layout.clone()).is_auxiliary(j),
            _ => GlmLayout::new(self.layout.clone()).is_auxiliary(j),
        }
    }

    fn options(&self) -> EngineOptions {
        EngineOptions {
            tau: self.tau,
            moves: true,
        }
    }

    /// Batch MCMC on (y, C) keeping `n_kept` draws.
    pub fn batch_chain(&self, y: &[f64], c: &Matrix, n_kept: usize, s: &mut RandomStream) -> Result<ChainOutput> {
        let settings = ChainSettings {
            n_kept,
            ..self.chain.clone()
        };
        match self.family.exponential() {
            None => gibbs_lmm(y, c, &self.layout, &self.hyper, &settings, s),
            Some(f) => mh_gibbs_glmm(y, c, &self.layout, f, &self.hyper, self.mh.upsilon, &settings, s),
        }
    }

    /// Builds the online engine with particles `theta` and the warm rows as its
    /// data state. For generalized models, `upsilon` overrides the configured scale.
    pub fn engine_from(
        &self,
        theta: ParticleSystem,
        y: &[f64],
        c: &Matrix,
        upsilon: Option<f64>,
        seed: u64,
    ) -> Result<Engine> {
        let labels = self.labels();
        match self.family.exponential() {
            None => {
                let stats = SufficientStats::seed_from_batch(y, c)?;
                let model = GaussianModel::new(GaussianLayout::new(self.layout.clone()), self.hyper.clone(), stats, labels)?;
                Ok(Engine::Gaussian(SmcEngine::new(theta, model, self.options(), seed)?))
            }
            Some(f) => {
                let buffer = DataBuffer::from_batch(y, c)?;
                let mh = MhConfig {
                    upsilon: upsilon.unwrap_or(self.mh.upsilon),
                    ..self.mh
                };
                let model = GlmModel::new(f, GlmLayout::new(self.layout.clone()), self.hyper.clone(), buffer, mh, labels)?;
                Ok(Engine::Glm(SmcEngine::new(theta, model, self.options(), seed)?))
            }
        }
    }

    /// Particles drawn from the prior, for runs without warm-up.
    pub fn prior_engine(&self, seed: u64) -> Result<Engine> {
        let mut s = RandomStream::new(seed).substream(SEED_STREAM);
        let theta = match self.family {
            ResponseFamily::Gaussian => {
                gaussian_prior_particles(&GaussianLayout::new(self.layout.clone()), &self.hyper, self.particles, &mut s)?
            }
            _ => glm_prior_particles(&GlmLayout::new(self.layout.clone()), &self.hyper, self.particles, &mut s)?,
        };
        let p = self.layout.total();
        self.engine_from(ParticleSystem::new(theta), &[], &Matrix::with_cols(p), None, engine_seed(seed))
    }
}

const SEED_STREAM: u64 = 0;
const ENGINE_STREAM: u64 = 1;

/// Seed of the online engine derived from a run seed.
pub fn engine_seed(seed: u64) -> u64 {
    RandomStream::new(seed).substream(ENGINE_STREAM).seed()
}

/// Stream for the seeding chain derived from a run seed.
pub fn seeding_stream(seed: u64) -> RandomStream {
    RandomStream::new(seed).substream(SEED_STREAM)
}

/// The online engine of either model class.
#[derive(Clone, Debug)]
pub enum Engine {
    Gaussian(SmcEngine<GaussianModel>),
    Glm(SmcEngine<GlmModel>),
}

impl Engine {
    pub fn step(&mut self, y: f64, c: &[f64]) -> Result<CycleDiagnostics> {
        match self {
            Engine::Gaussian(e) => e.step(y, c),
            Engine::Glm(e) => e.step(y, c),
        }
    }

    pub fn snapshot(&self) -> Result<PosteriorSnapshot> {
        match self {
            Engine::Gaussian(e) => e.snapshot(),
            Engine::Glm(e) => e.snapshot(),
        }
    }

    pub fn n(&self) -> u64 {
        match self {
            Engine::Gaussian(e) => e.n(),
            Engine::Glm(e) => e.n(),
        }
    }

    pub fn particles(&self) -> &ParticleSystem {
        match self {
            Engine::Gaussian(e) => e.particles(),
            Engine::Glm(e) => e.particles(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Engine::Gaussian(e) => e.model().labels(),
            Engine::Glm(e) => e.model().labels(),
        }
    }

    /// Current MH scale for generalized models.
    pub fn upsilon(&self) -> Option<f64> {
        match self {
            Engine::Gaussian(_) => None,
            Engine::Glm(e) => Some(e.model().mh().upsilon),
        }
    }
}

/// Seeds an engine from a batch chain on the warm rows: kept draw g becomes
/// particle column g, and the warm rows become the data state.
pub fn warmup_engine(cfg: &ModelConfig, y: &[f64], c: &Matrix, seed: u64) -> Result<(Engine, ChainOutput)> {
    cfg.validate()?;
    let mut s = seeding_stream(seed);
    let chain = cfg.batch_chain(y, c, cfg.particles, &mut s)?;
    let ps = ParticleSystem::new(chain.to_particles());
    let ups = if cfg.mh.adapt { chain.upsilon } else { None };
    let engine = cfg.engine_from(ps, y, c, ups, engine_seed(seed))?;
    Ok((engine, chain))
}

/// Batch-means standard error of the mean of a chain.
pub fn batch_means_se(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return f64::NAN;
    }
    let b = (n as f64).sqrt().floor() as usize;
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|k| x[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Posterior summaries of kept chain draws, in the snapshot record format.
pub fn chain_record(chain: &ChainOutput, labels: &[String], n: u64) -> Result<SnapshotRecord> {
    check_len("chain labels", chain.draws.cols(), labels.len())?;
    let params = labels
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = chain.column(j);
            let se = batch_means_se(&col);
            let d = DiscreteDistribution::uniform(col)?;
            let (lo, hi) = d.credible_interval(0.95)?;
            Ok(ParamSummary {
                name: name.clone(),
                mean: d.mean(),
                sd: d.sd(),
                lo,
                hi,
                se,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SnapshotRecord {
        n,
        params,
        ptp: None,
        resampled: None,
        accept_rate: chain.accept_rate,
    })
}

/// Serializable engine state: particles, weights, ancestry, cycle counter,
/// model data state and the root seed, which fixes every later substream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum EngineState {
    Gaussian {
        particles: ParticleSystem,
        model: GaussianModel,
        options: EngineOptions,
        seed: u64,
        last: Option<CycleDiagnostics>,
    },
    Glm {
        particles: ParticleSystem,
        model: GlmModel,
        options: EngineOptions,
        seed: u64,
        last: Option<CycleDiagnostics>,
    },
}

impl Engine {
    pub fn state(&self) -> EngineState {
        match self {
            Engine::Gaussian(e) => EngineState::Gaussian {
                particles: e.particles().clone(),
                model: e.model().clone(),
                options: *e.options(),
                seed: e.seed(),
                last: e.last_diagnostics(),
            },
            Engine::Glm(e) => EngineState::Glm {
                particles: e.particles().clone(),
                model: e.model().clone(),
                options: *e.options(),
                seed: e.seed(),
                last: e.last_diagnostics(),
            },
        }
    }

    pub fn from_state(state: EngineState) -> Result<Self> {
        Ok(match state {
            EngineState::Gaussian {
                particles,
                model,
                options,
                seed,
                last,
            } => Engine::Gaussian(restore_engine(particles, model, options, seed, last)?),
            EngineState::Glm {
                particles,
                model,
                options,
                seed,
                last,
            } => Engine::Glm(restore_engine(particles, model, options, seed, last)?),
        })
    }

    /// Rows held by the model's data state: 0 for Gaussian models, which keep
    /// only sufficient statistics.
    pub fn buffered_rows(&self) -> usize {
        match self {
            Engine::Gaussian(_) => 0,
            Engine::Glm(e) => e.model().buffer().len(),
        }
    }
}
