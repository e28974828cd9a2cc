//! Warm-up seeding and the automated convergence check: batch MCMC on the
//! first n_warm rows seeds the particles, a validation stretch compares the
//! online posterior with batch fits at checkpoints, and the warm-up grows
//! until the two agree.

use serde::{Deserialize, Serialize};

use crate::design::{ModelDesign, PredictorSpec};
use crate::engine::{chain_record, warmup_engine, Engine, ModelConfig};
use crate::error::{check_len, Error, Result};
use crate::gibbs::ChainOutput;
use crate::linalg::Matrix;
use crate::output::f64_or_nan;
use crate::random::RandomStream;
use crate::smc::SnapshotRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupPlan {
    #[serde(default = "default_n_warm")]
    pub n_warm: usize,
    /// Validation length; defaults to the current n_warm.
    #[serde(default)]
    pub n_valid: Option<usize>,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_growth")]
    pub growth_factor: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

fn default_n_warm() -> usize {
    100
}
fn default_retries() -> usize {
    1
}
fn default_growth() -> f64 {
    5.0
}
fn default_threshold() -> f64 {
    3.0
}
fn default_checkpoints() -> usize {
    5
}

impl WarmupPlan {
    pub fn new(n_warm: usize) -> Self {
        WarmupPlan {
            n_warm,
            n_valid: None,
            max_retries: default_retries(),
            growth_factor: default_growth(),
            threshold: default_threshold(),
            checkpoints: default_checkpoints(),
        }
    }

    /// Fails unless n_warm ≥ max(P+1, 10) and the growth factor exceeds one.
    pub fn validate(&self, p: usize) -> Result<()> {
        let min = (p + 1).max(10);
        if self.n_warm < min {
            return Err(Error::Config(format!("n_warm = {} is below the minimum {min}", self.n_warm)));
        }
        if !(self.growth_factor > 1.0) {
            return Err(Error::Config("warm-up growth factor must exceed 1".into()));
        }
        if self.checkpoints == 0 {
            return Err(Error::Config("need at least one checkpoint".into()));
        }
        Ok(())
    }

    /// n_warm for retry number `attempt` (0-based).
    pub fn n_warm_at(&self, attempt: usize) -> usize {
        (self.n_warm as f64 * self.growth_factor.powi(attempt as i32)).round() as usize
    }

    pub fn n_valid_for(&self, n_warm: usize) -> usize {
        self.n_valid.unwrap_or(n_warm)
    }

    /// Evenly spaced sample sizes in (n_warm, n_warm + n_valid].
    pub fn checkpoints_for(&self, n_warm: usize) -> Vec<usize> {
        let n_valid = self.n_valid_for(n_warm);
        let k = self.checkpoints;
        let mut out: Vec<usize> = (1..=k)
            .map(|j| n_warm + ((j * n_valid) as f64 / k as f64).round() as usize)
            .filter(|&n| n > n_warm)
            .collect();
        out.dedup();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
}

/// One (checkpoint, parameter) line of the comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub parameter: String,
    pub smc_mean: f64,
    pub smc_lo: f64,
    pub smc_hi: f64,
    pub mcmc_mean: f64,
    pub mcmc_lo: f64,
    pub mcmc_hi: f64,
    pub mcmc_sd: f64,
    /// |smc_mean − mcmc_mean| / mcmc_sd.
    #[serde(deserialize_with = "f64_or_nan")]
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_warm: usize,
    pub threshold: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Largest gap at the final checkpoint.
    #[serde(deserialize_with = "f64_or_nan")]
    pub max_gap: f64,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    pub fn final_rows(&self) -> impl Iterator<Item = &ConvergenceRow> {
        let last = self.rows.iter().map(|r| r.n).max().unwrap_or(0);
        self.rows.iter().filter(move |r| r.n == last)
    }
}

/// Standardized gaps between matched SMC and batch summaries. `parameters`
/// lists the names compared; the verdict uses the last checkpoint.
pub fn validate_convergence(
    n_warm: usize,
    smc: &[SnapshotRecord],
    mcmc: &[SnapshotRecord],
    parameters: &[String],
    threshold: f64,
) -> Result<ConvergenceReport> {
    check_len("checkpoint records", smc.len(), mcmc.len())?;
    if smc.is_empty() {
        return Err(Error::InvalidParameter("no checkpoints to compare".into()));
    }
    let mut rows = Vec::new();
    for (a, b) in smc.iter().zip(mcmc) {
        if a.n != b.n {
            return Err(Error::InvalidParameter(format!("checkpoint mismatch: {} vs {}", a.n, b.n)));
        }
        for name in parameters {
            let (ps, pm) = match (a.param(name), b.param(name)) {
                (Some(x), Some(y)) => (x, y),
                _ => return Err(Error::InvalidParameter(format!("parameter `{name}` missing"))),
            };
            let diff = (ps.mean - pm.mean).abs();
            let gap = if pm.sd > 0.0 {
                diff / pm.sd
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(ConvergenceRow {
                n: a.n,
                parameter: name.clone(),
                smc_mean: ps.mean,
                smc_lo: ps.lo,
                smc_hi: ps.hi,
                mcmc_mean: pm.mean,
                mcmc_lo: pm.lo,
                mcmc_hi: pm.hi,
                mcmc_sd: pm.sd,
                gap,
            });
        }
    }
    let last = smc.last().expect("nonempty").n;
    let max_gap = rows
        .iter()
        .filter(|r| r.n == last)
        .map(|r| r.gap)
        .fold(0.0, f64::max);
    let verdict = if max_gap <= threshold {
        Verdict::Converging
    } else {
        Verdict::Diverging
    };
    Ok(ConvergenceReport {
        n_warm,
        threshold,
        rows,
        max_gap,
        verdict,
    })
}

/// Design rows for a prefix of a re-readable stream.
#[derive(Clone, Debug)]
pub struct DesignedData {
    pub y: Vec<f64>,
    pub c: Matrix,
    pub design: ModelDesign,
}

/// A stream that can be re-read from the start.
pub trait WarmupSource {
    /// Rows `0..count` with basis ranges fitted on the first `n_warm`.
    fn load(&mut self, n_warm: usize, count: usize) -> Result<DesignedData>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Raw records held in memory.
#[derive(Clone, Debug)]
pub struct RawData {
    pub predictors: Vec<PredictorSpec>,
    pub y: Vec<f64>,
    /// Predictor values per record, in declaration order.
    pub x: Vec<Vec<f64>>,
}

impl RawData {
    pub fn design(&self, n_warm: usize) -> Result<ModelDesign> {
        ModelDesign::fit(&self.predictors, &self.x[..n_warm.min(self.x.len())])
    }
}

impl WarmupSource for RawData {
    fn load(&mut self, n_warm: usize, count: usize) -> Result<DesignedData> {
        let design = self.design(n_warm)?;
        let count = count.min(self.y.len());
        let mut c = Matrix::with_cols(design.layout().total());
        for x in &self.x[..count] {
            c.push_row(&design.row(x)?)?;
        }
        Ok(DesignedData {
            y: self.y[..count].to_vec(),
            c,
            design,
        })
    }

    fn len(&self) -> usize {
        self.y.len()
    }
}

/// Seeds the particle system from the first n_warm rows.
pub fn warmup_seed(y: &[f64], c: &Matrix, n_warm: usize, cfg: &ModelConfig, seed: u64) -> Result<(Engine, ChainOutput)> {
    if y.len() < n_warm {
        return Err(Error::Config(format!("need {n_warm} warm-up rows, have {}", y.len())));
    }
    warmup_engine(cfg, &y[..n_warm], &c.head(n_warm), seed)
}

/// Result of a successful tuning run: the engine has absorbed the warm-up and
/// validation rows.
#[derive(Debug)]
pub struct TuneOutcome {
    pub engine: Engine,
    pub design: ModelDesign,
    pub n_warm: usize,
    pub reports: Vec<ConvergenceReport>,
    /// SMC records emitted along the validation stretch of the accepted attempt.
    pub validation: Vec<SnapshotRecord>,
}

/// One warm-up attempt: seed, stream the validation rows, and compare with
/// batch fits at the checkpoints.
pub fn validation_pass(
    data: &DesignedData,
    n_warm: usize,
    plan: &WarmupPlan,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Engine, ConvergenceReport, Vec<SnapshotRecord>)> {
    let (mut engine, _) = warmup_seed(&data.y, &data.c, n_warm, cfg, seed)?;
    let checkpoints = plan.checkpoints_for(n_warm);
    let labels = cfg.labels();
    let compared: Vec<String> = labels
        .iter()
        .enumerate()
        .filter(|(j, _)| !cfg.is_auxiliary(*j))
        .map(|(_, n)| n.clone())
        .collect();
    let end = *checkpoints.last().expect("at least one checkpoint");
    if data.y.len() < end {
        return Err(Error::Config(format!(
            "validation needs {end} rows, stream has {}",
            data.y.len()
        )));
    }
    let mut smc = Vec::new();
    let mut mcmc = Vec::new();
    let mut trace = Vec::new();
    let batch_root = RandomStream::new(seed).substream(2);
    for i in n_warm..end {
        engine.step(data.y[i], data.c.row(i))?;
        let n = i + 1;
        let rec = engine.snapshot()?.record()?;
        if checkpoints.contains(&n) {
            smc.push(rec.clone());
            let mut s = batch_root.substream(n as u64);
            let chain = cfg.batch_chain(&data.y[..n], &data.c.head(n), cfg.particles, &mut s)?;
            mcmc.push(chain_record(&chain, &labels, n as u64)?);
        }
        trace.push(rec);
    }
    let report = validate_convergence(n_warm, &smc, &mcmc, &compared, plan.threshold)?;
    Ok((engine, report, trace))
}

/// Repeats seeding and validation, growing n_warm by the growth factor, until
/// the verdict is converging or the retries run out.
pub fn autotune(
    plan: &WarmupPlan,
    source: &mut dyn WarmupSource,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<TuneOutcome> {
    cfg.validate()?;
    plan.validate(cfg.layout.total())?;
    let mut reports = Vec::new();
    for attempt in 0..=plan.max_retries {
        let n_warm = plan.n_warm_at(attempt);
        let end = *plan.checkpoints_for(n_warm).last().expect("checkpoint");
        let data = source.load(n_warm, end)?;
        check_len("design width", cfg.layout.total(), data.design.layout().total())?;
        let (engine, report, validation) = validation_pass(&data, n_warm, plan, cfg, seed)?;
        let ok = report.verdict == Verdict::Converging;
        reports.push(report);
        if ok {
            return Ok(TuneOutcome {
                engine,
                design: data.design,
                n_warm,
                reports,
                validation,
            });
        }
    }
    let last = reports.pop().expect("at least one attempt");
    Err(Error::Tuning {
        attempts: plan.max_retries + 1,
        max_gap: last.max_gap,
        report: Box::new(last),
    })
}
