//! Particle system, weight bookkeeping and the generic resample-move cycle.

use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteDistribution;
use crate::error::{check_len, Error, Result};
use crate::output::f64_or_nan;
use crate::random::RandomStream;
use crate::resample::{should_resample, sum_of_squares, systematic_indices};

/// d×M matrix stored column by column so each particle is contiguous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleMatrix {
    d: usize,
    m: usize,
    data: Vec<f64>,
}

impl ParticleMatrix {
    pub fn zeros(d: usize, m: usize) -> Self {
        ParticleMatrix {
            d,
            m,
            data: vec![0.0; d * m],
        }
    }

    /// One inner vector per particle.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let d = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(d * cols.len());
        for c in cols {
            check_len("particle column", d, c.len())?;
            data.extend_from_slice(c);
        }
        Ok(ParticleMatrix { d, m: cols.len(), data })
    }

    /// One inner vector per parameter row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut out = Self::zeros(d, m);
        for (j, r) in rows.iter().enumerate() {
            check_len("particle row", m, r.len())?;
            for (k, &v) in r.iter().enumerate() {
                out.data[k * d + j] = v;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.m
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[k * self.d + j]
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|k| self.get(j, k)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d.max(1)).take(self.m)
    }

    pub fn columns_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let m = self.m;
        self.data.chunks_mut(self.d.max(1)).take(m)
    }
}

/// Resample decision of one cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleEvent {
    /// pᵀp before any resampling.
    pub ptp: f64,
    pub resampled: bool,
}

/// Particles θ with log-weights ℓ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    theta: ParticleMatrix,
    logw: Vec<f64>,
    /// Column index each particle descends from at the most recent resampling.
    ancestors: Vec<usize>,
    cycle: u64,
}

impl ParticleSystem {
    /// Equal weights log(1/M).
    pub fn new(theta: ParticleMatrix) -> Self {
        let m = theta.particles();
        ParticleSystem {
            logw: vec![-(m as f64).ln(); m],
            ancestors: (0..m).collect(),
            theta,
            cycle: 0,
        }
    }

    pub fn with_log_weights(theta: ParticleMatrix, logw: Vec<f64>) -> Result<Self> {
        check_len("log-weights", theta.particles(), logw.len())?;
        let mut ps = Self::new(theta);
        ps.logw = logw;
        Ok(ps)
    }

    pub fn theta(&self) -> &ParticleMatrix {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut ParticleMatrix {
        &mut self.theta
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.logw
    }

    pub fn ancestors(&self) -> &[usize] {
        &self.ancestors
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn particles(&self) -> usize {
        self.theta.particles()
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub(crate) fn advance_cycle(&mut self) {
        self.cycle += 1;
    }

    /// exp(ℓ − max ℓ) / Σ exp(ℓ − max ℓ).
    pub fn normalize_weights(&self) -> Result<Vec<f64>> {
        if let Some(x) = self.logw.iter().find(|x| !x.is_finite()) {
            return Err(Error::Corrupted(format!("log-weight {x}")));
        }
        let max = self.logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.logw.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    /// ℓ ← ℓ + increments.
    pub fn weight_update(&mut self, increments: &[f64]) -> Result<()> {
        check_len("weight increments", self.logw.len(), increments.len())?;
        if let Some(x) = increments.iter().find(|x| !x.is_finite()) {
            return Err(Error::Corrupted(format!("log-likelihood increment {x}")));
        }
        for (l, &d) in self.logw.iter_mut().zip(increments) {
            *l += d;
        }
        Ok(())
    }

    /// Resamples systematically with offset `u` and resets ℓ to log(1/M).
    pub fn resample_with_offset(&mut self, p: &[f64], u: f64) -> Result<()> {
        let idx = systematic_indices(p, u)?;
        self.theta = crate::resample::gather_columns(&self.theta, &idx)?;
        let m = self.particles();
        self.logw = vec![-(m as f64).ln(); m];
        self.ancestors = idx;
        Ok(())
    }

    /// Resamples when pᵀp > tau.
    pub fn maybe_resample(&mut self, tau: f64, s: &mut RandomStream) -> Result<ResampleEvent> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("resampling threshold {tau} must be positive")));
        }
        let p = self.normalize_weights()?;
        let ptp = sum_of_squares(&p);
        let resampled = should_resample(&p, tau);
        if resampled {
            let u = s.uniform();
            self.resample_with_offset(&p, u)?;
        }
        Ok(ResampleEvent { ptp, resampled })
    }

    pub fn snapshot(&self, n: u64, names: &[String]) -> Result<PosteriorSnapshot> {
        check_len("parameter labels", self.dim(), names.len())?;
        Ok(PosteriorSnapshot {
            n,
            names: names.to_vec(),
            rows: (0..self.dim()).map(|j| self.theta.row(j)).collect(),
            p: self.normalize_weights()?,
            families: self.ancestors.clone(),
            diagnostics: None,
        })
    }
}

/// Diagnostics of one observation cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub ptp: f64,
    pub resampled: bool,
    pub accept_rate: Option<f64>,
}

/// Posterior summaries of one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    #[serde(deserialize_with = "f64_or_nan")]
    pub mean: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub sd: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub lo: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub hi: f64,
    /// Monte Carlo standard error of `mean`.
    #[serde(deserialize_with = "f64_or_nan")]
    pub se: f64,
}

/// Serializable per-cycle record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub n: u64,
    pub params: Vec<ParamSummary>,
    #[serde(default)]
    pub ptp: Option<f64>,
    #[serde(default)]
    pub resampled: Option<bool>,
    #[serde(default)]
    pub accept_rate: Option<f64>,
}

impl SnapshotRecord {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Discrete posterior views sharing one probability vector.
#[derive(Clone, Debug)]
pub struct PosteriorSnapshot {
    pub n: u64,
    pub names: Vec<String>,
    rows: Vec<Vec<f64>>,
    p: Vec<f64>,
    families: Vec<usize>,
    pub diagnostics: Option<CycleDiagnostics>,
}

impl PosteriorSnapshot {
    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn distribution(&self, j: usize) -> DiscreteDistribution {
        DiscreteDistribution::new(self.rows[j].clone(), self.p.clone()).expect("normalized weights")
    }

    /// Standard error of the weighted mean of row j, treating particles that
    /// share an ancestor at the last resampling as one correlated cluster.
    pub fn mean_se(&self, j: usize) -> f64 {
        let row = &self.rows[j];
        let mean: f64 = row.iter().zip(&self.p).map(|(a, p)| a * p).sum();
        let mut cluster = vec![0.0; self.p.len()];
        for ((a, p), &f) in row.iter().zip(&self.p).zip(&self.families) {
            cluster[f] += p * (a - mean);
        }
        cluster.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn summary(&self, j: usize) -> Result<ParamSummary> {
        let d = self.distribution(j);
        let (lo, hi) = d.credible_interval(0.95)?;
        Ok(ParamSummary {
            name: self.names[j].clone(),
            mean: d.mean(),
            sd: d.sd(),
            lo,
            hi,
            se: self.mean_se(j),
        })
    }

    pub fn record(&self) -> Result<SnapshotRecord> {
        let params = (0..self.names.len()).map(|j| self.summary(j)).collect::<Result<_>>()?;
        Ok(SnapshotRecord {
            n: self.n,
            params,
            ptp: self.diagnostics.map(|d| d.ptp),
            resampled: self.diagnostics.map(|d| d.resampled),
            accept_rate: self.diagnostics.and_then(|d| d.accept_rate),
        })
    }
}

/// Model-specific pieces of the cycle.
pub trait StreamModel {
    fn dim(&self) -> usize;
    fn labels(&self) -> Vec<String>;
    /// Observations absorbed so far.
    fn n(&self) -> u64;
    /// Per-particle log p(y_new | θ_m) up to a constant shared by all particles.
    fn loglik_increment(&self, theta: &ParticleMatrix, y: f64, c: &[f64]) -> Result<Vec<f64>>;
    /// Folds the new observation into the model state.
    fn absorb(&mut self, y: f64, c: &[f64]) -> Result<()>;
    /// Refreshes every column; particle m draws from `cycle.substream(m)`.
    /// Returns the acceptance rate for Metropolis moves.
    fn move_particles(&mut self, theta: &mut ParticleMatrix, cycle: &RandomStream) -> Result<Option<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub tau: f64,
    pub moves: bool,
}

impl EngineOptions {
    /// τ = 2/M with moves enabled.
    pub fn default_for(m: usize) -> Self {
        EngineOptions {
            tau: 2.0 / m as f64,
            moves: true,
        }
    }
}

const RESAMPLE_SUBSTREAM: u64 = u64::MAX;

/// Weight update, resample check, model update and move, once per observation.
#[derive(Clone, Debug)]
pub struct SmcEngine<M> {
    particles: ParticleSystem,
    model: M,
    options: EngineOptions,
    root: RandomStream,
    last: Option<CycleDiagnostics>,
}

impl<M: StreamModel> SmcEngine<M> {
    pub fn new(particles: ParticleSystem, model: M, options: EngineOptions, seed: u64) -> Result<Self> {
        check_len("particle dimension", model.dim(), particles.dim())?;
        Ok(SmcEngine {
            particles,
            model,
            options,
            root: RandomStream::new(seed),
            last: None,
        })
    }

    pub fn particles(&self) -> &ParticleSystem {
        &self.particles
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn seed(&self) -> u64 {
        self.root.seed()
    }

    pub fn n(&self) -> u64 {
        self.model.n()
    }

    pub fn last_diagnostics(&self) -> Option<CycleDiagnostics> {
        self.last
    }

    pub fn into_parts(self) -> (ParticleSystem, M) {
        (self.particles, self.model)
    }

    pub fn step(&mut self, y: f64, c: &[f64]) -> Result<CycleDiagnostics> {
        let cycle = self.root.substream(self.particles.cycle());
        let inc = self.model.loglik_increment(self.particles.theta(), y, c)?;
        self.particles.weight_update(&inc)?;
        let mut rs = cycle.substream(RESAMPLE_SUBSTREAM);
        let event = self.particles.maybe_resample(self.options.tau, &mut rs)?;
        self.model.absorb(y, c)?;
        let accept_rate = if self.options.moves {
            self.model.move_particles(self.particles.theta_mut(), &cycle)?
        } else {
            None
        };
        self.particles.advance_cycle();
        let diag = CycleDiagnostics {
            ptp: event.ptp,
            resampled: event.resampled,
            accept_rate,
        };
        self.last = Some(diag);
        Ok(diag)
    }

    pub fn snapshot(&self) -> Result<PosteriorSnapshot> {
        let mut s = self.particles.snapshot(self.model.n(), &self.model.labels())?;
        s.diagnostics = self.last;
        Ok(s)
    }
}

/// Restores an engine from checkpointed parts.
pub fn restore_engine<M: StreamModel>(
    particles: ParticleSystem,
    model: M,
    options: EngineOptions,
    seed: u64,
    last: Option<CycleDiagnostics>,
) -> Result<SmcEngine<M>> {
    let mut e = SmcEngine::new(particles, model, options, seed)?;
    e.last = last;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(logw: Vec<f64>) -> ParticleSystem {
        let m = logw.len();
        let theta = ParticleMatrix::from_rows(&[(0..m).map(|k| k as f64).collect()]).unwrap();
        ParticleSystem::with_log_weights(theta, logw).unwrap()
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(system(vec![-3.0; 4]).normalize_weights().unwrap(), vec![0.25; 4]);
        let p = system(vec![0.0, -1e6]).normalize_weights().unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        let p = system(vec![0.0, 3f64.ln()]).normalize_weights().unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(matches!(system(vec![0.0, f64::NAN]).normalize_weights(), Err(Error::Corrupted(_))));
    }

    #[test]
    fn weight_update_examples() {
        let mut ps = system(vec![-(2f64.ln()); 2]);
        ps.weight_update(&[0.0, 0.0]).unwrap();
        assert_eq!(ps.normalize_weights().unwrap(), vec![0.5, 0.5]);
        ps.weight_update(&[5.0, 5.0]).unwrap();
        assert_eq!(ps.normalize_weights().unwrap(), vec![0.5, 0.5]);
        ps.weight_update(&[2f64.ln(), 0.0]).unwrap();
        let p = ps.normalize_weights().unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(ps.weight_update(&[f64::INFINITY, 0.0]).is_err());
        assert!(ps.weight_update(&[0.0]).is_err());
    }

    #[test]
    fn resample_trigger() {
        let mut s = RandomStream::new(1);
        let mut ps = system(vec![0.0; 1000]);
        assert!(!ps.maybe_resample(2e-3, &mut s).unwrap().resampled);

        let logw = [0.7f64, 0.1, 0.1, 0.1].iter().map(|p| p.ln()).collect();
        let mut ps = system(logw);
        let ev = ps.maybe_resample(0.5, &mut s).unwrap();
        assert!((ev.ptp - 0.52).abs() < 1e-12);
        assert!(ev.resampled);
        assert!(ps.log_weights().iter().all(|&l| l == -(4f64.ln())));

        let mut ps = system(vec![-1e9, 0.0, -1e9]);
        assert!(ps.maybe_resample(2.0 / 3.0, &mut s).unwrap().resampled);
        assert_eq!(ps.theta().row(0), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn snapshot_examples() {
        let theta = ParticleMatrix::from_columns(&vec![vec![2.0, -1.0]; 5]).unwrap();
        let snap = ParticleSystem::new(theta).snapshot(3, &["a".into(), "b".into()]).unwrap();
        let s = snap.summary(1).unwrap();
        assert_eq!((s.mean, s.lo, s.hi), (-1.0, -1.0, -1.0));
        assert_eq!(snap.n, 3);

        let ps = system(vec![0.0, 1.0, 2.0]);
        let snap = ps.snapshot(0, &["x".into()]).unwrap();
        let p = ps.normalize_weights().unwrap();
        let direct: f64 = p.iter().zip([0.0, 1.0, 2.0]).map(|(p, a)| p * a).sum();
        assert!((snap.summary(0).unwrap().mean - direct).abs() < 1e-15);
        assert!(ps.snapshot(0, &[]).is_err());
    }

    #[test]
    fn row_and_column_views_agree() {
        let pm = ParticleMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(pm.column(1), &[2.0, 5.0]);
        assert_eq!(pm.row(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(pm.columns().count(), 3);
    }
}
