//! Binary and count responses: random-walk Metropolis-Hastings moves over
//! the stored data, with Gibbs updates of random-effect variances.

use serde::{Deserialize, Serialize};

use crate::design::BlockLayout;
use crate::error::{check_len, Error, Result};
use crate::family::ExponentialFamily;
use crate::hyper::Hyperparameters;
use crate::linalg::{dot, quad_form, spectral_decompose, Matrix};
use crate::random::{mvn_spectral_from_normals, InverseGammaParams, RandomStream};
use crate::smc::{ParticleMatrix, StreamModel};

/// Every observation seen so far; the MH move needs the full data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataBuffer {
    y: Vec<f64>,
    c: Matrix,
}

impl DataBuffer {
    pub fn new(p: usize) -> Self {
        DataBuffer {
            y: Vec::new(),
            c: Matrix::with_cols(p),
        }
    }

    pub fn from_batch(y: &[f64], c: &Matrix) -> Result<Self> {
        check_len("batch response length", c.rows(), y.len())?;
        Ok(DataBuffer {
            y: y.to_vec(),
            c: c.clone(),
        })
    }

    pub fn push(&mut self, y: f64, c: &[f64]) -> Result<()> {
        self.c.push_row(c)?;
        self.y.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &Matrix {
        &self.c
    }

    /// C θ over the first `theta.len()` columns.
    pub fn linear_predictor(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| dot(self.c.row(i), theta)).collect()
    }
}

/// Row layout of a generalized-model particle: coefficients (P), σ²_u (R), a_u (R).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlmLayout {
    pub blocks: BlockLayout,
}

impl GlmLayout {
    pub fn new(blocks: BlockLayout) -> Self {
        GlmLayout { blocks }
    }

    pub fn coefficients(&self) -> usize {
        self.blocks.total()
    }

    pub fn sigma2_u(&self, r: usize) -> usize {
        self.coefficients() + r
    }

    pub fn a_u(&self, r: usize) -> usize {
        self.coefficients() + self.blocks.n_blocks() + r
    }

    /// d = P + 2R.
    pub fn dim(&self) -> usize {
        self.coefficients() + 2 * self.blocks.n_blocks()
    }

    pub fn labels(&self, coef: &[String], blocks: &[String]) -> Vec<String> {
        let mut out = coef.to_vec();
        out.extend(blocks.iter().map(|b| format!("sigma2_u.{b}")));
        out.extend(blocks.iter().map(|b| format!("a_u.{b}")));
        out
    }

    pub fn is_auxiliary(&self, j: usize) -> bool {
        self.blocks.n_blocks() > 0 && j >= self.a_u(0) && j < self.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub upsilon: f64,
    pub target_accept: f64,
    pub adapt: bool,
    pub adapt_rate: f64,
    /// Refresh variance rows only for accepted proposals.
    pub strict_listing: bool,
}

impl MhConfig {
    pub fn new(upsilon: f64) -> Result<Self> {
        let cfg = MhConfig {
            upsilon,
            target_accept: 0.23,
            adapt: true,
            adapt_rate: 0.05,
            strict_listing: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("υ = {} must be positive", self.upsilon)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0,1)".into()));
        }
        if !(self.adapt_rate > 0.0) {
            return Err(Error::InvalidParameter("adaptation rate must be positive".into()));
        }
        Ok(())
    }
}

const UPSILON_MIN: f64 = 1e-6;
const UPSILON_MAX: f64 = 1e6;

/// log υ ← log υ + rate·(accept_rate − target), clamped to [1e-6, 1e6].
pub fn adapt_upsilon(cfg: MhConfig, accept_rate: f64) -> MhConfig {
    if !cfg.adapt {
        return cfg;
    }
    let log_u = cfg.upsilon.ln() + cfg.adapt_rate * (accept_rate - cfg.target_accept);
    MhConfig {
        upsilon: log_u.exp().clamp(UPSILON_MIN, UPSILON_MAX),
        ..cfg
    }
}

/// Per-particle y·η − b(η) with η = coefficientsᵀ c.
pub fn glm_loglik_increment(
    family: ExponentialFamily,
    layout: &GlmLayout,
    theta: &ParticleMatrix,
    y: f64,
    c: &[f64],
) -> Result<Vec<f64>> {
    check_len("particle dimension", layout.dim(), theta.dim())?;
    let p = layout.coefficients();
    check_len("design row", p, c.len())?;
    let eta: Vec<f64> = theta.columns().map(|col| dot(&col[..p], c)).collect();
    family.loglik_increment(y, &eta)
}

/// Log acceptance ratio of a random-walk proposal, written as differences so
/// that swapping `current` and `proposed` negates it exactly.
///
/// yᵀ(η′ − η) − 1ᵀ(b(η′) − b(η)) + ½(βᵀΣ⁻¹β − β′ᵀΣ⁻¹β′) + (β′ − β)ᵀΣ⁻¹μ
/// + Σ_r ½(‖u_r‖² − ‖u′_r‖²)/σ²_ur.
pub fn mh_log_ratio(
    family: ExponentialFamily,
    buffer: &DataBuffer,
    blocks: &BlockLayout,
    hyper: &Hyperparameters,
    current: &[f64],
    proposed: &[f64],
    sigma2_u: &[f64],
) -> Result<f64> {
    let eta = buffer.linear_predictor(current);
    let eta_rw = buffer.linear_predictor(proposed);
    log_ratio_from_eta(family, buffer, blocks, hyper, current, proposed, &eta, &eta_rw, sigma2_u)
}

#[allow(clippy::too_many_arguments)]
fn log_ratio_from_eta(
    family: ExponentialFamily,
    buffer: &DataBuffer,
    blocks: &BlockLayout,
    hyper: &Hyperparameters,
    current: &[f64],
    proposed: &[f64],
    eta: &[f64],
    eta_rw: &[f64],
    sigma2_u: &[f64],
) -> Result<f64> {
    let p_total = blocks.total();
    check_len("current state", p_total, current.len())?;
    check_len("proposed state", p_total, proposed.len())?;
    check_len("block variances", blocks.n_blocks(), sigma2_u.len())?;
    let p = blocks.p;
    let mut ydiff = 0.0;
    let mut bdiff = 0.0;
    for ((&y, &e0), &e1) in buffer.y().iter().zip(eta).zip(eta_rw) {
        ydiff += y * (e1 - e0);
        bdiff += family.b(e1) - family.b(e0);
    }
    let sbi = hyper.sigma_beta_inv();
    let prior = 0.5 * (quad_form(&current[..p], sbi)? - quad_form(&proposed[..p], sbi)?);
    let step: Vec<f64> = proposed[..p].iter().zip(&current[..p]).map(|(a, b)| a - b).collect();
    let drift = dot(&step, hyper.sigma_beta_inv_mu());
    let mut lambda = ydiff - bdiff + prior + drift;
    for (r, &s2u) in sigma2_u.iter().enumerate() {
        let range = blocks.block_range(r);
        let ss0: f64 = current[range.clone()].iter().map(|x| x * x).sum();
        let ss1: f64 = proposed[range].iter().map(|x| x * x).sum();
        lambda += 0.5 * (ss0 - ss1) / s2u;
    }
    Ok(lambda)
}

fn ig(shape: f64, rate: f64) -> Result<InverseGammaParams> {
    InverseGammaParams::new(shape, rate).map_err(|_| Error::Corrupted(format!("Inverse-Gamma({shape}, {rate})")))
}

/// Gibbs draws (a_ur, σ²_ur) for every block of one column.
pub(crate) fn block_variance_draws(
    blocks: &BlockLayout,
    hyper: &Hyperparameters,
    coef: &[f64],
    sigma2_u: &mut [f64],
    a_u: &mut [f64],
    s: &mut RandomStream,
) -> Result<()> {
    for r in 0..blocks.n_blocks() {
        let su = hyper.s_u()[r];
        a_u[r] = s.inverse_gamma(ig(1.0, 1.0 / sigma2_u[r] + 1.0 / (su * su))?);
        let range = blocks.block_range(r);
        let k = range.len() as f64;
        let ss: f64 = coef[range].iter().map(|x| x * x).sum();
        sigma2_u[r] = s.inverse_gamma(ig(0.5 * (k + 1.0), 1.0 / a_u[r] + 0.5 * ss)?);
    }
    Ok(())
}

/// One MH step per column: joint proposal θ′ = θ + υz/√n over all P
/// coefficients, accepted iff λ > log u, followed by the block-variance draws.
/// Column m draws from `cycle.substream(m)`. Returns the fraction accepted.
pub fn mh_move_glmm(
    family: ExponentialFamily,
    layout: &GlmLayout,
    theta: &mut ParticleMatrix,
    buffer: &DataBuffer,
    hyper: &Hyperparameters,
    cfg: &MhConfig,
    cycle: &RandomStream,
) -> Result<f64> {
    check_len("particle dimension", layout.dim(), theta.dim())?;
    check_len("buffer width", layout.coefficients(), buffer.design().cols())?;
    if buffer.is_empty() {
        return Err(Error::InvalidParameter("MH move needs a nonempty data buffer".into()));
    }
    let bl = &layout.blocks;
    let p_total = bl.total();
    let r_n = bl.n_blocks();
    let scale = cfg.upsilon / (buffer.len() as f64).sqrt();
    let mut accepted = 0usize;
    for (m, col) in theta.columns_mut().enumerate() {
        let mut s = cycle.substream(m as u64);
        let z = s.std_normal_vec(p_total);
        let (coef, rest) = col.split_at_mut(p_total);
        let (s2u, au) = rest.split_at_mut(r_n);
        if let Some(v) = s2u.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Corrupted(format!("σ²_u = {v}")));
        }
        let proposal: Vec<f64> = coef.iter().zip(&z).map(|(b, z)| b + scale * z).collect();
        let eta = buffer.linear_predictor(coef);
        let eta_rw = buffer.linear_predictor(&proposal);
        let lambda = log_ratio_from_eta(family, buffer, bl, hyper, coef, &proposal, &eta, &eta_rw, s2u)?;
        if lambda.is_nan() || lambda == f64::INFINITY {
            return Err(Error::Corrupted(format!("MH log-ratio {lambda} in column {m}")));
        }
        let u = s.uniform();
        let accept = lambda > u.ln();
        if accept {
            coef.copy_from_slice(&proposal);
            accepted += 1;
        }
        if accept || !cfg.strict_listing {
            block_variance_draws(bl, hyper, coef, s2u, au, &mut s)?;
        }
    }
    Ok(accepted as f64 / theta.particles() as f64)
}

/// Fixed-effects-only move.
pub fn mh_move_glm(
    family: ExponentialFamily,
    theta: &mut ParticleMatrix,
    buffer: &DataBuffer,
    hyper: &Hyperparameters,
    cfg: &MhConfig,
    cycle: &RandomStream,
) -> Result<f64> {
    let layout = GlmLayout::new(BlockLayout::fixed(theta.dim()));
    mh_move_glmm(family, &layout, theta, buffer, hyper, cfg, cycle)
}

/// Prior draws for starting without warm-up.
pub fn glm_prior_particles(
    layout: &GlmLayout,
    hyper: &Hyperparameters,
    m: usize,
    s: &mut RandomStream,
) -> Result<ParticleMatrix> {
    hyper.check_layout(&layout.blocks)?;
    let dec = spectral_decompose(hyper.sigma_beta_inv(), "Σ_β⁻¹")?;
    let bl = &layout.blocks;
    let mut theta = ParticleMatrix::zeros(layout.dim(), m);
    for col in theta.columns_mut() {
        let z = s.std_normal_vec(bl.p);
        col[..bl.p].copy_from_slice(&mvn_spectral_from_normals(&dec, hyper.sigma_beta_inv_mu(), &z)?);
        for r in 0..bl.n_blocks() {
            let su = hyper.s_u()[r];
            let au = s.inverse_gamma(ig(0.5, 1.0 / (su * su))?);
            let s2u = s.inverse_gamma(ig(0.5, 1.0 / au)?);
            col[layout.a_u(r)] = au;
            col[layout.sigma2_u(r)] = s2u;
            for i in bl.block_range(r) {
                col[i] = s2u.sqrt() * s.std_normal();
            }
        }
    }
    Ok(theta)
}

/// Generalized-response state for the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    family: ExponentialFamily,
    layout: GlmLayout,
    hyper: Hyperparameters,
    buffer: DataBuffer,
    mh: MhConfig,
    labels: Vec<String>,
}

impl GlmModel {
    pub fn new(
        family: ExponentialFamily,
        layout: GlmLayout,
        hyper: Hyperparameters,
        buffer: DataBuffer,
        mh: MhConfig,
        labels: Vec<String>,
    ) -> Result<Self> {
        hyper.check_layout(&layout.blocks)?;
        mh.validate()?;
        check_len("buffer width", layout.coefficients(), buffer.design().cols())?;
        check_len("parameter labels", layout.dim(), labels.len())?;
        Ok(GlmModel {
            family,
            layout,
            hyper,
            buffer,
            mh,
            labels,
        })
    }

    pub fn family(&self) -> ExponentialFamily {
        self.family
    }

    pub fn layout(&self) -> &GlmLayout {
        &self.layout
    }

    pub fn buffer(&self) -> &DataBuffer {
        &self.buffer
    }

    pub fn mh(&self) -> &MhConfig {
        &self.mh
    }
}

impl StreamModel for GlmModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn n(&self) -> u64 {
        self.buffer.len() as u64
    }

    fn loglik_increment(&self, theta: &ParticleMatrix, y: f64, c: &[f64]) -> Result<Vec<f64>> {
        glm_loglik_increment(self.family, &self.layout, theta, y, c)
    }

    fn absorb(&mut self, y: f64, c: &[f64]) -> Result<()> {
        self.family.check_support(y)?;
        self.buffer.push(y, c)
    }

    fn move_particles(&mut self, theta: &mut ParticleMatrix, cycle: &RandomStream) -> Result<Option<f64>> {
        let rate = mh_move_glmm(self.family, &self.layout, theta, &self.buffer, &self.hyper, &self.mh, cycle)?;
        self.mh = adapt_upsilon(self.mh, rate);
        Ok(Some(rate))
    }
}
