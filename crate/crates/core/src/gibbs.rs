//! Batch MCMC over a fixed dataset. Used to seed the particle system at
//! warm-up and as the reference the online engines are checked against.
//!
//! The code works from the raw design matrix (residual sums, direct
//! log-posterior evaluation) rather than the streaming accumulators, so it is
//! an independent route to the same posterior.

use serde::{Deserialize, Serialize};

use crate::design::BlockLayout;
use crate::error::{check_len, Error, Result};
use crate::family::ExponentialFamily;
use crate::hyper::Hyperparameters;
use crate::linalg::{dot, quad_form, spectral_decompose, Matrix, SymMatrix};
use crate::model_glm::block_variance_draws;
use crate::random::{mvn_spectral_from_normals, InverseGammaParams, RandomStream};
use crate::smc::ParticleMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub n_warm: usize,
    pub n_kept: usize,
    /// Iterations per kept draw.
    pub thin: usize,
    /// Tune the MH proposal during the warm phase.
    pub adapt: bool,
    /// Hold σ²_ε at this value instead of sampling it.
    #[serde(default)]
    pub fix_sigma2_eps: Option<f64>,
    /// Hold the coefficient vector at this value instead of sampling it.
    #[serde(default)]
    pub fix_coefficients: Option<Vec<f64>>,
}

impl ChainSettings {
    pub fn new(n_warm: usize, n_kept: usize) -> Self {
        ChainSettings {
            n_warm,
            n_kept,
            thin: 1,
            adapt: true,
            fix_sigma2_eps: None,
            fix_coefficients: None,
        }
    }

    pub fn thin(mut self, thin: usize) -> Self {
        self.thin = thin.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_kept == 0 {
            return Err(Error::InvalidParameter("chain must keep at least one draw".into()));
        }
        Ok(())
    }
}

/// Kept draws, one row per draw, columns in particle-row order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub draws: Matrix,
    pub n_warm: usize,
    pub n_kept: usize,
    /// Isotropic proposal scale reached during warm-up (MH chains only).
    pub upsilon: Option<f64>,
    /// Acceptance rate over kept iterations (MH chains only).
    pub accept_rate: Option<f64>,
}

impl ChainOutput {
    /// Draw g becomes particle column g.
    pub fn to_particles(&self) -> ParticleMatrix {
        let cols: Vec<Vec<f64>> = (0..self.draws.rows()).map(|g| self.draws.row(g).to_vec()).collect();
        ParticleMatrix::from_columns(&cols).expect("rows share a width")
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.column(j)
    }
}

fn ig(shape: f64, rate: f64) -> Result<InverseGammaParams> {
    InverseGammaParams::new(shape, rate).map_err(|_| Error::Corrupted(format!("Inverse-Gamma({shape}, {rate})")))
}

/// Gaussian linear model: gibbs_lmm with no random-effect blocks.
pub fn gibbs_lm(
    y: &[f64],
    x: &Matrix,
    hyper: &Hyperparameters,
    settings: &ChainSettings,
    s: &mut RandomStream,
) -> Result<ChainOutput> {
    gibbs_lmm(y, x, &BlockLayout::fixed(x.cols()), hyper, settings, s)
}

/// Gibbs sampler for the Gaussian linear mixed model. Draw columns follow
/// the Gaussian particle layout: coefficients, σ²_ε, a_ε, σ²_u, a_u.
pub fn gibbs_lmm(
    y: &[f64],
    c: &Matrix,
    layout: &BlockLayout,
    hyper: &Hyperparameters,
    settings: &ChainSettings,
    s: &mut RandomStream,
) -> Result<ChainOutput> {
    settings.validate()?;
    check_len("response length", c.rows(), y.len())?;
    check_len("design width", layout.total(), c.cols())?;
    hyper.check_layout(layout)?;
    let n = y.len();
    let p = layout.p;
    let p_total = layout.total();
    let r_n = layout.n_blocks();
    let ctc = c.gram();
    let cty = c.t_mul_vec(y)?;
    let s_eps = hyper.s_eps();

    let mut coef = vec![0.0; p_total];
    coef[..p].copy_from_slice(hyper.mu_beta());
    if let Some(fixed) = &settings.fix_coefficients {
        check_len("fixed coefficients", p_total, fixed.len())?;
        coef.copy_from_slice(fixed);
    }
    let mut sigma2 = settings.fix_sigma2_eps.unwrap_or(s_eps * s_eps);
    let mut a = s_eps;
    let mut s2u = vec![1.0; r_n];
    let mut au = vec![1.0; r_n];

    let dim = p_total + 2 + 2 * r_n;
    let mut draws = Matrix::zeros(settings.n_kept, dim);
    let total = settings.n_warm + settings.n_kept * settings.thin;
    let mut kept = 0;
    for t in 0..total {
        if settings.fix_coefficients.is_none() {
            let mut omega = SymMatrix::zeros(p_total);
            for i in 0..p_total {
                for j in i..p_total {
                    let mut v = ctc.get(i, j) / sigma2;
                    if i < p && j < p {
                        v += hyper.sigma_beta_inv().get(i, j);
                    }
                    omega.set(i, j, v);
                }
            }
            for (r, &v) in s2u.iter().enumerate() {
                for i in layout.block_range(r) {
                    omega.set(i, i, omega.get(i, i) + 1.0 / v);
                }
            }
            let mut w: Vec<f64> = cty.iter().map(|v| v / sigma2).collect();
            for (wi, m) in w.iter_mut().zip(hyper.sigma_beta_inv_mu()) {
                *wi += m;
            }
            let dec = spectral_decompose(&omega, "Ω")?;
            dec.check_conditioning("Ω")?;
            let z = s.std_normal_vec(p_total);
            coef = mvn_spectral_from_normals(&dec, &w, &z)?;
        }
        if settings.fix_sigma2_eps.is_none() {
            a = s.inverse_gamma(ig(1.0, 1.0 / sigma2 + 1.0 / (s_eps * s_eps))?);
            let rss: f64 = (0..n)
                .map(|i| {
                    let e = y[i] - dot(c.row(i), &coef);
                    e * e
                })
                .sum();
            sigma2 = s.inverse_gamma(ig(0.5 * (n as f64 + 1.0), 1.0 / a + 0.5 * rss)?);
        }
        block_variance_draws(layout, hyper, &coef, &mut s2u, &mut au, s)?;

        if t >= settings.n_warm && (t - settings.n_warm + 1).is_multiple_of(settings.thin) {
            let mut row = coef.clone();
            row.push(sigma2);
            row.push(a);
            row.extend_from_slice(&s2u);
            row.extend_from_slice(&au);
            for (j, v) in row.into_iter().enumerate() {
                draws.set(kept, j, v);
            }
            kept += 1;
        }
    }
    Ok(ChainOutput {
        draws,
        n_warm: settings.n_warm,
        n_kept: settings.n_kept,
        upsilon: None,
        accept_rate: None,
    })
}

/// log p(θ | y) up to a constant, evaluated directly.
pub fn glmm_log_posterior(
    family: ExponentialFamily,
    y: &[f64],
    c: &Matrix,
    layout: &BlockLayout,
    hyper: &Hyperparameters,
    coef: &[f64],
    sigma2_u: &[f64],
) -> Result<f64> {
    let eta = c.mul_vec(coef)?;
    log_posterior_from_eta(family, y, &eta, layout, hyper, coef, sigma2_u)
}

fn log_posterior_from_eta(
    family: ExponentialFamily,
    y: &[f64],
    eta: &[f64],
    layout: &BlockLayout,
    hyper: &Hyperparameters,
    coef: &[f64],
    sigma2_u: &[f64],
) -> Result<f64> {
    let p = layout.p;
    let loglik: f64 = y.iter().zip(eta).map(|(&yi, &e)| yi * e - family.b(e)).sum();
    let dev: Vec<f64> = coef[..p].iter().zip(hyper.mu_beta()).map(|(b, m)| b - m).collect();
    let mut lp = loglik - 0.5 * quad_form(&dev, hyper.sigma_beta_inv())?;
    for (r, &v) in sigma2_u.iter().enumerate() {
        let ss: f64 = coef[layout.block_range(r)].iter().map(|x| x * x).sum();
        lp -= 0.5 * ss / v;
    }
    Ok(lp)
}

const TARGET_ACCEPT: f64 = 0.23;

/// Symmetric square root of the sample covariance of `rows`, or None when
/// it is too degenerate to use.
fn covariance_root(rows: &[Vec<f64>]) -> Option<SymMatrix> {
    let n = rows.len();
    let p = rows.first()?.len();
    if n < 2 * p.max(10) {
        return None;
    }
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut cov = SymMatrix::zeros(p);
    for r in rows {
        let d: Vec<f64> = r.iter().zip(&mean).map(|(a, b)| a - b).collect();
        cov.add_outer_in_place(&d).ok()?;
    }
    let mut cov = cov.scaled(1.0 / (n - 1) as f64);
    let trace: f64 = (0..p).map(|i| cov.get(i, i)).sum();
    if !(trace > 0.0) {
        return None;
    }
    let jitter = 1e-6 * trace / p as f64;
    for i in 0..p {
        cov.set(i, i, cov.get(i, i) + jitter);
    }
    let dec = spectral_decompose(&cov, "proposal covariance").ok()?;
    Some(dec.map_eigenvalues(|d| d.max(0.0).sqrt()))
}

/// Random-walk Metropolis-within-Gibbs for logistic/Poisson (mixed) models.
///
/// The coefficient vector moves jointly; block variances get Gibbs draws
/// after every MH step. With `adapt`, the first half of the warm phase tunes
/// an isotropic scale υ (proposal sd υ/√n, reported in the output) toward
/// 23% acceptance and the second half switches to a proposal shaped by the
/// warm-phase draw covariance. The kernel is frozen while draws are kept.
/// Draw columns follow the generalized particle layout: coefficients, σ²_u, a_u.
#[allow(clippy::too_many_arguments)]
pub fn mh_gibbs_glmm(
    y: &[f64],
    c: &Matrix,
    layout: &BlockLayout,
    family: ExponentialFamily,
    hyper: &Hyperparameters,
    upsilon: f64,
    settings: &ChainSettings,
    s: &mut RandomStream,
) -> Result<ChainOutput> {
    settings.validate()?;
    check_len("response length", c.rows(), y.len())?;
    check_len("design width", layout.total(), c.cols())?;
    hyper.check_layout(layout)?;
    if !(upsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("υ = {upsilon} must be positive")));
    }
    for &yi in y {
        family.check_support(yi)?;
    }
    let n = y.len();
    let p = layout.p;
    let p_total = layout.total();
    let r_n = layout.n_blocks();
    let root_n = (n.max(1) as f64).sqrt();

    let mut coef = vec![0.0; p_total];
    coef[..p].copy_from_slice(hyper.mu_beta());
    let mut s2u = vec![1.0; r_n];
    let mut au = vec![1.0; r_n];
    // u = 0 is absorbing: the σ²_u draws shrink toward zero until every move is rejected.
    for v in &mut coef[p..] {
        *v = s.std_normal();
    }
    let mut eta = c.mul_vec(&coef)?;
    let mut lp = log_posterior_from_eta(family, y, &eta, layout, hyper, &coef, &s2u)?;

    let mut ups = upsilon;
    let mut ups_iso = upsilon;
    let mut shape: Option<SymMatrix> = None;
    let mut kappa = 2.38 / (p_total as f64).sqrt();
    let half = settings.n_warm / 2;
    let shaped_phase = settings.adapt && settings.n_warm >= 200;
    let refresh: Vec<usize> = (4..8).map(|k| k * settings.n_warm / 8).collect();
    let mut history: Vec<Vec<f64>> = Vec::new();

    let dim = p_total + 2 * r_n;
    let mut draws = Matrix::zeros(settings.n_kept, dim);
    let total = settings.n_warm + settings.n_kept * settings.thin;
    let mut kept = 0;
    let mut kept_accepts = 0usize;
    for t in 0..total {
        let warm = t < settings.n_warm;
        if shaped_phase && warm && refresh.contains(&t) {
            if t == refresh[0] {
                ups_iso = ups;
            }
            if let Some(root) = covariance_root(&history) {
                shape = Some(root);
            }
        }
        let z = s.std_normal_vec(p_total);
        let step: Vec<f64> = match &shape {
            Some(root) => root.mul_vec(&z)?.into_iter().map(|v| kappa * v).collect(),
            None => z.iter().map(|v| ups / root_n * v).collect(),
        };
        let proposal: Vec<f64> = coef.iter().zip(&step).map(|(a, b)| a + b).collect();
        let eta_rw = c.mul_vec(&proposal)?;
        let lp_rw = log_posterior_from_eta(family, y, &eta_rw, layout, hyper, &proposal, &s2u)?;
        let lambda = lp_rw - lp;
        if lambda.is_nan() {
            return Err(Error::Corrupted("MH log-ratio is NaN".into()));
        }
        let accept = lambda > s.uniform().ln();
        if accept {
            coef = proposal;
            eta = eta_rw;
        }
        block_variance_draws(layout, hyper, &coef, &mut s2u, &mut au, s)?;
        lp = log_posterior_from_eta(family, y, &eta, layout, hyper, &coef, &s2u)?;

        if warm && settings.adapt {
            let gain = (t as f64 + 1.0).powf(-0.6).max(0.01);
            let delta = gain * (if accept { 1.0 } else { 0.0 } - TARGET_ACCEPT);
            if shape.is_some() {
                kappa *= delta.exp();
            } else {
                ups = (ups * delta.exp()).clamp(1e-6, 1e6);
            }
            if t >= settings.n_warm / 4 {
                history.push(coef.clone());
            }
        }
        if !warm {
            kept_accepts += usize::from(accept);
            if (t - settings.n_warm + 1).is_multiple_of(settings.thin) {
                for (j, v) in coef.iter().chain(&s2u).chain(&au).enumerate() {
                    draws.set(kept, j, *v);
                }
                kept += 1;
            }
        }
    }
    if !shaped_phase || half == 0 {
        ups_iso = ups;
    }
    Ok(ChainOutput {
        draws,
        n_warm: settings.n_warm,
        n_kept: settings.n_kept,
        upsilon: Some(ups_iso),
        accept_rate: Some(kept_accepts as f64 / (settings.n_kept * settings.thin) as f64),
    })
}
