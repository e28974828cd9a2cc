//! Gaussian-response linear and linear mixed models. Everything the move step
//! knows about past data is held in [`SufficientStats`].

use serde::{Deserialize, Serialize};

use crate::design::BlockLayout;
use crate::error::{check_len, Error, Result};
use crate::hyper::Hyperparameters;
use crate::linalg::{dot, spectral_decompose};
use crate::random::{mvn_spectral_from_normals, InverseGammaParams, RandomStream};
use crate::smc::{ParticleMatrix, StreamModel};
use crate::suffstats::SufficientStats;

/// Row layout of a Gaussian particle: coefficients (P), σ²_ε, a_ε, σ²_u (R), a_u (R).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianLayout {
    pub blocks: BlockLayout,
}

impl GaussianLayout {
    pub fn new(blocks: BlockLayout) -> Self {
        GaussianLayout { blocks }
    }

    pub fn coefficients(&self) -> usize {
        self.blocks.total()
    }

    pub fn sigma2_eps(&self) -> usize {
        self.coefficients()
    }

    pub fn a_eps(&self) -> usize {
        self.coefficients() + 1
    }

    pub fn sigma2_u(&self, r: usize) -> usize {
        self.coefficients() + 2 + r
    }

    pub fn a_u(&self, r: usize) -> usize {
        self.coefficients() + 2 + self.blocks.n_blocks() + r
    }

    /// d = P + 2 + 2R.
    pub fn dim(&self) -> usize {
        self.coefficients() + 2 + 2 * self.blocks.n_blocks()
    }

    /// Parameter labels given coefficient and block names.
    pub fn labels(&self, coef: &[String], blocks: &[String]) -> Vec<String> {
        let mut out = coef.to_vec();
        out.push("sigma2_eps".into());
        out.push("a_eps".into());
        out.extend(blocks.iter().map(|b| format!("sigma2_u.{b}")));
        out.extend(blocks.iter().map(|b| format!("a_u.{b}")));
        out
    }

    /// Whether row j is an auxiliary a-variable.
    pub fn is_auxiliary(&self, j: usize) -> bool {
        j == self.a_eps() || (j >= self.a_u(0) && j < self.dim())
    }
}

/// Per-particle Gaussian log density of y, less ½ log 2π.
///
/// The y²/(2σ²) term stays in: it differs between particles whose σ² differ.
pub fn gaussian_loglik_increment(
    layout: &GaussianLayout,
    theta: &ParticleMatrix,
    y: f64,
    c: &[f64],
) -> Result<Vec<f64>> {
    check_len("particle dimension", layout.dim(), theta.dim())?;
    let p = layout.coefficients();
    check_len("design row", p, c.len())?;
    theta
        .columns()
        .map(|col| {
            let s2 = col[layout.sigma2_eps()];
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::Corrupted(format!("σ²_ε = {s2}")));
            }
            let eta = dot(&col[..p], c);
            let r = y - eta;
            Ok(-0.5 * r * r / s2 - 0.5 * s2.ln())
        })
        .collect()
}

fn ig(shape: f64, rate: f64) -> Result<InverseGammaParams> {
    InverseGammaParams::new(shape, rate).map_err(|_| Error::Corrupted(format!("Inverse-Gamma({shape}, {rate})")))
}

/// One Gibbs sweep of a single particle column: coefficients, a_ε, σ²_ε, then
/// (a_ur, σ²_ur) for r = 1..R.
pub fn gaussian_sweep(
    layout: &GaussianLayout,
    col: &mut [f64],
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    s: &mut RandomStream,
) -> Result<()> {
    let bl = &layout.blocks;
    let p_total = bl.total();
    let p = bl.p;
    let s2 = col[layout.sigma2_eps()];
    if !(s2 > 0.0) {
        return Err(Error::Corrupted(format!("σ²_ε = {s2}")));
    }
    let mut omega_m = stats.ctc().scaled(1.0 / s2);
    let sbi = hyper.sigma_beta_inv();
    for i in 0..p {
        for j in i..p {
            omega_m.set(i, j, omega_m.get(i, j) + sbi.get(i, j));
        }
    }
    for r in 0..bl.n_blocks() {
        let s2u = col[layout.sigma2_u(r)];
        if !(s2u > 0.0) {
            return Err(Error::Corrupted(format!("σ²_u{} = {s2u}", r + 1)));
        }
        for i in bl.block_range(r) {
            omega_m.set(i, i, omega_m.get(i, i) + 1.0 / s2u);
        }
    }
    let mut omega_v: Vec<f64> = stats.cty().iter().map(|v| v / s2).collect();
    for (o, m) in omega_v.iter_mut().zip(hyper.sigma_beta_inv_mu()) {
        *o += m;
    }
    let dec = spectral_decompose(&omega_m, "Ω")?;
    dec.check_conditioning("Ω")?;
    let z = s.std_normal_vec(p_total);
    let coef = mvn_spectral_from_normals(&dec, &omega_v, &z)?;
    col[..p_total].copy_from_slice(&coef);

    let s_eps = hyper.s_eps();
    let a = s.inverse_gamma(ig(1.0, 1.0 / s2 + 1.0 / (s_eps * s_eps))?);
    col[layout.a_eps()] = a;
    let rss = stats.residual_ss(&coef)?;
    col[layout.sigma2_eps()] = s.inverse_gamma(ig(0.5 * (stats.n() as f64 + 1.0), 1.0 / a + 0.5 * rss)?);

    for r in 0..bl.n_blocks() {
        let su = hyper.s_u()[r];
        let s2u = col[layout.sigma2_u(r)];
        let au = s.inverse_gamma(ig(1.0, 1.0 / s2u + 1.0 / (su * su))?);
        col[layout.a_u(r)] = au;
        let range = bl.block_range(r);
        let k = range.len() as f64;
        let ss: f64 = coef[range].iter().map(|x| x * x).sum();
        col[layout.sigma2_u(r)] = s.inverse_gamma(ig(0.5 * (k + 1.0), 1.0 / au + 0.5 * ss)?);
    }
    Ok(())
}

/// Refreshes every column with one Gibbs sweep; column m draws from `cycle.substream(m)`.
/// Reads only the sufficient statistics, never raw observations.
pub fn gaussian_move(
    layout: &GaussianLayout,
    theta: &mut ParticleMatrix,
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    cycle: &RandomStream,
) -> Result<()> {
    check_len("particle dimension", layout.dim(), theta.dim())?;
    check_len("statistics dimension", layout.coefficients(), stats.dim())?;
    for (m, col) in theta.columns_mut().enumerate() {
        let mut s = cycle.substream(m as u64);
        gaussian_sweep(layout, col, stats, hyper, &mut s)?;
    }
    Ok(())
}

/// Prior draws for starting without warm-up: β ~ N(μ_β, Σ_β), σ ~ Half-Cauchy
/// via its auxiliary pair, u_r ~ N(0, σ²_ur I).
pub fn gaussian_prior_particles(
    layout: &GaussianLayout,
    hyper: &Hyperparameters,
    m: usize,
    s: &mut RandomStream,
) -> Result<ParticleMatrix> {
    hyper.check_layout(&layout.blocks)?;
    let dec = spectral_decompose(hyper.sigma_beta_inv(), "Σ_β⁻¹")?;
    let mut theta = ParticleMatrix::zeros(layout.dim(), m);
    let bl = &layout.blocks;
    for col in theta.columns_mut() {
        let z = s.std_normal_vec(bl.p);
        col[..bl.p].copy_from_slice(&mvn_spectral_from_normals(&dec, hyper.sigma_beta_inv_mu(), &z)?);
        let se = hyper.s_eps();
        let a = s.inverse_gamma(ig(0.5, 1.0 / (se * se))?);
        col[layout.a_eps()] = a;
        col[layout.sigma2_eps()] = s.inverse_gamma(ig(0.5, 1.0 / a)?);
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

/// Gaussian LM/LMM state for the engine: layout, prior and sufficient statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    layout: GaussianLayout,
    hyper: Hyperparameters,
    stats: SufficientStats,
    labels: Vec<String>,
}

impl GaussianModel {
    pub fn new(
        layout: GaussianLayout,
        hyper: Hyperparameters,
        stats: SufficientStats,
        labels: Vec<String>,
    ) -> Result<Self> {
        hyper.check_layout(&layout.blocks)?;
        check_len("statistics dimension", layout.coefficients(), stats.dim())?;
        check_len("parameter labels", layout.dim(), labels.len())?;
        Ok(GaussianModel {
            layout,
            hyper,
            stats,
            labels,
        })
    }

    pub fn layout(&self) -> &GaussianLayout {
        &self.layout
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }
}

impl StreamModel for GaussianModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn n(&self) -> u64 {
        self.stats.n()
    }

    fn loglik_increment(&self, theta: &ParticleMatrix, y: f64, c: &[f64]) -> Result<Vec<f64>> {
        gaussian_loglik_increment(&self.layout, theta, y, c)
    }

    fn absorb(&mut self, y: f64, c: &[f64]) -> Result<()> {
        self.stats.update(y, c)
    }

    fn move_particles(&mut self, theta: &mut ParticleMatrix, cycle: &RandomStream) -> Result<Option<f64>> {
        gaussian_move(&self.layout, theta, &self.stats, &self.hyper, cycle)?;
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rows() {
        let l = GaussianLayout::new(BlockLayout::new(2, vec![3, 1]).unwrap());
        assert_eq!(l.dim(), 6 + 2 + 4);
        assert_eq!(l.sigma2_eps(), 6);
        assert_eq!(l.a_eps(), 7);
        assert_eq!(l.sigma2_u(1), 9);
        assert_eq!(l.a_u(0), 10);
        assert!(l.is_auxiliary(7) && l.is_auxiliary(11) && !l.is_auxiliary(9));
        assert_eq!(GaussianLayout::new(BlockLayout::fixed(3)).dim(), 5);
    }

    #[test]
    fn increment_examples() {
        let l = GaussianLayout::new(BlockLayout::fixed(1));
        let theta = ParticleMatrix::from_columns(&[vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(gaussian_loglik_increment(&l, &theta, 0.0, &[3.0]).unwrap(), vec![0.0, 0.0]);
        let theta = ParticleMatrix::from_columns(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(gaussian_loglik_increment(&l, &theta, 2.0, &[2.0]).unwrap(), vec![0.0]);
        assert_eq!(gaussian_loglik_increment(&l, &theta, 4.0, &[2.0]).unwrap(), vec![-2.0]);
        let bad = ParticleMatrix::from_columns(&[vec![1.0, -1.0, 1.0]]).unwrap();
        assert!(matches!(gaussian_loglik_increment(&l, &bad, 2.0, &[2.0]), Err(Error::Corrupted(_))));
    }
}
