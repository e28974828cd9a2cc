//! Seeded random streams and the samplers used by the algorithms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Open01, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::SpectralDecomposition;

/// A ChaCha8 stream keyed by a 64-bit seed. Substreams are keyed by hashing
/// (parent seed, index), so each one has its own 2^64-block keystream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

/// Position of a stream, enough to resume it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamState {
    pub seed: u64,
    pub word_pos: u128,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut z = seed;
    for chunk in key.chunks_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha8Rng::from_seed(key_from_seed(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream; depends only on this stream's seed and `index`.
    pub fn substream(&self, index: u64) -> RandomStream {
        let child = splitmix64(self.seed ^ splitmix64(index ^ 0xD1B5_4A32_D192_ED03));
        RandomStream::new(child)
    }

    pub fn state(&self) -> StreamState {
        StreamState {
            seed: self.seed,
            word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn from_state(state: StreamState) -> Self {
        let mut s = RandomStream::new(state.seed);
        s.rng.set_word_pos(state.word_pos);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn std_normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.std_normal()).collect()
    }

    /// Integer uniform on 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Draw from Inverse-Gamma(shape, rate): the reciprocal of a Gamma(shape, rate) draw.
    pub fn inverse_gamma(&mut self, p: InverseGammaParams) -> f64 {
        let g = Gamma::new(p.shape, 1.0 / p.rate).expect("validated parameters");
        loop {
            let x: f64 = g.sample(&mut self.rng);
            if x > 0.0 {
                let inv = 1.0 / x;
                if inv.is_finite() {
                    return inv;
                }
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn poisson(&mut self, mean: f64) -> Result<f64> {
        let d = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("Poisson({mean}): {e}")))?;
        Ok(d.sample(&mut self.rng))
    }

    /// scale · tan(πU/2).
    pub fn half_cauchy(&mut self, scale: f64) -> Result<f64> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Half-Cauchy scale must be positive, got {scale}"
            )));
        }
        Ok(scale * (std::f64::consts::FRAC_PI_2 * self.uniform()).tan())
    }
}

/// Inverse-Gamma parameters with density λ^κ/Γ(κ) x^{−κ−1} exp(−λ/x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseGammaParams {
    shape: f64,
    rate: f64,
}

impl InverseGammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Inverse-Gamma needs positive finite shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(InverseGammaParams { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Draw from N(Ω⁻¹ω, Ω⁻¹) given Ω = U diag(d) Uᵀ: U(Uᵀz/√d + Uᵀω/d).
pub fn draw_mvn_spectral(
    s: &mut RandomStream,
    decomp: &SpectralDecomposition,
    omega: &[f64],
) -> Result<Vec<f64>> {
    let z = s.std_normal_vec(decomp.order());
    mvn_spectral_from_normals(decomp, omega, &z)
}

/// The deterministic part of [`draw_mvn_spectral`] for a given standard-normal vector.
pub fn mvn_spectral_from_normals(
    decomp: &SpectralDecomposition,
    omega: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    check_len("spectral draw ω", decomp.order(), omega.len())?;
    check_len("spectral draw z", decomp.order(), z.len())?;
    if let Some(&d) = decomp.eigenvalues().iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "precision matrix has nonpositive eigenvalue {d}"
        )));
    }
    let uz = decomp.project(z);
    let uw = decomp.project(omega);
    let w: Vec<f64> = decomp
        .eigenvalues()
        .iter()
        .zip(uz.iter().zip(&uw))
        .map(|(&d, (&a, &b))| a / d.sqrt() + b / d)
        .collect();
    Ok(decomp.expand(&w))
}
