//! Discrete distributions over real atoms: quantiles, moments, credible
//! intervals and frequency polygons.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// Fails unless `p` is nonnegative and sums to one.
pub fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Simplex("empty probability vector".into()));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::Simplex(format!("entry {x} is not a probability")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Simplex(format!("entries sum to {s}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        check_len("discrete distribution", atoms.len(), probs.len())?;
        check_simplex(&probs)?;
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite atom".into()));
        }
        Ok(DiscreteDistribution { atoms, probs })
    }

    /// Equal mass on every atom.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let m = atoms.len();
        Self::new(atoms, vec![1.0 / m as f64; m])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Smallest atom x with F(x) ≥ q.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("quantile level {q} outside [0,1]")));
        }
        let mut idx: Vec<usize> = (0..self.atoms.len()).filter(|&i| self.probs[i] > 0.0).collect();
        idx.sort_by(|&a, &b| self.atoms[a].total_cmp(&self.atoms[b]));
        let mut cum = 0.0;
        let mut k = 0;
        while k < idx.len() {
            let x = self.atoms[idx[k]];
            while k < idx.len() && self.atoms[idx[k]] == x {
                cum += self.probs[idx[k]];
                k += 1;
            }
            if cum >= q {
                return Ok(x);
            }
        }
        // q = 1 with rounding in the cumulative sum
        Ok(self.atoms[*idx.last().expect("simplex has positive mass")])
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(a, p)| a * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .zip(&self.probs)
            .map(|(a, p)| p * (a - m) * (a - m))
            .sum()
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// (Q((1−level)/2), Q((1+level)/2)).
    pub fn credible_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!("credible level {level} outside (0,1)")));
        }
        Ok((self.quantile((1.0 - level) / 2.0)?, self.quantile((1.0 + level) / 2.0)?))
    }

    /// Binned density on [origin + jh, origin + (j+1)h), padded with one empty
    /// bin at each end.
    pub fn frequency_polygon(&self, h: f64, origin: f64) -> Result<FrequencyPolygon> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("bin width must be positive, got {h}")));
        }
        let bins: Vec<i64> = self
            .atoms
            .iter()
            .map(|&a| ((a - origin) / h).floor() as i64)
            .collect();
        let lo = *bins.iter().min().expect("nonempty");
        let hi = *bins.iter().max().expect("nonempty");
        let mut mass = vec![0.0; (hi - lo + 3) as usize];
        for (b, p) in bins.iter().zip(&self.probs) {
            mass[(b - lo + 1) as usize] += p;
        }
        let midpoints = (0..mass.len())
            .map(|k| origin + ((lo - 1 + k as i64) as f64 + 0.5) * h)
            .collect();
        let heights = mass.iter().map(|m| m / h).collect();
        Ok(FrequencyPolygon {
            bin_width: h,
            bin_origin: origin,
            midpoints,
            heights,
        })
    }
}

/// Piecewise-linear density through mid-bin heights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPolygon {
    pub bin_width: f64,
    pub bin_origin: f64,
    pub midpoints: Vec<f64>,
    pub heights: Vec<f64>,
}

impl FrequencyPolygon {
    /// Trapezoid integral over the midpoint grid.
    pub fn integral(&self) -> f64 {
        self.midpoints
            .windows(2)
            .zip(self.heights.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Bin height at the bin containing `x`, zero outside the grid.
    pub fn height_at(&self, x: f64) -> f64 {
        let j = ((x - self.bin_origin) / self.bin_width).floor();
        let first = ((self.midpoints[0] - self.bin_origin) / self.bin_width).floor();
        let k = j - first;
        if k < 0.0 || k as usize >= self.heights.len() {
            0.0
        } else {
            self.heights[k as usize]
        }
    }
}

/// Overlap Σ min(f, g)·h of two polygons binned on the same grid.
pub fn overlap_coefficient(a: &FrequencyPolygon, b: &FrequencyPolygon) -> Result<f64> {
    if a.bin_width != b.bin_width || a.bin_origin != b.bin_origin {
        return Err(Error::InvalidParameter("polygons use different bins".into()));
    }
    Ok(a
        .midpoints
        .iter()
        .zip(&a.heights)
        .map(|(&x, &ha)| ha.min(b.height_at(x)) * a.bin_width)
        .sum())
}

/// Sample quantile with linear interpolation between order statistics.
pub fn sample_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// (1280√π/49)^{1/5}: converts a Gaussian-kernel bandwidth into a polygon bin width.
pub fn fp_bin_width_factor() -> f64 {
    (1280.0 * std::f64::consts::PI.sqrt() / 49.0).powf(0.2)
}

/// Bin width from the normal-reference bandwidth 1.06·min(σ̂, IQR/1.34)·n^{−1/5}.
pub fn fp_bin_width(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if n < 2 || sorted[0] == sorted[n - 1] {
        return Err(Error::InvalidParameter(
            "bin width needs at least two distinct sample values".into(),
        ));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let iqr = sample_quantile(&sorted, 0.75) - sample_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(fp_bin_width_factor() * 1.06 * spread * (n as f64).powf(-0.2))
}
