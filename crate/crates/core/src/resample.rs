//! Systematic resampling and the degeneracy trigger.

use crate::discrete::check_simplex;
use crate::error::{check_len, Error, Result};
use crate::random::RandomStream;
use crate::smc::ParticleMatrix;

/// Zero-based column indices chosen by systematic resampling with offset `u`.
///
/// Column k receives the offsets u + j falling in (Mω_{k−1}, Mω_k], where ω is
/// the cumulative sum of `p`, so its copy count is ⌊Mp_k⌋ or ⌈Mp_k⌉.
pub fn systematic_indices(p: &[f64], u: f64) -> Result<Vec<usize>> {
    check_simplex(p)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidParameter(format!("resampling offset {u} outside (0,1)")));
    }
    let m = p.len();
    let mf = m as f64;
    let mut scaled = Vec::with_capacity(m);
    let mut cum = 0.0;
    for &pk in p {
        cum += pk;
        scaled.push(mf * cum);
    }
    // Pin the cumulative sum at M from the last positive entry on, so rounding
    // can neither run past the end nor land on trailing zero-mass columns.
    let last = p.iter().rposition(|&x| x > 0.0).expect("simplex has mass");
    for s in &mut scaled[last..] {
        *s = mf;
    }
    let mut idx = Vec::with_capacity(m);
    let mut k = 0;
    for j in 0..m {
        let target = u + j as f64;
        while scaled[k] < target {
            k += 1;
        }
        idx.push(k);
    }
    Ok(idx)
}

/// Copies the listed columns of `theta` into a new matrix.
pub fn gather_columns(theta: &ParticleMatrix, idx: &[usize]) -> Result<ParticleMatrix> {
    let d = theta.dim();
    let mut out = ParticleMatrix::zeros(d, idx.len());
    for (j, &k) in idx.iter().enumerate() {
        if k >= theta.particles() {
            return Err(Error::Dimension {
                context: "resample index",
                expected: theta.particles(),
                found: k,
            });
        }
        out.column_mut(j).copy_from_slice(theta.column(k));
    }
    Ok(out)
}

/// Resampled particle matrix for an externally supplied offset `u` in (0,1).
pub fn systematic_resample(theta: &ParticleMatrix, p: &[f64], u: f64) -> Result<ParticleMatrix> {
    check_len("resample weights", theta.particles(), p.len())?;
    gather_columns(theta, &systematic_indices(p, u)?)
}

/// Draws the offset from `s` and resamples.
pub fn systematic_resample_with(
    theta: &ParticleMatrix,
    p: &[f64],
    s: &mut RandomStream,
) -> Result<ParticleMatrix> {
    let u = s.uniform();
    systematic_resample(theta, p, u)
}

pub fn sum_of_squares(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

/// True iff pᵀp > tau.
pub fn should_resample(p: &[f64], tau: f64) -> bool {
    sum_of_squares(p) > tau
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(idx: &[usize], m: usize) -> Vec<usize> {
        let mut c = vec![0; m];
        for &i in idx {
            c[i] += 1;
        }
        c
    }

    #[test]
    fn degenerate_weights_copy_one_column() {
        let theta = ParticleMatrix::from_columns(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        for u in [0.01, 0.5, 0.99] {
            let out = systematic_resample(&theta, &[0.0, 1.0, 0.0], u).unwrap();
            for j in 0..3 {
                assert_eq!(out.column(j), &[2.0]);
            }
        }
    }

    #[test]
    fn uniform_weights_keep_every_column_once() {
        for m in [1, 5, 64] {
            let p = vec![1.0 / m as f64; m];
            for u in [1e-9, 0.3, 0.999_999] {
                assert_eq!(systematic_indices(&p, u).unwrap(), (0..m).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn trailing_zero_mass_never_selected() {
        let p = [0.3, 0.7, 0.0, 0.0];
        let c = counts(&systematic_indices(&p, 0.999_999_9).unwrap(), 4);
        assert_eq!(c[2] + c[3], 0);
    }

    #[test]
    fn trigger_examples() {
        let m = 1000;
        assert!(!should_resample(&vec![1.0 / m as f64; m], 2.0 / m as f64));
        let mut p = vec![0.0; m];
        p[3] = 1.0;
        assert!(should_resample(&p, 2.0 / m as f64));
        let mut p = vec![0.0; m];
        p[0] = 0.6;
        p[1] = 0.4;
        assert!((sum_of_squares(&p) - 0.52).abs() < 1e-15);
        assert!(should_resample(&p, 0.002));
    }

    #[test]
    fn rejects_bad_inputs() {
        let theta = ParticleMatrix::zeros(1, 2);
        assert!(systematic_resample(&theta, &[0.5, 0.6], 0.5).is_err());
        assert!(systematic_resample(&theta, &[0.5, 0.5, 0.0], 0.5).is_err());
        assert!(systematic_resample(&theta, &[0.5, 0.5], 1.0).is_err());
    }
}
