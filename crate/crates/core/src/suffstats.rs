//! Streaming accumulators n, yᵀy, Cᵀy and CᵀC for Gaussian-response models.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg::{dot, quad_form, Matrix, SymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    n: u64,
    yty: f64,
    cty: Vec<f64>,
    ctc: SymMatrix,
}

impl SufficientStats {
    pub fn init(p: usize) -> Self {
        SufficientStats {
            n: 0,
            yty: 0.0,
            cty: vec![0.0; p],
            ctc: SymMatrix::zeros(p),
        }
    }

    pub fn update(&mut self, y: f64, c: &[f64]) -> Result<()> {
        check_len("sufficient statistics row", self.cty.len(), c.len())?;
        self.n += 1;
        self.yty += y * y;
        for (a, &ci) in self.cty.iter_mut().zip(c) {
            *a += ci * y;
        }
        self.ctc.add_outer_in_place(c)
    }

    pub fn seed_from_batch(y: &[f64], c: &Matrix) -> Result<Self> {
        check_len("batch response length", c.rows(), y.len())?;
        let mut s = Self::init(c.cols());
        for (i, &yi) in y.iter().enumerate() {
            s.update(yi, c.row(i))?;
        }
        Ok(s)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.cty.len()
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn cty(&self) -> &[f64] {
        &self.cty
    }

    pub fn ctc(&self) -> &SymMatrix {
        &self.ctc
    }

    /// yᵀy − 2(Cᵀy)ᵀθ + θᵀCᵀCθ, floored at zero against cancellation.
    pub fn residual_ss(&self, theta: &[f64]) -> Result<f64> {
        check_len("residual coefficients", self.cty.len(), theta.len())?;
        let r = self.yty - 2.0 * dot(&self.cty, theta) + quad_form(theta, &self.ctc)?;
        Ok(r.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_zero() {
        let s = SufficientStats::init(2);
        assert_eq!(s.n(), 0);
        assert_eq!(s.yty(), 0.0);
        assert_eq!(s.cty(), &[0.0, 0.0]);
        assert_eq!(s.ctc(), &SymMatrix::zeros(2));
        assert_eq!(s.residual_ss(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn two_rows_by_hand() {
        let mut s = SufficientStats::init(2);
        s.update(1.0, &[1.0, 0.0]).unwrap();
        s.update(2.0, &[0.0, 1.0]).unwrap();
        assert_eq!(s.yty(), 5.0);
        assert_eq!(s.cty(), &[1.0, 2.0]);
        assert_eq!(s.ctc(), &SymMatrix::identity(2));
    }

    #[test]
    fn zero_row_only_counts() {
        let mut s = SufficientStats::init(2);
        s.update(0.0, &[0.0, 0.0]).unwrap();
        assert_eq!(s.n(), 1);
        assert_eq!(s.yty(), 0.0);
        assert_eq!(s.ctc(), &SymMatrix::zeros(2));
    }

    #[test]
    fn single_row_batch_matches_update() {
        let c = Matrix::from_rows(&[vec![1.0, 2.5]]).unwrap();
        let mut s = SufficientStats::init(2);
        s.update(3.0, &[1.0, 2.5]).unwrap();
        assert_eq!(SufficientStats::seed_from_batch(&[3.0], &c).unwrap(), s);
        assert_eq!(
            SufficientStats::seed_from_batch(&[], &Matrix::with_cols(2)).unwrap(),
            SufficientStats::init(2)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = SufficientStats::init(2);
        assert!(s.update(1.0, &[1.0]).is_err());
        assert!(SufficientStats::seed_from_batch(&[1.0, 2.0], &Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).is_err());
    }
}
