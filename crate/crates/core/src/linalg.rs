//! Small dense linear algebra: symmetric matrices, cyclic Jacobi
//! eigendecomposition, quadratic forms and rank-one accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

const MAX_SWEEPS: usize = 100;
const OFFDIAG_TOL: f64 = 1e-12;
const CONDITION_TOL: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// An empty matrix with a fixed column count, ready for [`Matrix::push_row`].
    pub fn with_cols(cols: usize) -> Self {
        Matrix {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        check_len("appended row", self.cols, row.len())?;
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// First `n` rows as a new matrix.
    pub fn head(&self, n: usize) -> Matrix {
        let n = n.min(self.rows);
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("matrix-vector product", self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Xᵀ X as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.cols);
        for i in 0..self.rows {
            g.add_outer_in_place(self.row(i)).expect("row width equals order");
        }
        g
    }

    /// Xᵀ v.
    pub fn t_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("transposed product", self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        Ok(out)
    }
}

/// Square symmetric matrix stored densely, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::diagonal(&vec![1.0; order])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    /// Builds from full row-major entries. The input must be symmetric up to
    /// rounding; the stored matrix is exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (i, r) in rows.iter().enumerate() {
            check_len("symmetric matrix row", order, r.len())?;
            m.data[i * order..(i + 1) * order].copy_from_slice(r);
        }
        let scale = m.max_abs().max(1.0);
        for i in 0..order {
            for j in (i + 1)..order {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > 1e-10 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m.data[i * order + j] = avg;
                m.data[j * order + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    /// Sets entries (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn add_outer_in_place(&mut self, v: &[f64]) -> Result<()> {
        check_len("outer product", self.order, v.len())?;
        let p = self.order;
        for i in 0..p {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * p..(i + 1) * p];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += vi * vj;
            }
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> SymMatrix {
        SymMatrix {
            order: self.order,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// self * a + other * b, entrywise.
    pub fn scaled_sum(&self, a: f64, other: &SymMatrix, b: f64) -> Result<SymMatrix> {
        check_len("matrix sum", self.order, other.order)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(SymMatrix {
            order: self.order,
            data,
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("matrix-vector product", self.order, v.len())?;
        Ok((0..self.order).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Orthogonal eigenvectors (columns of a row-major P×P array) and eigenvalues
/// in descending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    order: usize,
    vectors: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Entry (i, k): component i of eigenvector k.
    pub fn vector_entry(&self, i: usize, k: usize) -> f64 {
        self.vectors[i * self.order + k]
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.order).map(|i| self.vector_entry(i, k)).collect()
    }

    /// Uᵀ v.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let p = self.order;
        let mut out = vec![0.0; p];
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.vectors[i * p..(i + 1) * p];
            for (o, &u) in out.iter_mut().zip(row) {
                *o += u * vi;
            }
        }
        out
    }

    /// U w.
    pub fn expand(&self, w: &[f64]) -> Vec<f64> {
        let p = self.order;
        (0..p)
            .map(|i| dot(&self.vectors[i * p..(i + 1) * p], w))
            .collect()
    }

    /// U diag(f(d)) Uᵀ.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.order;
        let fd: Vec<f64> = self.values.iter().map(|&d| f(d)).collect();
        let mut m = SymMatrix::zeros(p);
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += self.vector_entry(i, k) * fd[k] * self.vector_entry(j, k);
                }
                m.set(i, j, s);
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_eigenvalues(|d| d)
    }

    /// Fails when the smallest eigenvalue is nonpositive or tiny relative to
    /// the largest.
    pub fn check_conditioning(&self, role: &str) -> Result<()> {
        let max = self.values.first().copied().unwrap_or(0.0);
        let min = self.values.last().copied().unwrap_or(0.0);
        if !(max > 0.0) || !(min >= CONDITION_TOL * max) {
            return Err(Error::Conditioning {
                role: role.to_string(),
                min,
                max,
            });
        }
        Ok(())
    }
}

/// Cyclic Jacobi eigendecomposition. `role` names the matrix in errors.
pub fn spectral_decompose(m: &SymMatrix, role: &str) -> Result<SpectralDecomposition> {
    let p = m.order;
    if p == 0 {
        return Err(Error::InvalidParameter(format!("{role} has order 0")));
    }
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Corrupted(format!("{role} has non-finite entries")));
    }
    let mut a = m.data.clone();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let target = OFFDIAG_TOL * m.frobenius();
    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * p + j] * a[i * p + j])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                rotate(&mut a, &mut v, p, i, j);
            }
        }
    }
    if !converged {
        return Err(Error::Decomposition {
            role: role.to_string(),
            sweeps: MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y * p + y].total_cmp(&a[x * p + x]));
    let values = order.iter().map(|&k| a[k * p + k]).collect();
    let mut vectors = vec![0.0; p * p];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..p {
            vectors[i * p + new_k] = v[i * p + old_k];
        }
    }
    Ok(SpectralDecomposition {
        order: p,
        vectors,
        values,
    })
}

fn rotate(a: &mut [f64], v: &mut [f64], p: usize, i: usize, j: usize) {
    let aij = a[i * p + j];
    if aij == 0.0 {
        return;
    }
    let theta = (a[j * p + j] - a[i * p + i]) / (2.0 * aij);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    a[i * p + i] -= t * aij;
    a[j * p + j] += t * aij;
    a[i * p + j] = 0.0;
    a[j * p + i] = 0.0;
    for r in 0..p {
        if r == i || r == j {
            continue;
        }
        let g = a[r * p + i];
        let h = a[r * p + j];
        let ri = g - s * (h + g * tau);
        let rj = h + s * (g - h * tau);
        a[r * p + i] = ri;
        a[i * p + r] = ri;
        a[r * p + j] = rj;
        a[j * p + r] = rj;
    }
    for r in 0..p {
        let g = v[r * p + i];
        let h = v[r * p + j];
        v[r * p + i] = g - s * (h + g * tau);
        v[r * p + j] = h + s * (g - h * tau);
    }
}

/// vᵀ m v.
pub fn quad_form(v: &[f64], m: &SymMatrix) -> Result<f64> {
    check_len("quadratic form", m.order, v.len())?;
    Ok((0..m.order).map(|i| v[i] * dot(m.row(i), v)).sum())
}

/// m + v vᵀ.
pub fn add_outer(m: &SymMatrix, v: &[f64]) -> Result<SymMatrix> {
    let mut out = m.clone();
    out.add_outer_in_place(v)?;
    Ok(out)
}

/// Inverse of a symmetric positive-definite matrix through its spectrum.
pub fn spd_inverse(m: &SymMatrix, role: &str) -> Result<SymMatrix> {
    let dec = spectral_decompose(m, role)?;
    dec.check_conditioning(role)?;
    Ok(dec.map_eigenvalues(|d| 1.0 / d))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
