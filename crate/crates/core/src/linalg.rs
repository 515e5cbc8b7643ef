//! Small dense square matrices and the few kernels the crate needs on them.

use faer::linalg::solvers::{PartialPivLu, Solve};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::wht_in_place;

/// Pivot ratio above which a factorization is reported as singular.
pub const MAX_PIVOT_RATIO: f64 = 1e13;

/// Square matrix stored row major. Entry `(r, c)` lives at `data[r * dim + c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Matrix { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, c)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for row in self.data.chunks(self.dim.max(1)) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Non-negative entries and unit column sums, within `tol`.
    pub fn is_left_stochastic(&self, tol: f64) -> bool {
        self.data.iter().all(|&v| v >= -tol) && self.column_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, k: f64, other: &Matrix) -> Result<()> {
        self.same_dim(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    fn same_dim(&self, other: &Matrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.same_dim(other)?;
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for r in 0..d {
            let out_row = &mut out.data[r * d..(r + 1) * d];
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(&other.data[k * d..(k + 1) * d]) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(self
            .data
            .chunks(self.dim.max(1))
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in 0..self.dim {
                if r != c {
                    worst = worst.max(self.get(r, c).abs());
                }
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// `H_n * self * H_n^{-1}` using row and column Walsh-Hadamard passes.
    pub fn hadamard_conjugate(&self) -> Result<Matrix> {
        let d = self.dim;
        if !d.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(d));
        }
        let mut out = self.clone();
        // right multiplication by H: transform each row
        for row in out.data.chunks_exact_mut(d) {
            wht_in_place(row)?;
        }
        // left multiplication by H: butterflies between whole rows
        let mut half = 1;
        while half < d {
            for block in out.data.chunks_exact_mut(2 * half * d) {
                let (lo, hi) = block.split_at_mut(half * d);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = x + y;
                    *b = x - y;
                }
            }
            half <<= 1;
        }
        out.scale(1.0 / d as f64);
        Ok(out)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<LuFactor> {
        let d = self.dim;
        let mat = faer::Mat::<f64>::from_fn(d, d, |r, c| self.data[r * d + c]);
        let lu = mat.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..d {
            let p = u[(i, i)].abs();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !condition.is_finite() || condition > MAX_PIVOT_RATIO {
            return Err(Error::Singular { condition });
        }
        Ok(LuFactor { lu, dim: d, condition })
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// A factorized square matrix ready for repeated solves.
pub struct LuFactor {
    lu: PartialPivLu<f64>,
    dim: usize,
    condition: f64,
}

impl LuFactor {
    /// Ratio of the largest to the smallest pivot magnitude; a cheap
    /// lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let rhs = faer::Mat::<f64>::from_fn(self.dim, 1, |r, _| b[r]);
        let x = self.lu.solve(&rhs);
        Ok((0..self.dim).map(|r| x[(r, 0)]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::sign;

    fn hadamard(d: usize) -> Matrix {
        Matrix::from_fn(d, |r, c| sign(r as u32, c as u32) as f64)
    }

    #[test]
    fn conjugation_matches_dense_products() {
        let d = 8;
        let a = Matrix::from_fn(d, |r, c| ((r * 5 + c * 3) % 7) as f64 / 7.0);
        let h = hadamard(d);
        let mut h_inv = hadamard(d);
        h_inv.scale(1.0 / d as f64);
        let dense = h.mul(&a).unwrap().mul(&h_inv).unwrap();
        assert!(a.hadamard_conjugate().unwrap().max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn lu_solves_and_flags_singular() {
        let a = Matrix::from_rows(vec![vec![0.9, 0.2], vec![0.1, 0.8]]).unwrap();
        let x = a.lu().unwrap().solve(&[0.55, 0.45]).unwrap();
        let back = a.mul_vec(&x).unwrap();
        assert!((back[0] - 0.55).abs() < 1e-14 && (back[1] - 0.45).abs() < 1e-14);

        let s = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(s.lu(), Err(Error::Singular { .. })));
    }

    #[test]
    fn rows_serde_shape() {
        let a = Matrix::identity(2);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[[1.0,0.0],[0.0,1.0]]");
        assert!(serde_json::from_str::<Matrix>("[[1.0,0.0],[0.0]]").is_err());
    }
}
