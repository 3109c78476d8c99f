//! Row-major dense matrices. Sized for sketches, projected operators, and
//! desk-scale oracles — not for large-scale linear algebra.

use crate::{CoreError, CoreResult};

use super::dot_unchecked;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    /// Row-major: entry (i, j) lives at `data[i * cols + j]`.
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> CoreResult<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch {
                context: "DenseMatrix::from_row_major",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Assemble from column vectors (all of equal length).
    pub fn from_columns(cols: &[Vec<f64>]) -> CoreResult<Self> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        for c in cols {
            if c.len() != nrows {
                return Err(CoreError::DimensionMismatch {
                    context: "DenseMatrix::from_columns",
                    expected: nrows,
                    got: c.len(),
                });
            }
        }
        Ok(Self::from_fn(nrows, ncols, |i, j| cols[j][i]))
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, e) in entries.iter().enumerate() {
            m.data[i * n + i] = *e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `A v`.
    pub fn matvec(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        if v.len() != self.cols {
            return Err(CoreError::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot_unchecked(self.row(i), v)).collect())
    }

    /// `Aᵀ v`.
    pub fn t_matvec(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        if v.len() != self.rows {
            return Err(CoreError::DimensionMismatch {
                context: "t_matvec",
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            let row = self.row(i);
            for j in 0..self.cols {
                out[j] += row[j] * vi;
            }
        }
        Ok(out)
    }

    /// `A B`.
    pub fn matmul(&self, other: &DenseMatrix) -> CoreResult<DenseMatrix> {
        if self.cols != other.rows {
            return Err(CoreError::DimensionMismatch {
                context: "matmul",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for j in 0..other.cols {
                    orow[j] += aik * brow[j];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) -> CoreResult<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(CoreError::DimensionMismatch {
                context: "add_scaled",
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// `A *= s` entrywise.
    pub fn scale(&mut self, s: f64) {
        for x in self.data.iter_mut() {
            *x *= s;
        }
    }

    /// `A += gamma I` (square only).
    pub fn shift_diagonal(&mut self, gamma: f64) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self.data[i * self.cols + i] += gamma;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Maximum absolute asymmetry `max |A_ij - A_ji|` (square only).
    pub fn max_asymmetry(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Symmetric within `tol * max(1, max|A|)`?
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_asymmetry() <= tol * self.max_abs_entry().max(1.0)
    }

    /// Replace by `(A + Aᵀ)/2` (square only). Used to scrub the roundoff
    /// asymmetry of projected operators before the eigensolver sees them.
    pub fn symmetrize(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, m);
                self.set(j, i, m);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_matches_hand_example() {
        let a = DenseMatrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![6.0, 15.0]);
        assert_eq!(a.t_matvec(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn matmul_matches_hand_example() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matvec(&[1.0, 2.0]).is_err());
        assert!(a.matmul(&DenseMatrix::zeros(2, 2)).is_err());
        assert!(DenseMatrix::from_row_major(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn symmetry_check_and_symmetrize() {
        let mut a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0 + 1e-6, 1.0]).unwrap();
        assert!(!a.is_symmetric(1e-12));
        a.symmetrize();
        assert!(a.is_symmetric(1e-12));
        assert_eq!(a.get(0, 1), a.get(1, 0));
    }

    #[test]
    fn transpose_round_trips() {
        let a = DenseMatrix::from_fn(3, 5, |i, j| (i * 7 + j) as f64);
        let att = a.transpose().transpose();
        assert_eq!(a, att);
    }
}
