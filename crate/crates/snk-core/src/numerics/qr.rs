//! Thin QR via modified Gram–Schmidt with a second orthogonalization pass.
//!
//! For the tall skinny sketches this crate produces (k ≤ a few dozen columns,
//! Gaussian entries) MGS + one re-pass keeps `‖QᵀQ - I‖_max` at roundoff
//! level, which is all the randomized eigensolver needs.

use crate::{CoreError, CoreResult};

use super::{dot_unchecked, DenseMatrix};

/// Columns whose post-projection norm falls below this are reported as a
/// degenerate sketch (numerically dependent columns).
const DEGENERATE_COLUMN_TOL: f64 = 1e-14;

/// Orthonormalize the columns of `a` (rows ≥ cols). Returns Q with the same
/// shape whose columns span the same space.
pub fn thin_qr(a: &DenseMatrix) -> CoreResult<DenseMatrix> {
    let (rows, cols) = (a.rows(), a.cols());
    if rows < cols {
        return Err(CoreError::InvalidArgument(format!(
            "thin_qr needs rows >= cols, got {rows}x{cols}"
        )));
    }
    if cols == 0 {
        return Ok(DenseMatrix::zeros(rows, 0));
    }

    let mut q: Vec<Vec<f64>> = (0..cols).map(|j| a.column(j)).collect();
    for j in 0..cols {
        // Two MGS passes against the already-settled columns.
        for _pass in 0..2 {
            for i in 0..j {
                let proj = dot_unchecked(&q[i], &q[j]);
                let (head, tail) = q.split_at_mut(j);
                super::axpy(-proj, &head[i], &mut tail[0]);
            }
        }
        let norm = super::norm2(&q[j]);
        if norm < DEGENERATE_COLUMN_TOL {
            return Err(CoreError::DegenerateSketch {
                column: j,
                norm,
                tol: DEGENERATE_COLUMN_TOL,
            });
        }
        super::scale(1.0 / norm, &mut q[j]);
    }
    DenseMatrix::from_columns(&q)
}

/// Like [`thin_qr`] but tolerant of rank deficiency: numerically dependent
/// columns are dropped instead of rejected, so Q may come back with fewer
/// columns than `a`. Dropping is relative to the largest input column norm;
/// the error is reserved for the fully degenerate case where no column
/// survives (e.g. a sketch of the zero operator).
pub fn thin_qr_dropping(a: &DenseMatrix) -> CoreResult<DenseMatrix> {
    let (rows, cols) = (a.rows(), a.cols());
    if cols == 0 {
        return Ok(DenseMatrix::zeros(rows, 0));
    }
    let scale_ref = (0..cols)
        .map(|j| super::norm2(&a.column(j)))
        .fold(0.0f64, f64::max);
    let tol = 1e-12 * scale_ref;

    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(cols.min(rows));
    for j in 0..cols {
        let mut col = a.column(j);
        for _pass in 0..2 {
            for k in &kept {
                let proj = dot_unchecked(k, &col);
                super::axpy(-proj, k, &mut col);
            }
        }
        let norm = super::norm2(&col);
        if norm > tol && kept.len() < rows {
            super::scale(1.0 / norm, &mut col);
            kept.push(col);
        }
    }
    if kept.is_empty() {
        return Err(CoreError::DegenerateSketch {
            column: 0,
            norm: scale_ref,
            tol,
        });
    }
    DenseMatrix::from_columns(&kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    /// Oracle: orthonormality measured entrywise on QᵀQ, span preservation
    /// measured by the projection residual ‖(I - QQᵀ)A‖_F.
    fn check_qr(a: &DenseMatrix, orth_tol: f64, span_tol: f64) {
        let q = thin_qr(a).unwrap();
        assert_eq!(q.rows(), a.rows());
        assert_eq!(q.cols(), a.cols());

        let qtq = q.transpose().matmul(&q).unwrap();
        let mut worst = 0.0f64;
        for i in 0..qtq.rows() {
            for j in 0..qtq.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((qtq.get(i, j) - expect).abs());
            }
        }
        assert!(worst <= orth_tol, "orthonormality defect {worst:.3e}");

        // (I - QQᵀ)A = A - Q(QᵀA)
        let qta = q.transpose().matmul(a).unwrap();
        let mut resid = a.clone();
        resid.add_scaled(-1.0, &q.matmul(&qta).unwrap()).unwrap();
        assert!(
            resid.frobenius_norm() <= span_tol,
            "projection residual {:.3e}",
            resid.frobenius_norm()
        );
    }

    #[test]
    fn gaussian_50x10_is_orthonormal_and_span_preserving() {
        let mut rng = SeededRng::new(123);
        let a = rng.gaussian_matrix(50, 10);
        check_qr(&a, 1e-12, 1e-10);
    }

    #[test]
    fn square_and_single_column_shapes() {
        let mut rng = SeededRng::new(4);
        check_qr(&rng.gaussian_matrix(12, 12), 1e-12, 1e-10);
        check_qr(&rng.gaussian_matrix(30, 1), 1e-13, 1e-12);
    }

    #[test]
    fn duplicate_columns_are_a_degenerate_sketch() {
        let c = vec![1.0, 2.0, 3.0];
        let a = DenseMatrix::from_columns(&[c.clone(), c]).unwrap();
        let err = thin_qr(&a).unwrap_err();
        assert!(matches!(err, CoreError::DegenerateSketch { column: 1, .. }));
    }

    #[test]
    fn wide_input_is_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(thin_qr(&a).is_err());
    }

    #[test]
    fn dropping_variant_prunes_dependent_columns() {
        let mut rng = SeededRng::new(8);
        let b = rng.gaussian_matrix(20, 3);
        // Six columns, only three independent directions.
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|j| {
                let mut c = b.column(j % 3);
                crate::numerics::scale(1.0 + j as f64, &mut c);
                c
            })
            .collect();
        let a = DenseMatrix::from_columns(&cols).unwrap();
        let q = thin_qr_dropping(&a).unwrap();
        assert_eq!(q.cols(), 3);
        // Q still spans the column space of A.
        let qta = q.transpose().matmul(&a).unwrap();
        let mut resid = a.clone();
        resid.add_scaled(-1.0, &q.matmul(&qta).unwrap()).unwrap();
        assert!(resid.frobenius_norm() <= 1e-10);
    }

    #[test]
    fn dropping_variant_rejects_all_zero_input() {
        let a = DenseMatrix::zeros(5, 2);
        assert!(matches!(
            thin_qr_dropping(&a).unwrap_err(),
            CoreError::DegenerateSketch { .. }
        ));
    }
}
