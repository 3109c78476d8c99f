//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Used on the small projected operators of the randomized eigensolver
//! ((r+p) × (r+p)) and as the dense oracle in tests, so it favors
//! verifiability over speed: plain rotations, no blocking, quadratic storage.

use crate::{CoreError, CoreResult};

use super::DenseMatrix;

const SYMMETRY_RTOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decompose a symmetric matrix. Returns `(values, vectors)` with
/// `vectors` holding orthonormal eigenvector columns, ordered like `values`:
/// descending |λ|, magnitude ties broken positive-first, then by the original
/// diagonal index so the order is fully deterministic.
pub fn sym_eig(a: &DenseMatrix) -> CoreResult<(Vec<f64>, DenseMatrix)> {
    if a.rows() != a.cols() {
        return Err(CoreError::InvalidArgument(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let max_asym = a.max_asymmetry();
    let tol = SYMMETRY_RTOL * a.max_abs_entry().max(1.0);
    if max_asym > tol {
        return Err(CoreError::NotSymmetric {
            max_asymmetry: max_asym,
            tol,
        });
    }

    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }

    let mut b = a.clone();
    b.symmetrize(); // scrub roundoff-level asymmetry before rotating
    let mut v = DenseMatrix::identity(n);

    // Stop when the off-diagonal Frobenius norm is negligible next to the
    // matrix scale.
    let scale = b.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = 1e-14 * scale;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&b);
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = b.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Standard stable rotation: theta = (a_qq - a_pp) / (2 a_pq),
                // t = sign(theta) / (|theta| + sqrt(1 + theta^2)).
                let theta = (b.get(q, q) - b.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut b, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal_norm(&b) > target {
        return Err(CoreError::EigNoConvergence {
            sweeps: MAX_SWEEPS,
            off_norm: off_diagonal_norm(&b),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let lambda: Vec<f64> = (0..n).map(|i| b.get(i, i)).collect();
    order.sort_by(|&i, &j| {
        lambda[j]
            .abs()
            .partial_cmp(&lambda[i].abs())
            .unwrap()
            // magnitude tie: positive eigenvalue first, then original index
            .then_with(|| lambda[j].partial_cmp(&lambda[i]).unwrap())
            .then_with(|| i.cmp(&j))
    });

    let values: Vec<f64> = order.iter().map(|&i| lambda[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((values, vectors))
}

fn off_diagonal_norm(b: &DenseMatrix) -> f64 {
    let n = b.rows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let x = b.get(p, q);
            sum += 2.0 * x * x;
        }
    }
    sum.sqrt()
}

/// Apply the Jacobi rotation J(p, q, c, s) as B <- JᵀBJ and V <- VJ.
fn rotate(b: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = b.rows();
    let app = b.get(p, p);
    let aqq = b.get(q, q);
    let apq = b.get(p, q);

    b.set(p, p, c * c * app - 2.0 * s * c * apq + s * s * aqq);
    b.set(q, q, s * s * app + 2.0 * s * c * apq + c * c * aqq);
    b.set(p, q, 0.0);
    b.set(q, p, 0.0);

    for k in 0..n {
        if k != p && k != q {
            let akp = b.get(k, p);
            let akq = b.get(k, q);
            b.set(k, p, c * akp - s * akq);
            b.set(p, k, c * akp - s * akq);
            b.set(k, q, s * akp + c * akq);
            b.set(q, k, s * akp + c * akq);
        }
    }
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}
