//! Dense numeric kernels: vectors-as-slices, row-major matrices, a portable
//! seeded RNG, thin QR, and a small symmetric eigensolver.
//!
//! Vectors are plain `Vec<f64>`/`&[f64]`; parameter vectors, gradients, and
//! Krylov iterates all share the helpers in this module. The checked entry
//! points return [`CoreError`](crate::CoreError) on dimension mismatches;
//! `*_unchecked` variants exist for inner loops whose shapes are pinned by
//! construction and only `debug_assert` them.

mod eig;
mod matrix;
mod operator;
mod qr;
mod rng;

pub use eig::sym_eig;
pub use matrix::DenseMatrix;
pub use operator::{CountingOperator, FnOperator, LinearOperator, ShiftedOperator};
pub use qr::{thin_qr, thin_qr_dropping};
pub use rng::SeededRng;

use crate::{CoreError, CoreResult};

/// Floats are written with 17 significant digits (`{:.16e}`), the shortest
/// precision at which every `f64` round-trips bit-exactly through text. All
/// CSV output in the workspace funnels through this one formatter.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parse a float previously written by [`format_f64`] (also accepts plain
/// decimal notation, `NaN`, and `inf`).
pub fn parse_f64(s: &str, what: &'static str, line: usize) -> CoreResult<f64> {
    s.trim().parse::<f64>().map_err(|e| CoreError::Parse {
        what,
        line,
        detail: format!("bad float {s:?}: {e}"),
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> CoreResult<f64> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch {
            context: "dot",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dot_unchecked(a, b))
}

pub fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot_unchecked(a, a).sqrt()
}

/// `y += alpha * x`, in place.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|xi| alpha * xi).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> CoreResult<Vec<f64>> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch {
            context: "add",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
}

pub fn sub(a: &[f64], b: &[f64]) -> CoreResult<Vec<f64>> {
    if a.len() != b.len() {
        return Err(CoreError::DimensionMismatch {
            context: "sub",
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Maximum absolute entry (0 for an empty slice).
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_loop_oracle() {
        let mut rng = SeededRng::new(11);
        let a = rng.normal_vec(100);
        let b = rng.normal_vec(100);
        // Independent oracle: explicit indexed accumulation.
        let mut expect = 0.0;
        for i in 0..100 {
            expect += a[i] * b[i];
        }
        let got = dot(&a, &b).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn dot_rejects_length_mismatch() {
        let err = dot(&[1.0, 2.0], &[1.0]).unwrap_err();
        assert!(matches!(err, CoreError::DimensionMismatch { .. }));
    }

    #[test]
    fn zero_vector_has_zero_norm() {
        assert_eq!(norm2(&[0.0; 7]), 0.0);
        assert_eq!(norm2(&[]), 0.0);
    }

    #[test]
    fn axpy_and_scale_agree_with_direct_arithmetic() {
        let x = vec![1.0, -2.0, 3.0];
        let mut y = vec![10.0, 20.0, 30.0];
        axpy(0.5, &x, &mut y);
        assert_eq!(y, vec![10.5, 19.0, 31.5]);
        scale(2.0, &mut y);
        assert_eq!(y, vec![21.0, 38.0, 63.0]);
    }

    #[test]
    fn float_format_round_trips_bit_exactly() {
        let cases = [
            0.0,
            -0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -2.2250738585072014e-308,
            1.7976931348623157e308,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for &x in &cases {
            let s = format_f64(x);
            let back = parse_f64(&s, "test", 0).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
            // Re-emission is byte-identical, which is what the CSV layer needs.
            assert_eq!(format_f64(back), s);
        }
        let s = format_f64(f64::NAN);
        assert!(parse_f64(&s, "test", 0).unwrap().is_nan());
    }
}
