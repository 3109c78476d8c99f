//! Matrix-free symmetric linear operators: the only interface the randomized
//! eigensolver and the Krylov solvers need.

use crate::CoreResult;

use super::DenseMatrix;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>>;
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows(), self.cols());
        self.rows()
    }

    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        self.matvec(v)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        (**self).apply(v)
    }
}

/// Closure-backed operator, for tests and ad-hoc compositions.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> CoreResult<Vec<f64>>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> CoreResult<Vec<f64>>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        (self.f)(v)
    }
}

/// `A + shift·I` without materializing anything.
pub struct ShiftedOperator<A> {
    base: A,
    shift: f64,
}

impl<A: LinearOperator> ShiftedOperator<A> {
    pub fn new(base: A, shift: f64) -> Self {
        Self { base, shift }
    }
}

impl<A: LinearOperator> LinearOperator for ShiftedOperator<A> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        let mut out = self.base.apply(v)?;
        super::axpy(self.shift, v, &mut out);
        Ok(out)
    }
}

/// Count the `apply` calls made through this wrapper; used by tests that pin
/// exact operator-application counts.
pub struct CountingOperator<'a, A: ?Sized> {
    base: &'a A,
    count: std::cell::Cell<usize>,
}

impl<'a, A: LinearOperator + ?Sized> CountingOperator<'a, A> {
    pub fn new(base: &'a A) -> Self {
        Self {
            base,
            count: std::cell::Cell::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.get()
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for CountingOperator<'_, A> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, v: &[f64]) -> CoreResult<Vec<f64>> {
        self.count.set(self.count.get() + 1);
        self.base.apply(v)
    }
}
