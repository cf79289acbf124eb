//! Matrix-free access to `A`.
//!
//! Every solver in this crate touches its input only through
//! [`LinearOperator::apply_into`] and [`LinearOperator::apply_adjoint_into`],
//! so sparse storage, dense storage, implicit deflations and user-supplied
//! closures are interchangeable.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::dense::DenseMatrix;
use crate::sparse::SparseMatrix;

/// A real `nrows x ncols` operator with forward and adjoint products.
///
/// Implementations must not mutate observable state in `apply*`; the
/// solvers may call them from several threads on a shared reference.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `y = A x`, with `x.len() == ncols` and `y.len() == nrows`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// `x = Aᵀ y`, with `y.len() == nrows` and `x.len() == ncols`.
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]);

    /// `‖A‖_F²` when the operator can produce it cheaply.
    fn fro_norm_sq(&self) -> Option<f64> {
        None
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        y
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols()];
        self.apply_adjoint_into(y, &mut x);
        x
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        (**self).apply_adjoint_into(y, x)
    }
    fn fro_norm_sq(&self) -> Option<f64> {
        (**self).fro_norm_sq()
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        DenseMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        DenseMatrix::ncols(self)
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                crate::dense::axpy(xj, self.col(j), y);
            }
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = crate::dense::dot(self.col(j), y);
        }
    }
    fn fro_norm_sq(&self) -> Option<f64> {
        Some(DenseMatrix::fro_norm_sq(self))
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        SparseMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        SparseMatrix::ncols(self)
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.tr_mul_vec_into(y, x)
    }
    fn fro_norm_sq(&self) -> Option<f64> {
        Some(SparseMatrix::fro_norm_sq(self))
    }
}

/// `Aᵀ` viewed as an operator, without copying `A`.
#[derive(Clone, Copy, Debug)]
pub struct Transposed<T>(pub T);

impl<T: LinearOperator> LinearOperator for Transposed<T> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_adjoint_into(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply_into(y, x)
    }
    fn fro_norm_sq(&self) -> Option<f64> {
        self.0.fro_norm_sq()
    }
}

/// Wraps an operator and counts forward and adjoint products.
#[derive(Debug)]
pub struct CountingOperator<T> {
    inner: T,
    forward: AtomicUsize,
    adjoint: AtomicUsize,
}

impl<T> CountingOperator<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            forward: AtomicUsize::new(0),
            adjoint: AtomicUsize::new(0),
        }
    }

    /// Total products applied so far (forward plus adjoint).
    pub fn matvecs(&self) -> usize {
        self.forward.load(Ordering::Relaxed) + self.adjoint.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.forward.store(0, Ordering::Relaxed);
        self.adjoint.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: LinearOperator> LinearOperator for CountingOperator<T> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.forward.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_into(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.adjoint.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_adjoint_into(y, x)
    }
    fn fro_norm_sq(&self) -> Option<f64> {
        self.inner.fro_norm_sq()
    }
}

/// Operator defined by a pair of closures.
pub struct FnOperator<F, G> {
    nrows: usize,
    ncols: usize,
    forward: F,
    adjoint: G,
}

impl<F, G> FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(nrows: usize, ncols: usize, forward: F, adjoint: G) -> Self {
        Self {
            nrows,
            ncols,
            forward,
            adjoint,
        }
    }
}

impl<F, G> LinearOperator for FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.forward)(x, y)
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        (self.adjoint)(y, x)
    }
}

/// `A X`, one product per column of `X`.
pub fn apply_block<A: LinearOperator + ?Sized>(op: &A, x: &DenseMatrix) -> DenseMatrix {
    assert_eq!(x.nrows(), op.ncols());
    let mut out = DenseMatrix::zeros(op.nrows(), x.ncols());
    for j in 0..x.ncols() {
        op.apply_into(x.col(j), out.col_mut(j));
    }
    out
}

/// `Aᵀ Y`, one product per column of `Y`.
pub fn apply_adjoint_block<A: LinearOperator + ?Sized>(op: &A, y: &DenseMatrix) -> DenseMatrix {
    assert_eq!(y.nrows(), op.nrows());
    let mut out = DenseMatrix::zeros(op.ncols(), y.ncols());
    for j in 0..y.ncols() {
        op.apply_adjoint_into(y.col(j), out.col_mut(j));
    }
    out
}

/// Dense copy of an operator, built column by column from unit vectors.
pub fn materialize<A: LinearOperator + ?Sized>(op: &A) -> DenseMatrix {
    apply_block(op, &DenseMatrix::identity(op.ncols()))
}
