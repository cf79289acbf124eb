//! Column-major dense matrices and the handful of vector kernels the
//! Krylov and block routines are built from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Dense real matrix stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut out = Self::zeros(n, n);
        for (i, &di) in d.iter().enumerate() {
            out.set(i, i, di);
        }
        out
    }

    /// Rectangular diagonal matrix with `d` on its main diagonal.
    pub fn rect_diagonal(nrows: usize, ncols: usize, d: &[f64]) -> Self {
        assert!(d.len() <= nrows.min(ncols));
        let mut out = Self::zeros(nrows, ncols);
        for (i, &di) in d.iter().enumerate() {
            out.set(i, i, di);
        }
        out
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    /// Convenience constructor from row-major literals, mostly for tests.
    pub fn from_row_major(nrows: usize, ncols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {nrows}x{ncols} matrix",
                values.len()
            )));
        }
        let mut out = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                out.set(i, j, values[i * ncols + j]);
            }
        }
        Ok(out)
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            if c.len() != nrows {
                return Err(Error::Dimension(format!(
                    "column of length {} in a matrix with {nrows} rows",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            nrows,
            ncols: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    /// Mutable access to two distinct columns at once.
    pub fn col_pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert!(a < b && b < self.ncols);
        let m = self.nrows;
        let (lo, hi) = self.data.split_at_mut(b * m);
        (&mut lo[a * m..(a + 1) * m], &mut hi[..m])
    }

    pub fn push_col(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.nrows);
        self.data.extend_from_slice(c);
        self.ncols += 1;
    }

    pub fn truncate_cols(&mut self, k: usize) {
        if k < self.ncols {
            self.ncols = k;
            self.data.truncate(k * self.nrows);
        }
    }

    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.ncols);
        Self {
            nrows: self.nrows,
            ncols: range.len(),
            data: self.data[range.start * self.nrows..range.end * self.nrows].to_vec(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.nrows);
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self {
            nrows: self.nrows,
            ncols: idx.len(),
            data,
        }
    }

    /// `[self other]`
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.nrows, other.nrows, "hcat row mismatch");
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Self {
            nrows: self.nrows,
            ncols: self.ncols + other.ncols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for (i, &v) in self.col(j).iter().enumerate() {
                out.set(j, i, v);
            }
        }
        out
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "matmul inner dimension mismatch");
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            let dst = &mut out.data[j * self.nrows..(j + 1) * self.nrows];
            for (p, &r) in rhs.col(j).iter().enumerate() {
                if r != 0.0 {
                    axpy(r, &self.data[p * self.nrows..(p + 1) * self.nrows], dst);
                }
            }
        }
        out
    }

    /// `selfᵀ * rhs`
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.nrows, rhs.nrows, "tr_matmul row mismatch");
        let mut out = Self::zeros(self.ncols, rhs.ncols);
        for j in 0..rhs.ncols {
            let r = rhs.col(j);
            for i in 0..self.ncols {
                out.data[j * self.ncols + i] = dot(self.col(i), r);
            }
        }
        out
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// `selfᵀ * y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.col(j), y)).collect()
    }

    /// Multiply column `j` by `s[j]`.
    pub fn scale_columns(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.ncols);
        for (j, &sj) in s.iter().enumerate() {
            scale(sj, self.col_mut(j));
        }
    }

    pub fn negate_col(&mut self, j: usize) {
        scale(-1.0, self.col_mut(j));
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn fro_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn fro_norm(&self) -> f64 {
        libm::sqrt(self.fro_norm_sq())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Column `j` carries `s[j]`; computes `U diag(s) Vᵀ`.
pub fn outer_product_sum(u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> DenseMatrix {
    let mut us = u.clone();
    us.scale_columns(s);
    us.matmul(&v.transpose())
}
