//! Economy Householder QR with rank detection.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dense::{dot, norm2, DenseMatrix};
use crate::rng::gaussian_vec;

/// Economy QR of an `m x k` matrix (`m >= k`).
///
/// `R` has a nonnegative diagonal. A column whose remaining norm after the
/// previous reflections falls below `m * eps * max_column_norm` is treated
/// as dependent: its `Q` column is drawn at random from the orthogonal
/// complement of the preceding columns and its diagonal entry in `R` is 0.
/// `Q` therefore always has orthonormal columns.
pub fn qr_economy<R: RngCore + ?Sized>(a: &DenseMatrix, rng: &mut R) -> (DenseMatrix, DenseMatrix) {
    let (m, k) = (a.nrows(), a.ncols());
    assert!(m >= k, "qr_economy needs nrows >= ncols, got {m}x{k}");

    let max_col = (0..k).map(|j| norm2(a.col(j))).fold(0.0, f64::max);
    let threshold = m as f64 * f64::EPSILON * max_col;

    let mut work = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut deficient = alloc::vec![false; k];

    for j in 0..k {
        let mut x: Vec<f64> = work.col(j)[j..].to_vec();
        let mut alpha = norm2(&x);
        if alpha <= threshold {
            deficient[j] = true;
            // Random direction expressed in the already-reflected basis.
            x = gaussian_vec(rng, m - j);
            alpha = norm2(&x);
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x;
        v[0] += sign * alpha;
        let vnorm = norm2(&v);
        if vnorm > 0.0 {
            for vi in v.iter_mut() {
                *vi /= vnorm;
            }
        }
        // Columns after j only; column j becomes (-sign*alpha, 0, ...).
        for c in (j + 1)..k {
            let col = &mut work.col_mut(c)[j..];
            let t = 2.0 * dot(&v, col);
            for (ci, vi) in col.iter_mut().zip(&v) {
                *ci -= t * vi;
            }
        }
        let col = work.col_mut(j);
        col[j] = if deficient[j] { 0.0 } else { -sign * alpha };
        for ci in col[j + 1..].iter_mut() {
            *ci = 0.0;
        }
        reflectors.push(v);
    }

    let mut r = DenseMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j {
            r.set(i, j, work.get(i, j));
        }
    }

    // Q = H_0 H_1 ... H_{k-1} [I; 0]
    let mut q = DenseMatrix::zeros(m, k);
    for j in 0..k {
        q.set(j, j, 1.0);
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        for c in 0..k {
            let col = &mut q.col_mut(c)[j..];
            let t = 2.0 * dot(v, col);
            if t != 0.0 {
                for (ci, vi) in col.iter_mut().zip(v) {
                    *ci -= t * vi;
                }
            }
        }
    }

    for j in 0..k {
        if r.get(j, j) < 0.0 {
            q.negate_col(j);
            for c in j..k {
                r.set(j, c, -r.get(j, c));
            }
        }
    }
    (q, r)
}
