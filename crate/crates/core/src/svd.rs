//! Small dense SVD by one-sided (Hestenes) Jacobi.
//!
//! Used on projected bidiagonal/triangular matrices inside the iterative
//! solvers and, in tests, as the brute-force oracle for full spectra.

use alloc::vec::Vec;

use crate::dense::{axpy, dot, norm2, scale, DenseMatrix};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 30;

/// Thin SVD `A = U diag(s) Vᵀ` with `s` descending and `U`, `V` having
/// `min(m, n)` orthonormal columns.
#[derive(Clone, Debug)]
pub struct SmallSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SmallSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        crate::dense::outer_product_sum(&self.u, &self.s, &self.v)
    }
}

pub fn small_dense_svd(a: &DenseMatrix) -> Result<SmallSvd> {
    if a.nrows() < a.ncols() {
        let t = small_dense_svd(&a.transpose())?;
        return Ok(SmallSvd { u: t.v, s: t.s, v: t.u });
    }
    if !a.is_finite() {
        return Err(Error::Usage("small_dense_svd input has non-finite entries".into()));
    }

    let (m, n) = (a.nrows(), a.ncols());
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    // Inner products below this are rounding noise of the whole matrix.
    let floor = f64::EPSILON * a.fro_norm_sq();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (wi, wj) = w.col_pair_mut(i, j);
                let alpha = dot(wi, wi);
                let beta = dot(wj, wj);
                let gamma = dot(wi, wj);
                let scale_ij = libm::sqrt(alpha) * libm::sqrt(beta);
                if gamma.abs() <= floor || gamma.abs() <= f64::EPSILON * scale_ij {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(wi, wj, c, s);
                let (vi, vj) = v.col_pair_mut(i, j);
                rotate(vi, vj, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            op: "small_dense_svd",
            iterations: MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = w.select_columns(&order);
    let v = v.select_columns(&order);

    // Columns at the noise floor are only orthogonal to the others up to
    // eps * ‖A‖_F / s_c, so clean U up in descending order.
    let mut refill = Vec::new();
    for (c, &sc) in s.iter().enumerate().take(n) {
        if sc == 0.0 {
            refill.push(c);
            continue;
        }
        scale(1.0 / sc, u.col_mut(c));
        for _ in 0..2 {
            for p in (0..c).filter(|p| !refill.contains(p)) {
                let (up, uc) = u.col_pair_mut(p, c);
                let h = dot(up, uc);
                axpy(-h, up, uc);
            }
        }
        let nrm = norm2(u.col(c));
        if nrm < 0.5 {
            refill.push(c);
        } else {
            scale(1.0 / nrm, u.col_mut(c));
        }
    }
    complete_basis(&mut u, &refill, m);
    Ok(SmallSvd { u, s, v })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Overwrite the listed columns with unit vectors orthogonal to all other
/// columns, each taken from the canonical vector with the largest
/// component outside the columns filled so far.
fn complete_basis(u: &mut DenseMatrix, targets: &[usize], m: usize) {
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|c| !targets.contains(c)).collect();
    for &t in targets {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for candidate in 0..m {
            let mut e = alloc::vec![0.0; m];
            e[candidate] = 1.0;
            for _ in 0..2 {
                for &c in &filled {
                    let h = dot(u.col(c), &e);
                    axpy(-h, u.col(c), &mut e);
                }
            }
            let nrm = norm2(&e);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, e));
            }
        }
        let (nrm, mut e) = best.expect("m >= 1");
        assert!(nrm > 0.0, "no room to complete an orthonormal basis");
        scale(1.0 / nrm, &mut e);
        u.col_mut(t).copy_from_slice(&e);
        filled.push(t);
    }
}
