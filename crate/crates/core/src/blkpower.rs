//! Block SVD power iterations that re-orthonormalize an accumulated pair of
//! bases and restore the one-sided structure.
//!
//! For `m <= n` the last QR is taken of `A V`, so with `R = u_r S v_rᵀ` the
//! output satisfies `A (V v_r) = (U u_r) S` exactly; for `m > n` the roles
//! of the two sides are mirrored and `Aᵀ U = V S` holds instead. The full
//! SVD of `R` is computed rather than reading `S` off its diagonal.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::gklb::fix_signs;
use crate::operator::{apply_adjoint_block, apply_block, LinearOperator};
use crate::qr::qr_economy;
use crate::svd::small_dense_svd;

#[derive(Clone, Debug)]
pub struct BlkPowerResult {
    pub u: DenseMatrix,
    /// Descending; zeros are kept.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn blk_svd_power<A, R>(op: &A, v: &DenseMatrix, u: &DenseMatrix, iter: usize, rng: &mut R) -> Result<BlkPowerResult>
where
    A: LinearOperator + ?Sized,
    R: RngCore + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    if iter == 0 {
        return Err(Error::Usage("blk_svd_power needs iter >= 1".into()));
    }
    if u.nrows() != m || v.nrows() != n {
        return Err(Error::Dimension(format!(
            "bases are {}x{} and {}x{} for a {m}x{n} operator",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    if u.ncols() != v.ncols() {
        return Err(Error::Dimension(format!(
            "U has {} columns but V has {}",
            u.ncols(),
            v.ncols()
        )));
    }
    let k = u.ncols();
    if k > m.min(n) {
        return Err(Error::Dimension(format!(
            "block of {k} columns exceeds min(m, n) = {}",
            m.min(n)
        )));
    }

    let (u, s, v) = if m <= n {
        let mut u = qr_economy(u, rng).0;
        let mut v = DenseMatrix::zeros(n, k);
        let mut r = DenseMatrix::zeros(k, k);
        for _ in 0..iter {
            v = qr_economy(&apply_adjoint_block(op, &u), rng).0;
            (u, r) = qr_economy(&apply_block(op, &v), rng);
        }
        // R = u_r S v_rᵀ
        let svd = small_dense_svd(&r)?;
        (u.matmul(&svd.u), svd.s, v.matmul(&svd.v))
    } else {
        let mut v = qr_economy(v, rng).0;
        let mut u = DenseMatrix::zeros(m, k);
        let mut r = DenseMatrix::zeros(k, k);
        for _ in 0..iter {
            u = qr_economy(&apply_block(op, &v), rng).0;
            (v, r) = qr_economy(&apply_adjoint_block(op, &u), rng);
        }
        // R = v_r S u_rᵀ
        let svd = small_dense_svd(&r)?;
        (u.matmul(&svd.v), svd.s, v.matmul(&svd.u))
    };
    let (mut u, mut v) = (u, v);
    fix_signs(&mut u, &mut v);
    Ok(BlkPowerResult { u, s, v })
}
