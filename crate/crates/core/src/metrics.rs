//! Error measures for partial SVDs. All norms are Frobenius norms.

use crate::dense::{outer_product_sum, DenseMatrix};
use crate::operator::{apply_adjoint_block, apply_block, LinearOperator};

/// `‖QᵀQ − I‖_F`
pub fn orthogonality_defect(q: &DenseMatrix) -> f64 {
    let mut g = q.tr_matmul(q);
    for i in 0..g.ncols() {
        g.set(i, i, g.get(i, i) - 1.0);
    }
    g.fro_norm()
}

/// `sqrt(‖VᵀV − I‖² + ‖UᵀU − I‖²)`
pub fn orthogonality_error(u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    libm::hypot(orthogonality_defect(u), orthogonality_defect(v))
}

/// `‖A V − U diag(s)‖_F`
pub fn right_residual<A: LinearOperator + ?Sized>(op: &A, u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> f64 {
    let mut us = u.clone();
    us.scale_columns(s);
    apply_block(op, v).sub(&us).fro_norm()
}

/// `‖Aᵀ U − V diag(s)‖_F`
pub fn left_residual<A: LinearOperator + ?Sized>(op: &A, u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> f64 {
    let mut vs = v.clone();
    vs.scale_columns(s);
    apply_adjoint_block(op, u).sub(&vs).fro_norm()
}

/// `sqrt(‖A V − U S‖² + ‖Aᵀ U − V S‖²)`
pub fn total_residual<A: LinearOperator + ?Sized>(op: &A, u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> f64 {
    libm::hypot(right_residual(op, u, s, v), left_residual(op, u, s, v))
}

/// Captured Frobenius mass `Σ s_i² / ‖A‖_F²`, clamped to `[0, 1 + 1e-12]`.
pub fn energy_fraction(s: &[f64], fro_norm_sq: f64) -> f64 {
    assert!(fro_norm_sq > 0.0, "energy_fraction needs a positive ‖A‖_F²");
    let captured: f64 = s.iter().map(|x| x * x).sum();
    (captured / fro_norm_sq).clamp(0.0, 1.0 + 1e-12)
}

/// nrmse implied by an energy fraction under one-sided structure.
pub fn nrmse_from_energy(energy: f64) -> f64 {
    libm::sqrt((1.0 - energy).max(0.0))
}

/// `‖A − U diag(s) Vᵀ‖_F / ‖A‖_F` computed directly.
pub fn direct_nrmse(a: &DenseMatrix, u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> f64 {
    a.sub(&outer_product_sum(u, s, v)).fro_norm() / a.fro_norm()
}
