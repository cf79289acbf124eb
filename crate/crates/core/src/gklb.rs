//! Thick-restarted Golub–Kahan–Lanczos bidiagonalization (`psvd`).
//!
//! The factorization kept here is
//!
//! ```text
//!     W V = U B                 (exact up to rounding)
//!     Wᵀ U = V Bᵀ + f cᵀ        (all approximation error lives in f)
//! ```
//!
//! where `W` is the input operator oriented so that `nrows <= ncols`, `B` is
//! upper triangular (bidiagonal between restarts, an arrowhead block right
//! after one) and `c` is the coupling row of the residual. For a plain
//! Lanczos run `c = e_j`. Because the right-hand identity carries all the
//! error, every Ritz triplet `(σ, U p, V q)` satisfies `W (V q) = σ (U p)`
//! exactly and has residual `‖f‖ |cᵀ p|` on the other side.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::dense::{axpy, dot, norm2, scale, DenseMatrix};
use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Transposed};
use crate::rng::gaussian_vec;
use crate::svd::{small_dense_svd, SmallSvd};

const BREAKDOWN_FACTOR: f64 = 10.0;
const FRESH_DIRECTION_RETRIES: usize = 3;

/// Working state of the bidiagonalization.
#[derive(Clone, Debug)]
pub struct GklbFactorization {
    u: DenseMatrix,
    v: DenseMatrix,
    b: DenseMatrix,
    f: Vec<f64>,
    coupling: Vec<f64>,
    norm_estimate: f64,
    breakdowns: usize,
}

/// Ritz approximations extracted from a factorization.
#[derive(Clone, Debug)]
pub struct RitzPairs {
    pub svd: SmallSvd,
    /// `‖Wᵀ u_i − σ_i v_i‖` for each Ritz triplet.
    pub residuals: Vec<f64>,
}

impl GklbFactorization {
    /// Empty factorization for an `nrows x ncols` operator; `start` seeds
    /// the first right Lanczos vector.
    pub fn new(nrows: usize, ncols: usize, start: Vec<f64>) -> Self {
        assert_eq!(start.len(), ncols, "starting vector length");
        Self {
            u: DenseMatrix::zeros(nrows, 0),
            v: DenseMatrix::zeros(ncols, 0),
            b: DenseMatrix::zeros(0, 0),
            f: start,
            coupling: Vec::new(),
            norm_estimate: 0.0,
            breakdowns: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn residual(&self) -> &[f64] {
        &self.f
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    /// Largest Ritz value or Lanczos coefficient seen so far.
    pub fn norm_estimate(&self) -> f64 {
        self.norm_estimate
    }

    /// Number of invariant-subspace breakdowns handled by fresh directions.
    pub fn breakdowns(&self) -> usize {
        self.breakdowns
    }

    fn breakdown_tol(&self) -> f64 {
        BREAKDOWN_FACTOR * f64::EPSILON * self.norm_estimate
    }

    /// Ritz values, vectors (in the projected basis) and residual norms.
    pub fn ritz(&mut self) -> Result<RitzPairs> {
        let svd = small_dense_svd(&self.b)?;
        let fnorm = norm2(&self.f);
        let residuals = (0..svd.s.len())
            .map(|i| fnorm * dot(&self.coupling, svd.u.col(i)).abs())
            .collect();
        if let Some(&top) = svd.s.first() {
            self.norm_estimate = self.norm_estimate.max(top);
        }
        Ok(RitzPairs { svd, residuals })
    }
}

/// Extend `state` to `target_dim` Lanczos vectors per side, with full
/// reorthogonalization of every new vector against its whole side.
///
/// A breakdown (`‖f‖` or the new left residual below `10 eps ‖A‖_est`) is
/// continued with a seeded random direction orthogonal to the existing
/// basis; three failed draws in a row report [`Error::RankExhausted`].
pub fn gklb_extend<A, R>(
    op: &A,
    mut state: GklbFactorization,
    target_dim: usize,
    rng: &mut R,
) -> Result<GklbFactorization>
where
    A: LinearOperator + ?Sized,
    R: RngCore + ?Sized,
{
    let (rows, cols) = (op.nrows(), op.ncols());
    if state.u.nrows() != rows || state.v.nrows() != cols {
        return Err(Error::Dimension("factorization does not match operator".into()));
    }
    if target_dim > rows.min(cols) {
        return Err(Error::Usage(alloc::format!(
            "target dimension {target_dim} exceeds min(m, n) = {}",
            rows.min(cols)
        )));
    }

    let mut p = vec![0.0; rows];
    while state.dim() < target_dim {
        let j = state.dim();

        let beta = norm2(&state.f);
        let (v_new, coupling_col) = if beta == 0.0 || beta <= state.breakdown_tol() {
            if j > 0 {
                state.breakdowns += 1;
            }
            (fresh_direction(&state.v, rng, j)?, vec![0.0; j])
        } else {
            let mut v_new = state.f.clone();
            scale(1.0 / beta, &mut v_new);
            let cc: Vec<f64> = state.coupling.iter().map(|c| c * beta).collect();
            state.norm_estimate = state.norm_estimate.max(beta);
            (v_new, cc)
        };

        op.apply_into(&v_new, &mut p);
        for (i, &c) in coupling_col.iter().enumerate() {
            if c != 0.0 {
                axpy(-c, state.u.col(i), &mut p);
            }
        }
        reorthogonalize(&state.u, &mut p);
        let mut alpha = norm2(&p);
        state.norm_estimate = state.norm_estimate.max(alpha);
        let u_new = if alpha == 0.0 || alpha <= state.breakdown_tol() {
            state.breakdowns += 1;
            alpha = 0.0;
            fresh_direction(&state.u, rng, j)?
        } else {
            let mut u = p.clone();
            scale(1.0 / alpha, &mut u);
            u
        };

        let mut b = DenseMatrix::zeros(j + 1, j + 1);
        for c in 0..j {
            for r in 0..=c {
                b.set(r, c, state.b.get(r, c));
            }
        }
        for (r, &c) in coupling_col.iter().enumerate() {
            b.set(r, j, c);
        }
        b.set(j, j, alpha);
        state.b = b;

        let mut f = op.apply_adjoint(&u_new);
        axpy(-alpha, &v_new, &mut f);
        state.v.push_col(&v_new);
        state.u.push_col(&u_new);
        reorthogonalize(&state.v, &mut f);
        state.f = f;
        state.coupling = vec![0.0; j + 1];
        state.coupling[j] = 1.0;
    }
    Ok(state)
}

/// Compress `state` onto the Ritz vectors of its `keep` largest Ritz values.
///
/// The result has dimension `keep` with `B = diag(σ_1..σ_keep)`; the
/// residual direction is retained in `f` with coupling weights `cᵀ p_i`, so
/// the next [`gklb_extend`] continues from the residual direction exactly.
pub fn thick_restart(mut state: GklbFactorization, keep: usize) -> Result<GklbFactorization> {
    if keep == 0 || keep >= state.dim() {
        return Err(Error::Usage(alloc::format!(
            "thick restart needs 0 < keep < {}, got {keep}",
            state.dim()
        )));
    }
    let ritz = state.ritz()?;
    let p = ritz.svd.u.columns(0..keep);
    let q = ritz.svd.v.columns(0..keep);
    let coupling: Vec<f64> = (0..keep).map(|i| dot(&state.coupling, p.col(i))).collect();
    Ok(GklbFactorization {
        u: state.u.matmul(&p),
        v: state.v.matmul(&q),
        b: DenseMatrix::from_diagonal(&ritz.svd.s[..keep]),
        f: state.f,
        coupling,
        norm_estimate: state.norm_estimate,
        breakdowns: state.breakdowns,
    })
}

/// Knobs of the `psvd` engine.
#[derive(Clone, Debug)]
pub struct PsvdOptions {
    /// Relative residual tolerance against the running norm estimate.
    pub tol: f64,
    pub max_restarts: usize,
    /// Subspace dimension; `None` means `min(k + 7, min(m, n))`.
    pub work_dim: Option<usize>,
    /// Starting vector in the longer dimension; `None` draws a seeded Gaussian.
    pub start: Option<Vec<f64>>,
}

impl Default for PsvdOptions {
    fn default() -> Self {
        Self {
            tol: libm::sqrt(f64::EPSILON),
            max_restarts: 1000,
            work_dim: None,
            start: None,
        }
    }
}

/// Converged leading triplets of a `psvd` call.
#[derive(Clone, Debug)]
pub struct PsvdResult {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    /// Number of converged triplets returned (`s.len()`).
    pub converged: usize,
    pub estimated_norm: f64,
    /// Extension/restart cycles performed.
    pub restarts: usize,
    /// Largest Ritz value after each cycle.
    pub top_ritz_history: Vec<f64>,
}

fn restart_keep(k: usize, dim: usize) -> usize {
    (k + 3).min(dim.saturating_sub(3)).max(k.min(dim - 1)).max(1)
}

/// The `k` largest singular triplets of `op`.
///
/// Runs on `op` when `m <= n` and on `opᵀ` otherwise, so the exact side of
/// the returned triplets is always the short one: `A V = U S` when `m <= n`,
/// `Aᵀ U = V S` when `m > n`. Triplets are returned as the longest leading
/// run satisfying `‖residual_i‖ <= tol * estimated_norm`; hitting
/// `max_restarts` is not an error, it just yields fewer than `k`.
pub fn psvd<A, R>(op: &A, k: usize, opts: &PsvdOptions, rng: &mut R) -> Result<PsvdResult>
where
    A: LinearOperator + ?Sized,
    R: RngCore + ?Sized,
{
    let (m, n) = (op.nrows(), op.ncols());
    if k == 0 || k >= m.min(n) {
        return Err(Error::Usage(alloc::format!(
            "psvd needs 1 <= k < min(m, n) = {}, got k = {k}",
            m.min(n)
        )));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::Usage(alloc::format!("tol must lie in (0, 1), got {}", opts.tol)));
    }
    if m <= n {
        let mut r = run_psvd(op, k, opts, rng)?;
        fix_signs(&mut r.u, &mut r.v);
        Ok(r)
    } else {
        let mut r = run_psvd(&Transposed(op), k, opts, rng)?;
        core::mem::swap(&mut r.u, &mut r.v);
        fix_signs(&mut r.u, &mut r.v);
        Ok(r)
    }
}

fn run_psvd<W, R>(w: &W, k: usize, opts: &PsvdOptions, rng: &mut R) -> Result<PsvdResult>
where
    W: LinearOperator + ?Sized,
    R: RngCore + ?Sized,
{
    let (rows, cols) = (w.nrows(), w.ncols());
    let dim = opts.work_dim.unwrap_or(k + 7).min(rows).max(k + 1);
    let keep = restart_keep(k, dim);
    let start = match &opts.start {
        Some(s) if s.len() == cols => s.clone(),
        Some(s) => {
            return Err(Error::Dimension(alloc::format!(
                "starting vector has length {}, expected {cols}",
                s.len()
            )))
        }
        None => gaussian_vec(rng, cols),
    };

    let mut state = GklbFactorization::new(rows, cols, start);
    let mut history = Vec::new();
    let max_cycles = opts.max_restarts.max(1);
    let mut cycles = 0;
    let (ritz, state) = loop {
        state = gklb_extend(w, state, dim, rng)?;
        let ritz = state.ritz()?;
        cycles += 1;
        history.push(ritz.svd.s[0]);
        let bound = opts.tol * state.norm_estimate();
        let done = ritz.residuals[..k].iter().all(|&r| r <= bound);
        if done || cycles >= max_cycles {
            break (ritz, state);
        }
        state = thick_restart(state, keep)?;
    };

    let bound = opts.tol * state.norm_estimate();
    let converged = ritz.residuals[..k].iter().take_while(|&&r| r <= bound).count();
    let u = state.u().matmul(&ritz.svd.u.columns(0..converged));
    let v = state.v().matmul(&ritz.svd.v.columns(0..converged));
    Ok(PsvdResult {
        u,
        s: ritz.svd.s[..converged].to_vec(),
        v,
        converged,
        estimated_norm: state.norm_estimate(),
        restarts: cycles,
        top_ritz_history: history,
    })
}

/// Flip each pair so the largest-magnitude entry of `u_i` is nonnegative.
pub fn fix_signs(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    for i in 0..u.ncols() {
        let col = u.col(i);
        let mut best = 0;
        for (r, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = r;
            }
        }
        if col.get(best).is_some_and(|&x| x < 0.0) {
            u.negate_col(i);
            v.negate_col(i);
        }
    }
}

/// Two passes of classical Gram–Schmidt against every column of `basis`.
pub(crate) fn reorthogonalize(basis: &DenseMatrix, x: &mut [f64]) {
    for _ in 0..2 {
        for c in 0..basis.ncols() {
            let h = dot(basis.col(c), x);
            axpy(-h, basis.col(c), x);
        }
    }
}

fn fresh_direction<R: RngCore + ?Sized>(basis: &DenseMatrix, rng: &mut R, dim: usize) -> Result<Vec<f64>> {
    for _ in 0..FRESH_DIRECTION_RETRIES {
        let mut x = gaussian_vec(rng, basis.nrows());
        let before = norm2(&x);
        reorthogonalize(basis, &mut x);
        let after = norm2(&x);
        if after > 1e-3 * before {
            scale(1.0 / after, &mut x);
            return Ok(x);
        }
    }
    Err(Error::RankExhausted(dim))
}
