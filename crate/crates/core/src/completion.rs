//! Matrix completion by singular value thresholding, with the shrinkage
//! step computed by [`svt_run`] instead of a fixed-rank partial SVD.
//!
//! The iterate `Y` is always supported on the observed set, so it is held
//! as a sparse matrix with the pattern of `Ω`; `X = shrink_tau(Y)` is kept
//! in factored form and only sampled on `Ω`.

use alloc::format;
use alloc::vec::Vec;

use log::info;

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::gklb::{psvd, PsvdOptions};
use crate::rng::seeded;
use crate::sparse::SparseMatrix;
use crate::threshold::{svt_run, svt_run_traced, Flag, PartialSvd, SvtOptions, ThresholdSpec};

/// Observed entries `(i, j, M_ij)` of an `m x n` matrix.
#[derive(Clone, Debug)]
pub struct ObservedMatrix {
    samples: SparseMatrix,
}

impl ObservedMatrix {
    pub fn new(m: usize, n: usize, omega: &[(usize, usize, f64)]) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Usage("no observed entries".into()));
        }
        let mut idx: Vec<(usize, usize)> = omega.iter().map(|&(i, j, _)| (i, j)).collect();
        idx.sort_unstable();
        if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Usage(format!("entry ({}, {}) observed twice", w[0].0, w[0].1)));
        }
        Ok(Self {
            samples: SparseMatrix::from_triplets(m, n, omega)?,
        })
    }

    /// Every stored entry of `s`, explicit zeros included, counts as observed.
    pub fn from_sparse(samples: SparseMatrix) -> Result<Self> {
        if samples.nnz() == 0 {
            return Err(Error::Usage("no observed entries".into()));
        }
        Ok(Self { samples })
    }

    pub fn nrows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.samples.ncols()
    }

    /// `|Ω|`
    pub fn len(&self) -> usize {
        self.samples.nnz()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nnz() == 0
    }

    pub fn samples(&self) -> &SparseMatrix {
        &self.samples
    }

    /// `P_Ω(U diag(s) Vᵀ)` in the storage order of [`ObservedMatrix::samples`].
    pub fn sample_low_rank(&self, u: &DenseMatrix, s: &[f64], v: &DenseMatrix) -> Vec<f64> {
        let k = s.len();
        let mut urow = alloc::vec![0.0; k];
        let mut vrow = alloc::vec![0.0; k];
        self.samples
            .triplets()
            .map(|(i, j, _)| {
                for c in 0..k {
                    urow[c] = u.get(i, c) * s[c];
                    vrow[c] = v.get(j, c);
                }
                dot(&urow, &vrow)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SvtMcParams {
    /// Shrinkage threshold; default `5 sqrt(mn)`.
    pub tau: Option<f64>,
    /// Step size; default `1.2 mn / |Ω|`.
    pub delta: Option<f64>,
    /// Stop once `‖P_Ω(M − X)‖_F / ‖P_Ω M‖_F <= tol_outer`.
    pub tol_outer: f64,
    pub max_outer: usize,
    /// Request size of the first thresholding call.
    pub k0: usize,
    /// Increment of the request inside each thresholding call.
    pub incre: usize,
    /// Reuse the previous iteration's triplets as a warm start.
    pub warm_start: bool,
    /// Inner solver settings; `k`, `incre` and `warm_start` are overwritten.
    pub inner: SvtOptions,
}

impl Default for SvtMcParams {
    fn default() -> Self {
        Self {
            tau: None,
            delta: None,
            tol_outer: 1e-3,
            max_outer: 500,
            k0: 6,
            incre: 5,
            warm_start: true,
            inner: SvtOptions::default(),
        }
    }
}

/// Per outer iteration telemetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McIteration {
    pub rank: usize,
    pub residual: f64,
    /// Products spent inside `psvd` (a warm start's block power refresh excluded).
    pub psvd_matvecs: usize,
    pub total_matvecs: usize,
    pub flag: Flag,
}

#[derive(Clone, Debug)]
pub struct McResult {
    pub u: DenseMatrix,
    /// Soft-thresholded values `σ_i − tau`, all positive.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub tau: f64,
    pub delta: f64,
    pub history: Vec<McIteration>,
}

impl McResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        crate::dense::outer_product_sum(&self.u, &self.s, &self.v)
    }
}

/// Number of consecutive iterations the residual may sit 10x above its
/// running minimum before the run is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 20;

/// Soft thresholding `Σ (σ_i − tau)_+ u_i v_iᵀ` of `y`, in factored form.
/// Also returns the raw triplets for warm starts.
pub fn shrink(y: &SparseMatrix, tau: f64, opts: &SvtOptions) -> Result<(PartialSvd, PartialSvd)> {
    let p = svt_run(y, &ThresholdSpec::sigma(tau), opts)?;
    Ok((soft_threshold(&p, tau), p))
}

fn soft_threshold(p: &PartialSvd, tau: f64) -> PartialSvd {
    let keep: Vec<usize> = (0..p.len()).filter(|&i| p.s[i] > tau).collect();
    PartialSvd {
        u: p.u.select_columns(&keep),
        s: keep.iter().map(|&i| p.s[i] - tau).collect(),
        v: p.v.select_columns(&keep),
        flag: p.flag,
    }
}

pub fn svt_mc_complete(obs: &ObservedMatrix, params: &SvtMcParams) -> Result<McResult> {
    let (m, n) = (obs.nrows(), obs.ncols());
    let mn = (m * n) as f64;
    let tau = params.tau.unwrap_or(5.0 * libm::sqrt(mn));
    let delta = params.delta.unwrap_or(1.2 * mn / obs.len() as f64);
    if !(tau > 0.0 && delta > 0.0 && params.tol_outer > 0.0) || params.max_outer == 0 || params.k0 == 0 {
        return Err(Error::Usage(format!(
            "invalid completion parameters: tau {tau}, delta {delta}, tol {}, max_outer {}, k0 {}",
            params.tol_outer, params.max_outer, params.k0
        )));
    }

    let observed = obs.samples().values();
    let norm_obs = libm::sqrt(obs.samples().fro_norm_sq());
    let empty = |iterations| McResult {
        u: DenseMatrix::zeros(m, 0),
        s: Vec::new(),
        v: DenseMatrix::zeros(n, 0),
        iterations,
        residual: 0.0,
        tau,
        delta,
        history: Vec::new(),
    };
    if norm_obs == 0.0 {
        // X = 0 is already a fixed point.
        return Ok(empty(1));
    }

    // Y0 = k0 delta P_Ω(M), with k0 the first multiple at which shrinkage is nonzero.
    let top = {
        let mut rng = seeded(params.inner.seed);
        if m.min(n) > 1 {
            psvd(obs.samples(), 1, &PsvdOptions::default(), &mut rng)?
                .s
                .first()
                .copied()
                .unwrap_or(0.0)
        } else {
            norm_obs
        }
    };
    let kick = if top > 0.0 {
        libm::ceil(tau / (delta * top)).max(1.0)
    } else {
        1.0
    };
    let mut y = obs.samples().clone();
    for v in y.values_mut() {
        *v *= kick * delta;
    }

    let mut inner = params.inner.clone();
    inner.incre = params.incre;
    inner.k = params.k0;
    inner.warm_start = None;
    let mut x = PartialSvd::empty(m, n, Flag::Success);
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut above_best = 0;
    let mut residual = f64::INFINITY;

    for iter in 1..=params.max_outer {
        let (p, trace) = svt_run_traced(&y, &ThresholdSpec::sigma(tau), &inner)?;
        x = soft_threshold(&p, tau);
        // Cold: ask for one more than the last rank. Warm: the refreshed
        // triplets are deflated, so one probe decides whether anything new is above tau.
        inner.k = if params.warm_start && !p.is_empty() {
            1
        } else {
            (p.len() + 1).min(m.min(n))
        };
        inner.warm_start = if params.warm_start && !p.is_empty() {
            Some(p)
        } else {
            None
        };
        // Stale triplets need one block power refresh before they can be deflated.
        inner.pwrsvd = if inner.warm_start.is_some() {
            params.inner.pwrsvd.max(1)
        } else {
            params.inner.pwrsvd
        };

        let sampled = obs.sample_low_rank(&x.u, &x.s, &x.v);
        let mut res_sq = 0.0;
        for (yv, (&mv, &xv)) in y.values_mut().iter_mut().zip(observed.iter().zip(&sampled)) {
            let r = mv - xv;
            res_sq += r * r;
            *yv += delta * r;
        }
        residual = libm::sqrt(res_sq) / norm_obs;
        history.push(McIteration {
            rank: x.len(),
            residual,
            psvd_matvecs: trace.iterations.iter().map(|r| r.psvd_matvecs).sum(),
            total_matvecs: trace.total_matvecs,
            flag: x.flag,
        });
        if params.inner.display {
            info!("outer {iter}: rank {}, residual {residual:.3e}", x.len());
        }
        if residual <= params.tol_outer {
            return Ok(McResult {
                u: x.u,
                s: x.s,
                v: x.v,
                iterations: iter,
                residual,
                tau,
                delta,
                history,
            });
        }
        if residual < best {
            best = residual;
            above_best = 0;
        } else if residual > 10.0 * best {
            above_best += 1;
            if above_best >= DIVERGENCE_WINDOW {
                return Err(Error::Diverged(format!(
                    "residual {residual:.3e} stayed above 10x its minimum {best:.3e} for {DIVERGENCE_WINDOW} iterations"
                )));
            }
        } else {
            above_best = 0;
        }
    }
    Ok(McResult {
        u: x.u,
        s: x.s,
        v: x.v,
        iterations: params.max_outer,
        residual,
        tau,
        delta,
        history,
    })
}
