//! The threshold driver: all singular triplets above `sigma` (or enough of
//! them to capture an energy fraction) via repeated `psvd` calls on an
//! explicitly deflated operator, with block power merges whenever the
//! accumulated bases lose structure.
//!
//! One outer iteration:
//!
//! 1. deflate the triplets found so far (left side when `m <= n`, right
//!    side otherwise), applied implicitly;
//! 2. ask [`psvd`] for `k` more triplets, re-calling once with a larger
//!    budget if nothing converges;
//! 3. if the new vectors are not orthogonal to the old ones (C1), a value
//!    already deflated to zero reappeared (C2), or the engine returned only
//!    part of the request (C3), rebuild everything with
//!    [`blk_svd_power`]; otherwise append;
//! 4. test the exit condition, then grow `k` by `incre` and double `incre`.

use alloc::format;
use alloc::vec::Vec;

use log::info;

use crate::blkpower::blk_svd_power;
use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::gklb::{psvd, PsvdOptions, PsvdResult};
use crate::metrics::{energy_fraction, orthogonality_error};
use crate::operator::{CountingOperator, LinearOperator};
use crate::rng::{seeded, SvtRng, DEFAULT_SEED};

/// `sqrt(eps)` for double precision, the level C1 and C2 compare against.
pub const SQRT_EPS: f64 = 1.4901161193847656e-8;

/// Largest `UV_err` an output may leave with. C1 lets appended blocks keep
/// cross terms up to `sqrt(eps) / (ℓ + k)`, which can add up past this.
pub const ORTHOGONALITY_CEILING: f64 = 1e-10;

/// What the driver is asked to capture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Every singular value `>= sigma`.
    Sigma(f64),
    /// The shortest leading run with `Σ s_i² / ‖A‖_F² >= energy`.
    Energy(f64),
    /// No threshold: the top `k` triplets.
    TopK,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSpec {
    pub threshold: Threshold,
    /// `‖A‖_F²` for operators that cannot report it themselves.
    pub fro_norm_sq_override: Option<f64>,
}

impl ThresholdSpec {
    pub fn sigma(sigma: f64) -> Self {
        Self {
            threshold: Threshold::Sigma(sigma),
            fro_norm_sq_override: None,
        }
    }

    pub fn energy(energy: f64) -> Self {
        Self {
            threshold: Threshold::Energy(energy),
            fro_norm_sq_override: None,
        }
    }

    pub fn top_k() -> Self {
        Self {
            threshold: Threshold::TopK,
            fro_norm_sq_override: None,
        }
    }

    pub fn with_fro_norm_sq(mut self, fro_norm_sq: f64) -> Self {
        self.fro_norm_sq_override = Some(fro_norm_sq);
        self
    }

    /// Build from optional `sigma` / `energy` inputs; both at once is a usage error.
    pub fn from_parts(sigma: Option<f64>, energy: Option<f64>) -> Result<Self> {
        let spec = match (sigma, energy) {
            (Some(_), Some(_)) => return Err(Error::Usage("sigma and energy cannot be combined".into())),
            (Some(s), None) => Self::sigma(s),
            (None, Some(e)) => Self::energy(e),
            (None, None) => Self::top_k(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.threshold {
            Threshold::Sigma(s) if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::Usage(format!("sigma must be a finite value >= 0, got {s}")))
            }
            Threshold::Energy(e) if !(e > 0.0 && e <= 1.0) => {
                Err(Error::Usage(format!("energy must lie in (0, 1], got {e}")))
            }
            _ => match self.fro_norm_sq_override {
                Some(f) if !(f > 0.0 && f.is_finite()) => Err(Error::Usage(format!(
                    "Frobenius norm override must be positive, got {f}"
                ))),
                _ => Ok(()),
            },
        }
    }
}

/// Exit status of [`svt_run`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Flag {
    /// Threshold or energy satisfied.
    Success = 0,
    /// `psvd` converged nothing, even after the one recall.
    PsvdFailed = 1,
    /// The output reached `psvdmax` triplets before the threshold was met.
    PsvdMaxReached = 2,
    /// No singular value lies above `sigma`; the output is empty.
    NoneAboveSigma = 3,
}

impl Flag {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Accumulated triplets plus the exit flag.
#[derive(Clone, Debug)]
pub struct PartialSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    pub flag: Flag,
}

impl PartialSvd {
    pub fn empty(m: usize, n: usize, flag: Flag) -> Self {
        Self {
            u: DenseMatrix::zeros(m, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
            flag,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Keep the leading `k` triplets.
    pub fn truncate(&mut self, k: usize) {
        self.s.truncate(k);
        self.u.truncate_cols(k);
        self.v.truncate_cols(k);
    }

    fn validate_against(&self, m: usize, n: usize) -> Result<()> {
        let l = self.s.len();
        if self.u.nrows() != m || self.v.nrows() != n || self.u.ncols() != l || self.v.ncols() != l {
            return Err(Error::Dimension(format!(
                "warm start U is {}x{}, V is {}x{} with {l} values; operator is {m}x{n}",
                self.u.nrows(),
                self.u.ncols(),
                self.v.nrows(),
                self.v.ncols()
            )));
        }
        Ok(())
    }

    fn sort_descending(&mut self) {
        let mut order: Vec<usize> = (0..self.s.len()).collect();
        order.sort_by(|&a, &b| self.s[b].total_cmp(&self.s[a]).then(a.cmp(&b)));
        if order.iter().enumerate().all(|(i, &j)| i == j) {
            return;
        }
        self.s = order.iter().map(|&j| self.s[j]).collect();
        self.u = self.u.select_columns(&order);
        self.v = self.v.select_columns(&order);
    }

    /// Remove triplets whose value is `<= floor`.
    fn drop_at_or_below(&mut self, floor: f64) -> usize {
        let keep: Vec<usize> = (0..self.s.len()).filter(|&i| self.s[i] > floor).collect();
        let dropped = self.s.len() - keep.len();
        if dropped > 0 {
            self.s = keep.iter().map(|&j| self.s[j]).collect();
            self.u = self.u.select_columns(&keep);
            self.v = self.v.select_columns(&keep);
        }
        dropped
    }
}

/// Driver parameters. `None` fields take their size-dependent defaults.
#[derive(Clone, Debug)]
pub struct SvtOptions {
    pub tol: f64,
    /// Initial number of triplets requested from `psvd`.
    pub k: usize,
    /// Initial increment added to `k` after each outer iteration.
    pub incre: usize,
    /// Largest request `k` may grow to; default `min(0.1 min(m, n), 100)`, at least `k`.
    pub kmax: Option<usize>,
    /// Largest output size; default `max(min(100 + |S0|, min(m, n)), k)`.
    pub psvdmax: Option<usize>,
    /// Block power iterations forced on every outer iteration (0 = only on demand).
    pub pwrsvd: usize,
    pub seed: u64,
    pub display: bool,
    /// Restart budget handed to each `psvd` call.
    pub max_restarts: usize,
    /// Starting vector for `psvd`, of length `max(m, n)`.
    pub p0: Option<Vec<f64>>,
    pub warm_start: Option<PartialSvd>,
}

impl Default for SvtOptions {
    fn default() -> Self {
        Self {
            tol: SQRT_EPS,
            k: 6,
            incre: 5,
            kmax: None,
            psvdmax: None,
            pwrsvd: 0,
            seed: DEFAULT_SEED,
            display: false,
            max_restarts: 1000,
            p0: None,
            warm_start: None,
        }
    }
}

/// Operator with the found triplets projected out.
///
/// `Left` applies `A_d = A − U (Uᵀ A)`; `Right` applies `A_d = A (I − V Vᵀ)`,
/// i.e. `A_dᵀ = Aᵀ − V (A V)ᵀ`. Nothing is materialized.
pub struct DeflatedOperator<'a, A: ?Sized> {
    base: &'a A,
    lock: &'a DenseMatrix,
    side: DeflationSide,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeflationSide {
    Left,
    Right,
}

impl<'a, A: LinearOperator + ?Sized> DeflatedOperator<'a, A> {
    /// `lock` must have orthonormal columns: `m x ℓ` for `Left`, `n x ℓ` for `Right`.
    pub fn new(base: &'a A, lock: &'a DenseMatrix, side: DeflationSide) -> Self {
        let expected = match side {
            DeflationSide::Left => base.nrows(),
            DeflationSide::Right => base.ncols(),
        };
        assert_eq!(lock.nrows(), expected, "locked basis has the wrong length");
        Self { base, lock, side }
    }

    /// The side that gets deflated for an `m x n` operator.
    pub fn side_for(m: usize, n: usize) -> DeflationSide {
        if m <= n {
            DeflationSide::Left
        } else {
            DeflationSide::Right
        }
    }
}

fn project_out(basis: &DenseMatrix, x: &mut [f64]) {
    if basis.ncols() == 0 {
        return;
    }
    let h = basis.tr_mul_vec(x);
    for (c, &hc) in h.iter().enumerate() {
        crate::dense::axpy(-hc, basis.col(c), x);
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for DeflatedOperator<'_, A> {
    fn nrows(&self) -> usize {
        self.base.nrows()
    }
    fn ncols(&self) -> usize {
        self.base.ncols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self.side {
            DeflationSide::Left => {
                self.base.apply_into(x, y);
                project_out(self.lock, y);
            }
            DeflationSide::Right => {
                let mut z = x.to_vec();
                project_out(self.lock, &mut z);
                self.base.apply_into(&z, y);
            }
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        match self.side {
            DeflationSide::Left => {
                let mut z = y.to_vec();
                project_out(self.lock, &mut z);
                self.base.apply_adjoint_into(&z, x);
            }
            DeflationSide::Right => {
                self.base.apply_adjoint_into(y, x);
                project_out(self.lock, x);
            }
        }
    }
}

fn max_abs_cross(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..a.ncols() {
        for j in 0..b.ncols() {
            best = best.max(dot(a.col(i), b.col(j)).abs());
        }
    }
    best
}

/// C1: the new basis vectors are not orthogonal enough to the accumulated
/// ones, `max |V1ᵀV|, |U1ᵀU| > sqrt(eps) / (ℓ + k)`. Never fires at `ℓ = 0`.
pub fn criterion_c1(
    v1: &DenseMatrix,
    v: &DenseMatrix,
    u1: &DenseMatrix,
    u: &DenseMatrix,
    ell: usize,
    k: usize,
) -> bool {
    if ell == 0 {
        return false;
    }
    let level = SQRT_EPS / (ell + k) as f64;
    max_abs_cross(v1, v).max(max_abs_cross(u1, u)) > level
}

/// C2: a value already mapped to zero by the deflation reappeared,
/// `min(s_new) < max(s_acc) sqrt(eps)`. Never fires with nothing accumulated.
pub fn criterion_c2(s_new: &[f64], s_acc: &[f64]) -> bool {
    let Some(max_acc) = s_acc.iter().copied().reduce(f64::max) else {
        return false;
    };
    let min_new = s_new.iter().copied().fold(f64::INFINITY, f64::min);
    min_new < max_acc * SQRT_EPS
}

/// Cut a descending partial SVD down to what the threshold asks for.
///
/// Sigma mode keeps exactly the values `>= sigma`; energy mode keeps the
/// shortest prefix reaching the target (everything if none does); top-k
/// mode returns the input unchanged.
pub fn truncate_threshold(p: &PartialSvd, threshold: Threshold, fro_norm_sq: Option<f64>) -> Result<PartialSvd> {
    let keep = match threshold {
        Threshold::Sigma(sigma) => p.s.iter().take_while(|&&s| s >= sigma).count(),
        Threshold::Energy(target) => {
            let fro = fro_norm_sq.ok_or_else(|| Error::Usage("energy truncation needs ‖A‖_F²".into()))?;
            let mut captured = 0.0;
            let mut keep = p.s.len();
            for (i, &s) in p.s.iter().enumerate() {
                captured += s * s;
                if energy_fraction(&[libm::sqrt(captured)], fro) >= target {
                    keep = i + 1;
                    break;
                }
            }
            keep
        }
        Threshold::TopK => p.s.len(),
    };
    let mut out = p.clone();
    out.truncate(keep);
    Ok(out)
}

/// One outer iteration, as recorded by [`svt_run_traced`].
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// Triplets held before this iteration.
    pub ell_before: usize,
    /// Triplets held after the merge/append step.
    pub ell_after: usize,
    /// Number of triplets requested from `psvd`.
    pub requested: usize,
    pub converged: usize,
    pub recalled: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub merged: bool,
    /// Matrix–vector products spent inside `psvd` (including a recall).
    pub psvd_matvecs: usize,
    /// `k` and `incre` after the end-of-iteration update.
    pub next_k: usize,
    pub next_incre: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    /// Products spent by a forced block power step on the warm start.
    pub warm_start_matvecs: usize,
    /// Whether the output needed the final re-orthonormalizing merge.
    pub polished: bool,
    pub total_matvecs: usize,
    pub kmax: usize,
    pub psvdmax: usize,
}

/// Resolved size-dependent defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolvedLimits {
    pub k: usize,
    pub kmax: usize,
    pub psvdmax: usize,
}

pub fn resolve_limits(m: usize, n: usize, opts: &SvtOptions) -> Result<ResolvedLimits> {
    let mn = m.min(n);
    if opts.k == 0 {
        return Err(Error::Usage("k must be at least 1".into()));
    }
    let k = opts.k.min(mn);
    let kmax = match opts.kmax {
        Some(kmax) if kmax < k => {
            return Err(Error::Usage(format!("kmax = {kmax} is below k = {k}")));
        }
        Some(kmax) => kmax.min(mn),
        None => (mn / 10).min(100).max(k).max(1),
    };
    let s0 = opts.warm_start.as_ref().map_or(0, PartialSvd::len);
    let psvdmax = match opts.psvdmax {
        Some(0) => return Err(Error::Usage("psvdmax must be at least 1".into())),
        Some(p) => p.min(mn),
        None => (100 + s0).min(mn).max(k),
    };
    Ok(ResolvedLimits { k, kmax, psvdmax })
}

/// All triplets of `op` above the threshold in `spec`.
pub fn svt_run<A: LinearOperator + ?Sized>(op: &A, spec: &ThresholdSpec, opts: &SvtOptions) -> Result<PartialSvd> {
    svt_run_traced(op, spec, opts).map(|(p, _)| p)
}

/// [`svt_run`] plus a per-iteration record of what the driver did.
pub fn svt_run_traced<A: LinearOperator + ?Sized>(
    op: &A,
    spec: &ThresholdSpec,
    opts: &SvtOptions,
) -> Result<(PartialSvd, SolverTrace)> {
    spec.validate()?;
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::Usage(format!("tol must lie in (0, 1), got {}", opts.tol)));
    }
    let (m, n) = (op.nrows(), op.ncols());
    let mn = m.min(n);
    if mn == 0 {
        return Err(Error::Usage(format!("cannot threshold an empty {m}x{n} operator")));
    }
    let limits = resolve_limits(m, n, opts)?;
    let fro_norm_sq = match spec.threshold {
        Threshold::Energy(_) => Some(
            spec.fro_norm_sq_override
                .or_else(|| op.fro_norm_sq())
                .ok_or_else(|| Error::Usage("energy mode needs ‖A‖_F² for a matrix-free operator".into()))?,
        ),
        _ => spec.fro_norm_sq_override.or_else(|| op.fro_norm_sq()),
    };
    if let Some(p0) = &opts.p0 {
        if p0.len() != m.max(n) {
            return Err(Error::Dimension(format!(
                "p0 has length {}, expected max(m, n) = {}",
                p0.len(),
                m.max(n)
            )));
        }
    }

    let counted = CountingOperator::new(op);
    let mut driver = Driver {
        op: &counted,
        m,
        n,
        threshold: spec.threshold,
        fro_norm_sq,
        opts,
        limits,
        rng: seeded(opts.seed),
        trace: SolverTrace {
            kmax: limits.kmax,
            psvdmax: limits.psvdmax,
            ..Default::default()
        },
    };
    let mut out = driver.run()?;
    out.sort_descending();
    driver.polish(&mut out)?;
    driver.trace.total_matvecs = counted.matvecs();
    Ok((out, driver.trace))
}

struct Driver<'a, A: ?Sized> {
    op: &'a CountingOperator<&'a A>,
    m: usize,
    n: usize,
    threshold: Threshold,
    fro_norm_sq: Option<f64>,
    opts: &'a SvtOptions,
    limits: ResolvedLimits,
    rng: SvtRng,
    trace: SolverTrace,
}

enum Step {
    Continue,
    Exit(Flag),
}

impl<A: LinearOperator + ?Sized> Driver<'_, A> {
    fn run(&mut self) -> Result<PartialSvd> {
        let (m, n) = (self.m, self.n);
        let mn = m.min(n);

        let mut acc = match &self.opts.warm_start {
            Some(w) => {
                w.validate_against(m, n)?;
                if w.len() > mn {
                    return Err(Error::Dimension(format!(
                        "warm start holds {} > min(m, n) triplets",
                        w.len()
                    )));
                }
                let mut acc = w.clone();
                acc.flag = Flag::Success;
                if self.opts.pwrsvd > 0 && !acc.is_empty() {
                    let before = self.op.matvecs();
                    let r = blk_svd_power(self.op, &acc.v, &acc.u, self.opts.pwrsvd, &mut self.rng)?;
                    acc.u = r.u;
                    acc.s = r.s;
                    acc.v = r.v;
                    drop_mapped_zeros(&mut acc);
                    self.trace.warm_start_matvecs = self.op.matvecs() - before;
                }
                acc.drop_at_or_below(0.0);
                acc.sort_descending();
                acc
            }
            None => PartialSvd::empty(m, n, Flag::Success),
        };

        if mn == 1 {
            return self.single_value(acc);
        }

        let mut k = self.limits.k;
        let mut incre = self.opts.incre;
        loop {
            let ell = acc.len();
            if ell >= mn {
                return self.finish(acc, Flag::Success);
            }
            let request = k.min(mn - ell).min(mn - 1).min(self.limits.psvdmax.saturating_sub(ell));
            if request == 0 {
                return self.finish_capped(acc);
            }

            let above_before = self.count_above(&acc);
            let side = DeflatedOperator::<A>::side_for(m, n);
            let before = self.op.matvecs();
            let (found, recalled) = {
                let lock = match side {
                    DeflationSide::Left => &acc.u,
                    DeflationSide::Right => &acc.v,
                };
                let deflated = DeflatedOperator::new(self.op, lock, side);
                let mut popts = PsvdOptions {
                    tol: self.opts.tol,
                    max_restarts: self.opts.max_restarts,
                    work_dim: Some((request + 7).min(mn)),
                    start: self.opts.p0.clone(),
                };
                let first = psvd(&deflated, request, &popts, &mut self.rng)?;
                if first.converged > 0 {
                    (first, false)
                } else {
                    popts.max_restarts = self.opts.max_restarts.saturating_mul(2);
                    popts.work_dim = Some((request + 7 + incre).min(mn));
                    (psvd(&deflated, request, &popts, &mut self.rng)?, true)
                }
            };
            let psvd_matvecs = self.op.matvecs() - before;

            let mut record = IterationRecord {
                ell_before: ell,
                ell_after: ell,
                requested: request,
                converged: found.converged,
                recalled,
                c1: false,
                c2: false,
                c3: false,
                merged: false,
                psvd_matvecs,
                next_k: k,
                next_incre: incre,
            };

            if found.converged == 0 {
                if self.opts.display {
                    info!("psvd converged no triplets after a recall; stopping with {ell} triplets");
                }
                self.trace.iterations.push(record);
                acc.flag = Flag::PsvdFailed;
                return Ok(acc);
            }

            record.c1 = criterion_c1(&found.v, &acc.v, &found.u, &acc.u, ell, request);
            record.c2 = criterion_c2(&found.s, &acc.s);
            record.c3 = found.converged < request;
            record.merged = record.c1 || record.c2 || record.c3 || self.opts.pwrsvd > 0;

            if record.merged {
                self.merge(&mut acc, found)?;
            } else {
                append(&mut acc, found);
            }
            acc.drop_at_or_below(0.0);
            record.ell_after = acc.len();

            if self.opts.display {
                info!(
                    "ell {} -> {}, k {request}, incre {incre}, converged {}, C1 {} C2 {} C3 {}{}, new values in [{:.6e}, {:.6e}]",
                    ell,
                    acc.len(),
                    record.converged,
                    record.c1,
                    record.c2,
                    record.c3,
                    if record.merged { ", merged" } else { "" },
                    acc.s.last().copied().unwrap_or(0.0),
                    acc.s.first().copied().unwrap_or(0.0),
                );
            }

            if acc.len() <= ell {
                // Nothing above the noise floor is left in the deflated operator.
                self.trace.iterations.push(record);
                return self.finish(acc, Flag::Success);
            }

            match self.check_exit(&mut acc, above_before)? {
                Step::Exit(flag) => {
                    self.trace.iterations.push(record);
                    return self.finish(acc, flag);
                }
                Step::Continue => {}
            }
            if acc.len() >= self.limits.psvdmax {
                self.trace.iterations.push(record);
                return self.finish_capped(acc);
            }

            k = (k + incre)
                .min(self.limits.kmax)
                .min(self.limits.psvdmax - acc.len())
                .max(1);
            incre = incre.saturating_mul(2);
            record.next_k = k;
            record.next_incre = incre;
            self.trace.iterations.push(record);
        }
    }

    /// One block power step over the whole output if its bases drifted.
    fn polish(&mut self, out: &mut PartialSvd) -> Result<()> {
        if out.is_empty() || orthogonality_error(&out.u, &out.v) <= ORTHOGONALITY_CEILING {
            return Ok(());
        }
        let r = blk_svd_power(self.op, &out.v, &out.u, 1, &mut self.rng)?;
        out.u = r.u;
        out.s = r.s;
        out.v = r.v;
        drop_mapped_zeros(out);
        out.drop_at_or_below(0.0);
        if let Threshold::Sigma(sigma) = self.threshold {
            let keep = out.s.iter().take_while(|&&s| s >= sigma).count();
            out.truncate(keep);
        }
        self.trace.polished = true;
        if self.opts.display {
            info!("re-orthonormalized {} output triplets", out.len());
        }
        Ok(())
    }

    fn merge(&mut self, acc: &mut PartialSvd, found: PsvdResult) -> Result<()> {
        let u = acc.u.hcat(&found.u);
        let v = acc.v.hcat(&found.v);
        let r = blk_svd_power(self.op, &v, &u, self.opts.pwrsvd.max(1), &mut self.rng)?;
        acc.u = r.u;
        acc.s = r.s;
        acc.v = r.v;
        drop_mapped_zeros(acc);
        Ok(())
    }

    fn count_above(&self, acc: &PartialSvd) -> usize {
        match self.threshold {
            Threshold::Sigma(sigma) => acc.s.iter().filter(|&&s| s >= sigma).count(),
            _ => acc.len(),
        }
    }

    fn check_exit(&self, acc: &mut PartialSvd, above_before: usize) -> Result<Step> {
        let hit = match self.threshold {
            Threshold::Sigma(sigma) => {
                if acc.s.last().is_none_or(|&s| s >= sigma) {
                    false
                } else if self.count_above(acc) > above_before {
                    // A single Krylov start sees one copy of a multiple value;
                    // only a pass that adds nothing above sigma confirms the set.
                    let keep = self.count_above(acc);
                    acc.truncate(keep);
                    false
                } else {
                    true
                }
            }
            Threshold::Energy(target) => energy_fraction(&acc.s, self.fro_norm_sq.expect("checked at entry")) >= target,
            Threshold::TopK => acc.len() >= self.limits.k,
        };
        Ok(if hit { Step::Exit(Flag::Success) } else { Step::Continue })
    }

    /// Apply the threshold to the final accumulation and pick the flag.
    fn finish(&self, acc: PartialSvd, flag: Flag) -> Result<PartialSvd> {
        let mut out = truncate_threshold(&acc, self.threshold, self.fro_norm_sq)?;
        if self.threshold == Threshold::TopK {
            out.truncate(self.limits.k);
        }
        out.flag = flag;
        if flag == Flag::Success && out.is_empty() {
            return Ok(PartialSvd::empty(self.m, self.n, Flag::NoneAboveSigma));
        }
        Ok(out)
    }

    fn finish_capped(&self, mut acc: PartialSvd) -> Result<PartialSvd> {
        acc.truncate(self.limits.psvdmax);
        if self.opts.display {
            info!("psvdmax = {} reached", self.limits.psvdmax);
        }
        acc.flag = Flag::PsvdMaxReached;
        Ok(acc)
    }

    /// `min(m, n) = 1`: the block power step on the whole short side is exact.
    fn single_value(&mut self, acc: PartialSvd) -> Result<PartialSvd> {
        if !acc.is_empty() {
            return self.finish(acc, Flag::Success);
        }
        let u = crate::rng::gaussian_matrix(&mut self.rng, self.m, 1);
        let v = crate::rng::gaussian_matrix(&mut self.rng, self.n, 1);
        let r = blk_svd_power(self.op, &v, &u, 1, &mut self.rng)?;
        let mut acc = PartialSvd {
            u: r.u,
            s: r.s,
            v: r.v,
            flag: Flag::Success,
        };
        acc.drop_at_or_below(0.0);
        self.finish(acc, Flag::Success)
    }
}

fn append(acc: &mut PartialSvd, found: PsvdResult) {
    acc.u = acc.u.hcat(&found.u);
    acc.v = acc.v.hcat(&found.v);
    acc.s.extend_from_slice(&found.s);
    acc.sort_descending();
}

/// Block power output keeps zeros; anything below `max(s) sqrt(eps)` is a
/// deflated value that came back, not a singular value to report.
fn drop_mapped_zeros(acc: &mut PartialSvd) -> usize {
    let top = acc.s.iter().copied().fold(0.0, f64::max);
    acc.sort_descending();
    acc.drop_at_or_below(top * SQRT_EPS - f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::materialize;
    use crate::rng::gaussian_matrix;
    use crate::svd::small_dense_svd;

    fn diag5() -> DenseMatrix {
        DenseMatrix::from_diagonal(&[5.0, 4.0, 3.0, 2.0, 1.0])
    }

    #[test]
    fn spec_parsing() {
        assert!(matches!(
            ThresholdSpec::from_parts(Some(1.0), Some(0.9)),
            Err(Error::Usage(_))
        ));
        assert_eq!(
            ThresholdSpec::from_parts(None, None).unwrap().threshold,
            Threshold::TopK
        );
        assert!(ThresholdSpec::from_parts(None, Some(1.5)).is_err());
        assert!(ThresholdSpec::from_parts(Some(-1.0), None).is_err());
        assert!(ThresholdSpec::from_parts(Some(0.0), None).is_ok());
    }

    #[test]
    fn empty_lock_is_identity() {
        let a = diag5();
        let lock = DenseMatrix::zeros(5, 0);
        let d = DeflatedOperator::new(&a, &lock, DeflationSide::Left);
        assert_eq!(materialize(&d), a);
    }

    #[test]
    fn deflating_e1_maps_top_value_to_zero() {
        let a = DenseMatrix::from_diagonal(&[5.0, 4.0, 3.0]);
        let lock = DenseMatrix::identity(3).columns(0..1);
        for side in [DeflationSide::Left, DeflationSide::Right] {
            let d = DeflatedOperator::new(&a, &lock, side);
            let s = small_dense_svd(&materialize(&d)).unwrap().s;
            assert_eq!(s, alloc::vec![4.0, 3.0, 0.0]);
        }
    }

    #[test]
    fn left_deflation_output_is_orthogonal_to_lock() {
        let mut rng = seeded(3);
        let a = gaussian_matrix(&mut rng, 6, 9);
        let lock = crate::qr::qr_economy(&gaussian_matrix(&mut rng, 6, 2), &mut rng).0;
        let d = DeflatedOperator::new(&a, &lock, DeflationSide::Left);
        let x = crate::rng::gaussian_vec(&mut rng, 9);
        let y = d.apply(&x);
        let bound = 1e-13 * a.fro_norm() * crate::dense::norm2(&x);
        assert!(lock.tr_mul_vec(&y).iter().all(|h| h.abs() <= bound));
        // adjoint consistency of the deflated operator
        let w = crate::rng::gaussian_vec(&mut rng, 6);
        let lhs = dot(&d.apply(&x), &w);
        let rhs = dot(&x, &d.apply_adjoint(&w));
        assert!((lhs - rhs).abs() <= 1e-13 * a.fro_norm() * crate::dense::norm2(&x) * crate::dense::norm2(&w));
    }

    #[test]
    fn c1_cases() {
        let e = DenseMatrix::identity(4);
        let v = e.columns(0..2);
        let v1 = e.columns(2..4);
        assert!(!criterion_c1(&v1, &v, &v1, &v, 2, 2));
        assert!(!criterion_c1(&v, &v, &v, &v, 0, 2));
        // ℓ = 10, k = 6: level is sqrt(eps)/16 ≈ 9.3e-10
        let mut near = v1.clone();
        near.set(0, 0, 1e-9);
        assert!(criterion_c1(&near, &v, &v1, &v, 10, 6));
        near.set(0, 0, 9e-10);
        assert!(!criterion_c1(&near, &v, &v1, &v, 10, 6));
    }

    #[test]
    fn c2_cases() {
        assert!(!criterion_c2(&[4.0, 3.0], &[5.0]));
        assert!(criterion_c2(&[4.0, 1e-10], &[5.0]));
        assert!(!criterion_c2(&[1e-10], &[]));
    }

    fn partial(s: &[f64]) -> PartialSvd {
        let n = s.len();
        PartialSvd {
            u: DenseMatrix::identity(n),
            s: s.to_vec(),
            v: DenseMatrix::identity(n),
            flag: Flag::Success,
        }
    }

    #[test]
    fn truncation_rules() {
        let p = partial(&[5.0, 4.0, 3.0, 2.0]);
        assert_eq!(
            truncate_threshold(&p, Threshold::Sigma(3.0), None).unwrap().s,
            alloc::vec![5.0, 4.0, 3.0]
        );
        let p = partial(&[5.0, 4.0, 3.0]);
        assert_eq!(truncate_threshold(&p, Threshold::Sigma(3.0), None).unwrap().len(), 3);
        let p = partial(&[4.0, 3.0]);
        let t = truncate_threshold(&p, Threshold::Energy(0.6), Some(25.0)).unwrap();
        assert_eq!(t.s, alloc::vec![4.0]);
        assert_eq!(t.u.ncols(), 1);
        assert!(truncate_threshold(&p, Threshold::Energy(0.6), None).is_err());
    }

    #[test]
    fn diag5_sigma3() {
        let out = svt_run(&diag5(), &ThresholdSpec::sigma(3.0), &SvtOptions::default()).unwrap();
        assert_eq!(out.flag, Flag::Success);
        assert_eq!(out.len(), 3);
        for (got, want) in out.s.iter().zip([5.0, 4.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn diag5_sigma10_is_empty() {
        let out = svt_run(&diag5(), &ThresholdSpec::sigma(10.0), &SvtOptions::default()).unwrap();
        assert_eq!(out.flag, Flag::NoneAboveSigma);
        assert!(out.is_empty());
        assert_eq!((out.u.nrows(), out.u.ncols()), (5, 0));
    }

    #[test]
    fn top_k_without_threshold() {
        let out = svt_run(
            &diag5(),
            &ThresholdSpec::top_k(),
            &SvtOptions {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.flag, Flag::Success);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn energy_mode_needs_a_norm_source() {
        let a = diag5();
        let f = crate::operator::FnOperator::new(
            5,
            5,
            |x: &[f64], y: &mut [f64]| a.apply_into(x, y),
            |y: &[f64], x: &mut [f64]| a.apply_adjoint_into(y, x),
        );
        let err = svt_run(&f, &ThresholdSpec::energy(0.5), &SvtOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let out = svt_run(
            &f,
            &ThresholdSpec::energy(0.5).with_fro_norm_sq(55.0),
            &SvtOptions::default(),
        )
        .unwrap();
        // 25 + 16 = 41 >= 27.5 but 25 < 27.5
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn single_row_operator() {
        let a = DenseMatrix::from_row_major(1, 4, &[3.0, 0.0, 4.0, 0.0]).unwrap();
        let out = svt_run(&a, &ThresholdSpec::sigma(1.0), &SvtOptions::default()).unwrap();
        assert_eq!(out.flag, Flag::Success);
        assert!((out.s[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn zero_operator_reports_nothing_above_sigma() {
        let a = DenseMatrix::zeros(6, 8);
        let out = svt_run(&a, &ThresholdSpec::sigma(0.0), &SvtOptions::default()).unwrap();
        assert_eq!(out.flag, Flag::NoneAboveSigma);
    }

    #[test]
    fn warm_start_dimension_mismatch() {
        let opts = SvtOptions {
            warm_start: Some(partial(&[1.0, 1.0])),
            ..Default::default()
        };
        assert!(matches!(
            svt_run(&diag5(), &ThresholdSpec::sigma(1.0), &opts),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn limits_defaults() {
        let l = resolve_limits(300, 250, &SvtOptions::default()).unwrap();
        assert_eq!(
            l,
            ResolvedLimits {
                k: 6,
                kmax: 25,
                psvdmax: 100
            }
        );
        let l = resolve_limits(5, 5, &SvtOptions::default()).unwrap();
        assert_eq!(
            l,
            ResolvedLimits {
                k: 5,
                kmax: 5,
                psvdmax: 5
            }
        );
        let l = resolve_limits(3000, 2000, &SvtOptions::default()).unwrap();
        assert_eq!(l.kmax, 100);
        assert!(resolve_limits(
            10,
            10,
            &SvtOptions {
                kmax: Some(2),
                ..Default::default()
            }
        )
        .is_err());
    }
}
