//! Low-rank compression to a target energy fraction.

use alloc::vec::Vec;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::metrics::{direct_nrmse, energy_fraction, nrmse_from_energy};
use crate::operator::LinearOperator;
use crate::threshold::{svt_run, Flag, PartialSvd, SvtOptions, ThresholdSpec};

#[derive(Clone, Debug)]
pub struct Compressed {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
    pub flag: Flag,
    /// Energy fraction actually captured.
    pub energy: f64,
    /// `sqrt(max(0, 1 − energy))`
    pub nrmse: f64,
}

impl Compressed {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `‖M − U diag(s) Vᵀ‖_F / ‖M‖_F`, for checking `nrmse` on a dense `M`.
    pub fn direct_nrmse(&self, m: &DenseMatrix) -> f64 {
        direct_nrmse(m, &self.u, &self.s, &self.v)
    }

    /// The factors as a warm start for a continuation run.
    pub fn as_warm_start(&self) -> PartialSvd {
        PartialSvd {
            u: self.u.clone(),
            s: self.s.clone(),
            v: self.v.clone(),
            flag: self.flag,
        }
    }
}

/// Shortest leading set of triplets of `a` capturing `energy` of `‖a‖_F²`.
///
/// `‖a‖_F²` comes from the operator when it can report it, otherwise from
/// `fro_norm_sq`.
pub fn compress_energy<A: LinearOperator + ?Sized>(
    a: &A,
    energy: f64,
    fro_norm_sq: Option<f64>,
    opts: &SvtOptions,
) -> Result<Compressed> {
    let fro = fro_norm_sq
        .or_else(|| a.fro_norm_sq())
        .ok_or_else(|| Error::Usage("compression needs ‖A‖_F²".into()))?;
    let spec = ThresholdSpec::energy(energy).with_fro_norm_sq(fro);
    let p = svt_run(a, &spec, opts)?;
    let captured = if p.is_empty() { 0.0 } else { energy_fraction(&p.s, fro) };
    Ok(Compressed {
        nrmse: nrmse_from_energy(captured),
        energy: captured,
        u: p.u,
        s: p.s,
        v: p.v,
        flag: p.flag,
    })
}
