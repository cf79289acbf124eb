#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod blkpower;
pub mod completion;
pub mod compress;
pub mod dense;
pub mod error;
pub mod gklb;
pub mod metrics;
pub mod operator;
pub mod qr;
pub mod rng;
pub mod sparse;
pub mod svd;
pub mod threshold;

pub use blkpower::{blk_svd_power, BlkPowerResult};
pub use completion::{svt_mc_complete, McResult, ObservedMatrix, SvtMcParams};
pub use compress::{compress_energy, Compressed};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use gklb::{gklb_extend, psvd, thick_restart, GklbFactorization, PsvdOptions, PsvdResult};
pub use operator::{CountingOperator, FnOperator, LinearOperator, Transposed};
pub use qr::qr_economy;
pub use sparse::SparseMatrix;
pub use svd::{small_dense_svd, SmallSvd};
pub use threshold::{
    svt_run, svt_run_traced, truncate_threshold, Flag, PartialSvd, SolverTrace, SvtOptions, Threshold, ThresholdSpec,
};
