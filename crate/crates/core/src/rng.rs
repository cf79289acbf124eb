use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::dense::DenseMatrix;

/// The generator every seeded code path draws from.
pub type SvtRng = rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20240501;

pub fn seeded(seed: u64) -> SvtRng {
    SvtRng::seed_from_u64(seed)
}

pub fn gaussian_vec<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

pub fn gaussian_matrix<R: RngCore + ?Sized>(rng: &mut R, nrows: usize, ncols: usize) -> DenseMatrix {
    DenseMatrix::from_col_major(nrows, ncols, gaussian_vec(rng, nrows * ncols)).expect("sized buffer")
}
