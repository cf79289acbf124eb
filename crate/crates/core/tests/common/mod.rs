#![allow(dead_code)]

use svt_core::rng::{gaussian_matrix, seeded};
use svt_core::{qr_economy, DenseMatrix};

/// `P diag(s) Qᵀ` with `P`, `Q` random orthonormal, `m x n`, `s.len() <= min(m, n)`.
pub fn known_spectrum(m: usize, n: usize, s: &[f64], seed: u64) -> DenseMatrix {
    let mut rng = seeded(seed);
    let r = s.len();
    let p = qr_economy(&gaussian_matrix(&mut rng, m, r), &mut rng).0;
    let q = qr_economy(&gaussian_matrix(&mut rng, n, r), &mut rng).0;
    svt_core::dense::outer_product_sum(&p, s, &q)
}

/// Greedy one-to-one matching of `got` (descending) onto `want`; returns
/// the largest relative mismatch, or `None` if some value has no partner
/// within `rel * scale`.
pub fn greedy_match(got: &[f64], want: &[f64], rel: f64, scale: f64) -> Option<f64> {
    let mut used = vec![false; want.len()];
    let mut worst: f64 = 0.0;
    for &g in got {
        let best = (0..want.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (want[a] - g).abs().total_cmp(&(want[b] - g).abs()))?;
        let err = (want[best] - g).abs() / scale;
        if err > rel {
            return None;
        }
        used[best] = true;
        worst = worst.max(err);
    }
    Some(worst)
}
