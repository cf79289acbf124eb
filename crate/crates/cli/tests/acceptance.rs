//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with the measured quantity next to its pinned tolerance.
//!
//! Runs without the libtest harness so the report is always printed:
//! `cargo test -p svt-cli --test acceptance`. Criterion 8 needs a grayscale image as a Matrix Market
//! array file named by `SVT_TIGER_PATH`; it is reported as SKIP otherwise.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand_core::RngCore;
use svt_cli::mm;
use svt_core::dense::outer_product_sum;
use svt_core::metrics::{direct_nrmse, energy_fraction, orthogonality_error, right_residual, total_residual};
use svt_core::rng::{gaussian_matrix, seeded};
use svt_core::{
    blk_svd_power, compress_energy, qr_economy, svt_mc_complete, svt_run, svt_run_traced, DenseMatrix, Flag,
    ObservedMatrix, SvtMcParams, SvtOptions, ThresholdSpec,
};

const VALUE_REL_TOL: f64 = 1e-8;
const UV_ERR_MAX: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const MC_BUDGET: Duration = Duration::from_secs(120);
const MC_MAX_OUTER: usize = 500;
const MC_RECOVERY_MAX: f64 = 1e-3;
/// Stopping residual of the completion run. At 1e-3 the run stops with a
/// recovery error near 2e-3, so the outer tolerance is set one decade lower.
const MC_TOL_OUTER: f64 = 1e-4;
const TIGER_NRMSE_TOL: f64 = 5e-4;

#[derive(PartialEq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Report(Vec<(usize, Outcome)>);

impl Report {
    fn record(&mut self, id: usize, ok: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        self.0.push((id, if ok { Outcome::Pass } else { Outcome::Fail }));
    }

    fn skip(&mut self, id: usize, detail: &str) {
        println!("criterion {id}: SKIP {detail}");
        self.0.push((id, Outcome::Skip));
    }
}

fn known_spectrum(m: usize, n: usize, s: &[f64], seed: u64) -> DenseMatrix {
    let mut rng = seeded(seed);
    let p = qr_economy(&gaussian_matrix(&mut rng, m, s.len()), &mut rng).0;
    let q = qr_economy(&gaussian_matrix(&mut rng, n, s.len()), &mut rng).0;
    outer_product_sum(&p, s, &q)
}

fn above(s: &[f64], sigma: f64) -> Vec<f64> {
    s.iter().copied().filter(|&x| x >= sigma).collect()
}

/// Both descending; same length and each value within `rel` of its partner.
fn same_values(got: &[f64], want: &[f64], rel: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= rel * w.abs())
}

/// One-to-one greedy matching within `tol` absolute.
fn greedy_match(got: &[f64], want: &[f64], tol: f64) -> bool {
    let mut used = vec![false; want.len()];
    got.iter().all(|&g| {
        let best = (0..want.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (want[a] - g).abs().total_cmp(&(want[b] - g).abs()));
        match best {
            Some(j) if (want[j] - g).abs() <= tol => {
                used[j] = true;
                true
            }
            _ => false,
        }
    })
}

struct SweepCase {
    m: usize,
    n: usize,
    s: Vec<f64>,
    sigma: f64,
    a: DenseMatrix,
}

/// Fifty `P diag(s) Qᵀ` matrices up to 200x160 with geometric, uniform
/// and harmonic spectra, each with a threshold between two values.
fn sweep_cases() -> Vec<SweepCase> {
    let mut rng = seeded(99);
    (0..50u64)
        .map(|case| {
            let m = 20 + (rng.next_u64() % 181) as usize;
            let n = 20 + (rng.next_u64() % 141) as usize;
            let r = m.min(n);
            let mut s: Vec<f64> = (0..r)
                .map(|i| match case % 3 {
                    0 => 10.0 * 0.9f64.powi(i as i32),
                    1 => 1.0 + 9.0 * ((rng.next_u64() % 1_000_000) as f64 / 1e6),
                    _ => 5.0 / (1.0 + i as f64),
                })
                .collect();
            s.sort_by(|a, b| b.total_cmp(a));
            let cut = 1 + (rng.next_u64() % (r as u64 - 2)) as usize;
            let sigma = 0.5 * (s[cut - 1] + s[cut]);
            let a = known_spectrum(m, n, &s, 1000 + case);
            SweepCase { m, n, s, sigma, a }
        })
        .collect()
}

fn sweep_options(c: &SweepCase) -> SvtOptions {
    // a sweep case may hold more than the default 100 values above sigma
    SvtOptions {
        psvdmax: Some(c.m.min(c.n)),
        ..Default::default()
    }
}

/// Records criterion 1 and returns the criterion 5 verdict so the report stays in order.
fn criterion_1_and_5(cases: &[SweepCase], report: &mut Report) -> (bool, String) {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut one_sided = Vec::new();
    let tol = SvtOptions::default().tol;
    for (i, c) in cases.iter().enumerate() {
        let out = svt_run(&c.a, &ThresholdSpec::sigma(c.sigma), &sweep_options(c)).unwrap();
        if out.flag != Flag::Success || !same_values(&out.s, &above(&c.s, c.sigma), VALUE_REL_TOL) {
            bad.push(i);
        }
        let scale = c.s[0] * (out.len() as f64).sqrt();
        let e_tot = total_residual(&c.a, &out.u, &out.s, &out.v);
        let right_ok = c.m > c.n || right_residual(&c.a, &out.u, &out.s, &out.v) <= 10.0 * tol * scale;
        if !right_ok || e_tot > 20.0 * tol * scale {
            one_sided.push(i);
        }
    }
    let elapsed = start.elapsed();
    report.record(
        1,
        bad.is_empty() && elapsed <= SWEEP_BUDGET,
        format!(
            "{} of {} value sets exact to {VALUE_REL_TOL:e} relative in {:.2}s (budget {}s); mismatches {bad:?}",
            cases.len() - bad.len(),
            cases.len(),
            elapsed.as_secs_f64(),
            SWEEP_BUDGET.as_secs()
        ),
    );

    // a tighter tolerance on a second set of shapes
    let tight = 1e-8;
    for (i, c) in cases.iter().enumerate().step_by(5) {
        let opts = SvtOptions {
            tol: tight,
            ..sweep_options(c)
        };
        let out = svt_run(&c.a, &ThresholdSpec::sigma(c.sigma), &opts).unwrap();
        let scale = c.s[0] * (out.len() as f64).sqrt();
        let right_ok = c.m > c.n || right_residual(&c.a, &out.u, &out.s, &out.v) <= 10.0 * tight * scale;
        if !right_ok || total_residual(&c.a, &out.u, &out.s, &out.v) > 20.0 * tight * scale {
            one_sided.push(100 + i);
        }
    }
    (
        one_sided.is_empty(),
        format!(
            "one-sided bounds (10 tol s1 sqrt(l) right, 20 tol s1 sqrt(l) total) hold on {} runs at tol {tol:.1e} and 1e-8; violations {one_sided:?}",
            cases.len() + cases.len().div_ceil(5)
        ),
    )
}

fn criterion_2(report: &mut Report) {
    let mut s = vec![1.0; 60];
    s.extend((0..190).map(|i| 0.5 * (1.0 - i as f64 / 200.0)));
    let a = known_spectrum(300, 250, &s, 7);
    let out = svt_run(&a, &ThresholdSpec::sigma(0.9), &SvtOptions::default()).unwrap();
    let uv = orthogonality_error(&out.u, &out.v);
    let ok = out.len() == 60 && uv <= UV_ERR_MAX && same_values(&out.s, &[1.0; 60], VALUE_REL_TOL);
    report.record(
        2,
        ok,
        format!(
            "{} of 60 copies of 1.0 found, UV_err {uv:.2e} (max {UV_ERR_MAX:e}), flag {}",
            out.len(),
            out.flag.code()
        ),
    );
}

fn criterion_3(report: &mut Report) {
    let s: Vec<f64> = (0..40).map(|i| 10.0 * 0.8f64.powi(i)).collect();
    let a = known_spectrum(150, 120, &s, 8);
    let out = svt_run(&a, &ThresholdSpec::sigma(0.0), &SvtOptions::default()).unwrap();
    let positive = out.s.iter().filter(|&&x| x > 0.0).count();
    let matched = greedy_match(&out.s, &s, VALUE_REL_TOL * s[0]);
    let ok = matches!(out.flag, Flag::Success | Flag::PsvdMaxReached) && out.len() == 40 && positive == 40 && matched;
    report.record(
        3,
        ok,
        format!(
            "{} values ({positive} positive) for rank 40, one-to-one match to {VALUE_REL_TOL:e} s1: {matched}, flag {}",
            out.len(),
            out.flag.code()
        ),
    );
}

fn criterion_4(report: &mut Report) {
    let mut rng = seeded(44);
    let mut worst_split: f64 = 0.0;
    let mut worst_duality: f64 = 0.0;
    for _ in 0..20 {
        let m = 5 + (rng.next_u64() % 36) as usize;
        let n = 5 + (rng.next_u64() % 36) as usize;
        let k = 1 + (rng.next_u64() % 6) as usize;
        let iters = 1 + (rng.next_u64() % 3) as usize;
        let a = gaussian_matrix(&mut rng, m, n);
        let (v0, u0) = (gaussian_matrix(&mut rng, n, k), gaussian_matrix(&mut rng, m, k));
        let r = blk_svd_power(&a, &v0, &u0, iters, &mut rng).unwrap();
        let fro = a.fro_norm_sq();
        let resid = a.sub(&outer_product_sum(&r.u, &r.s, &r.v)).fro_norm_sq();
        let kept: f64 = r.s.iter().map(|x| x * x).sum();
        worst_split = worst_split.max((resid - (fro - kept)).abs() / fro);
        let nrmse = direct_nrmse(&a, &r.u, &r.s, &r.v);
        worst_duality = worst_duality.max((nrmse * nrmse + energy_fraction(&r.s, fro) - 1.0).abs());
    }
    report.record(
        4,
        worst_split <= IDENTITY_TOL && worst_duality <= IDENTITY_TOL,
        format!(
            "20 block power outputs: Frobenius split error {worst_split:.2e}, nrmse^2 + energy - 1 = {worst_duality:.2e} (max {IDENTITY_TOL:e})"
        ),
    );
}

fn criterion_6(cases: &[SweepCase], report: &mut Report) {
    let mut mismatched = Vec::new();
    let mut not_cheaper = Vec::new();
    let (mut warm_total, mut cold_total, mut chain_total) = (0usize, 0usize, 0usize);
    for (i, c) in cases.iter().enumerate() {
        let opts = sweep_options(c);
        let (first, t1) = svt_run_traced(&c.a, &ThresholdSpec::sigma(4.0), &opts).unwrap();
        let warm_opts = SvtOptions {
            warm_start: (!first.is_empty()).then_some(first),
            ..opts.clone()
        };
        let (warm, tw) = svt_run_traced(&c.a, &ThresholdSpec::sigma(3.0), &warm_opts).unwrap();
        let (cold, tc) = svt_run_traced(&c.a, &ThresholdSpec::sigma(3.0), &opts).unwrap();
        if !same_values(&warm.s, &cold.s, VALUE_REL_TOL) || !same_values(&cold.s, &above(&c.s, 3.0), VALUE_REL_TOL) {
            mismatched.push(i);
        }
        if tw.total_matvecs >= tc.total_matvecs {
            not_cheaper.push(i);
        }
        warm_total += tw.total_matvecs;
        cold_total += tc.total_matvecs;
        chain_total += t1.total_matvecs + tw.total_matvecs;
    }
    report.record(
        6,
        mismatched.is_empty() && not_cheaper.is_empty(),
        format!(
            "sigma 4 then 3 on {} sweep matrices: value mismatches {mismatched:?}; warm second stage cheaper than cold in {} cases \
             ({warm_total} vs {cold_total} products; whole chain {chain_total})",
            cases.len(),
            cases.len() - not_cheaper.len()
        ),
    );
}

fn completion_problem() -> (DenseMatrix, ObservedMatrix) {
    let (m, n, r) = (200usize, 1000usize, 10usize);
    let mut rng = seeded(7);
    let full = gaussian_matrix(&mut rng, m, r).matmul(&gaussian_matrix(&mut rng, n, r).transpose());
    let target = 4 * r * (m + n - r);
    let mut picked = BTreeSet::new();
    while picked.len() < target {
        picked.insert((
            (rng.next_u64() % m as u64) as usize,
            (rng.next_u64() % n as u64) as usize,
        ));
    }
    let omega: Vec<_> = picked.iter().map(|&(i, j)| (i, j, full.get(i, j))).collect();
    (full, ObservedMatrix::new(m, n, &omega).unwrap())
}

fn criterion_7(report: &mut Report) {
    let (full, obs) = completion_problem();
    let params = SvtMcParams {
        tol_outer: MC_TOL_OUTER,
        max_outer: MC_MAX_OUTER,
        ..Default::default()
    };
    let start = Instant::now();
    let r = svt_mc_complete(&obs, &params).unwrap();
    let elapsed = start.elapsed();
    let err = r.to_dense().sub(&full).fro_norm() / full.fro_norm();
    report.record(
        7,
        err <= MC_RECOVERY_MAX && r.iterations <= MC_MAX_OUTER && r.residual <= MC_TOL_OUTER && elapsed <= MC_BUDGET,
        format!(
            "200x1000 rank 10, |Omega| = {}: recovery error {err:.2e} (max {MC_RECOVERY_MAX:e}) after {} iterations, rank {}, \
             residual {:.2e} (stop at {MC_TOL_OUTER:e}), {:.2}s",
            obs.len(),
            r.iterations,
            r.rank(),
            r.residual,
            elapsed.as_secs_f64()
        ),
    );
    // for reference, the same run stopped at 1e-3
    let loose = svt_mc_complete(
        &obs,
        &SvtMcParams {
            tol_outer: 1e-3,
            ..params
        },
    )
    .unwrap();
    println!(
        "    note: stopping at residual 1e-3 gives recovery error {:.2e} after {} iterations",
        loose.to_dense().sub(&full).fro_norm() / full.fro_norm(),
        loose.iterations
    );
}

fn criterion_8(report: &mut Report) {
    let Some(path) = std::env::var_os("SVT_TIGER_PATH").map(PathBuf::from) else {
        report.skip(8, "(set SVT_TIGER_PATH to a grayscale Matrix Market array file)");
        return;
    };
    let a = mm::read_dense(&path).unwrap();
    let opts = SvtOptions {
        tol: 1e-5,
        ..Default::default()
    };
    let first = compress_energy(&a, 0.9854, None, &opts).unwrap();
    let second = compress_energy(
        &a,
        0.99,
        None,
        &SvtOptions {
            warm_start: Some(first.as_warm_start()),
            ..opts
        },
    )
    .unwrap();
    let ok = first.rank() == 100
        && (first.nrmse - 0.12081).abs() <= TIGER_NRMSE_TOL
        && second.rank() == 155
        && (second.nrmse - 0.09991).abs() <= TIGER_NRMSE_TOL;
    report.record(
        8,
        ok,
        format!(
            "energy 0.9854: k {} nrmse {:.5}; continuation to 0.99: k {} nrmse {:.5} (targets 100/0.12081 and 155/0.09991 +- {TIGER_NRMSE_TOL:e})",
            first.rank(),
            first.nrmse,
            second.rank(),
            second.nrmse
        ),
    );
}

fn criterion_9(report: &mut Report) {
    let easy = known_spectrum(60, 50, &[5.0, 4.0, 3.0, 2.0, 1.0], 90);
    let f0 = svt_run(&easy, &ThresholdSpec::sigma(2.5), &SvtOptions::default()).unwrap();
    let f3 = svt_run(&easy, &ThresholdSpec::sigma(6.0), &SvtOptions::default()).unwrap();

    let slow: Vec<f64> = (0..120).map(|i| 1.0 / (1.0 + 0.002 * i as f64)).collect();
    let hard = known_spectrum(150, 120, &slow, 9);
    let f1 = svt_run(
        &hard,
        &ThresholdSpec::sigma(0.9),
        &SvtOptions {
            max_restarts: 1,
            tol: 1e-14,
            k: 20,
            ..Default::default()
        },
    )
    .unwrap();

    let rank40: Vec<f64> = (0..40).map(|i| 10.0 * 0.8f64.powi(i)).collect();
    let capped = known_spectrum(150, 120, &rank40, 8);
    let f2 = svt_run(
        &capped,
        &ThresholdSpec::sigma(0.0),
        &SvtOptions {
            psvdmax: Some(5),
            ..Default::default()
        },
    )
    .unwrap();

    let got = [f0.flag, f1.flag, f2.flag, f3.flag].map(Flag::code);
    let ok = got == [0, 1, 2, 3] && f0.len() == 3 && f2.len() == 5 && f3.is_empty();
    report.record(
        9,
        ok,
        format!(
            "flags {got:?} for success / max_restarts 1 / psvdmax 5 on rank 40 / sigma above s1 (want [0, 1, 2, 3]); sizes {} {} {} {}",
            f0.len(),
            f1.len(),
            f2.len(),
            f3.len()
        ),
    );
}

fn main() {
    let mut report = Report(Vec::new());
    let cases = sweep_cases();
    let (ok5, detail5) = criterion_1_and_5(&cases, &mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    report.record(5, ok5, detail5);
    criterion_6(&cases, &mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);

    let failed: Vec<usize> = report.0.iter().filter(|r| r.1 == Outcome::Fail).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
