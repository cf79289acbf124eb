use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, ValueEnum};
use serde_json::{json, Value};
use svt_core::metrics::{orthogonality_error, total_residual};
use svt_core::rng::DEFAULT_SEED;
use svt_core::{
    compress_energy, svt_mc_complete, svt_run_traced, CountingOperator, DenseMatrix, LinearOperator, ObservedMatrix,
    PartialSvd, SparseMatrix, SvtMcParams, SvtOptions, Threshold, ThresholdSpec,
};

use crate::mm::{self, Layout};
use crate::warm;
use crate::{drive, CliError};

/// Largest `m·n` for which `svt-compress` densifies a sparse input to
/// cross-check nrmse directly.
const DENSE_CHECK_LIMIT: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    MatrixMarket,
    SummaryJson,
    Both,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "svt-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Residual tolerance handed to the Lanczos engine.
    #[arg(long, default_value_t = f64::EPSILON.sqrt())]
    tol: f64,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    incre: usize,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    psvdmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pwrsvd: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Restart budget of each Lanczos call.
    #[arg(long, default_value_t = 1000)]
    max_restarts: usize,
    /// Log progress to stderr.
    #[arg(long)]
    display: bool,
}

impl SolverArgs {
    fn options(&self) -> SvtOptions {
        SvtOptions {
            tol: self.tol,
            k: self.k,
            incre: self.incre,
            kmax: self.kmax,
            psvdmax: self.psvdmax,
            pwrsvd: self.pwrsvd,
            seed: self.seed,
            display: self.display,
            max_restarts: self.max_restarts,
            ..Default::default()
        }
    }
}

/// Partial SVD of a Matrix Market matrix above a singular value or energy threshold.
#[derive(Parser, Debug)]
#[command(name = "svt", version)]
struct SvtCli {
    /// Matrix Market file (coordinate or array).
    input: PathBuf,
    /// Keep every singular value >= SIGMA.
    #[arg(long)]
    sigma: Option<f64>,
    /// Keep the shortest leading set capturing this fraction of ‖A‖_F².
    #[arg(long)]
    energy: Option<f64>,
    /// ‖A‖_F² to use in energy mode instead of the value computed from the input.
    #[arg(long)]
    fro_norm_sq: Option<f64>,
    /// Directory holding U.mtx, V.mtx and S.txt from an earlier run.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// Singular value thresholding matrix completion.
#[derive(Parser, Debug)]
#[command(name = "svt-mc", version)]
struct McCli {
    /// Observed entries as a Matrix Market coordinate file.
    input: PathBuf,
    /// Shrinkage threshold (default 5 sqrt(mn)).
    #[arg(long)]
    tau: Option<f64>,
    /// Step size (default 1.2 mn / |Ω|).
    #[arg(long)]
    delta: Option<f64>,
    /// Relative residual on the observed entries at which to stop.
    #[arg(long, default_value_t = 1e-3)]
    tol_outer: f64,
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    /// Request size of the first thresholding call.
    #[arg(long, default_value_t = 6)]
    k0: usize,
    #[arg(long, default_value_t = 5)]
    incre: usize,
    /// Solve every iteration from scratch.
    #[arg(long)]
    no_warm_start: bool,
    /// Full matrix to report the relative recovery error against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = f64::EPSILON.sqrt())]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    display: bool,
    #[command(flatten)]
    output: OutputArgs,
}

/// Low-rank compression to a target energy fraction.
#[derive(Parser, Debug)]
#[command(name = "svt-compress", version)]
struct CompressCli {
    /// Matrix Market file (coordinate or array).
    input: PathBuf,
    /// Fraction of ‖A‖_F² to capture, in (0, 1].
    #[arg(long)]
    energy: f64,
    #[arg(long)]
    fro_norm_sq: Option<f64>,
    /// Continue from an earlier compression or threshold run.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

enum Input {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl Input {
    fn load(path: &Path) -> Result<Self, CliError> {
        let raw = mm::read(path).map_err(|e| CliError::from_mm(path, e))?;
        Ok(match raw.layout {
            Layout::Array => Input::Dense(raw.to_dense()),
            Layout::Coordinate => Input::Sparse(raw.to_sparse()),
        })
    }

    fn op(&self) -> &dyn LinearOperator {
        match self {
            Input::Dense(d) => d,
            Input::Sparse(s) => s,
        }
    }
}

fn init_logging(display: bool) {
    if display {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    }
}

fn load_warm(dir: Option<&Path>, m: usize, n: usize) -> Result<Option<PartialSvd>, CliError> {
    let Some(dir) = dir else { return Ok(None) };
    let w = warm::load_factors(dir)?;
    if let Some(w) = &w {
        warm::check_shape(w, m, n)?;
    }
    Ok(w)
}

fn write_outputs(out: &OutputArgs, p: &PartialSvd, summary: &Value) -> Result<(), CliError> {
    fs::create_dir_all(&out.out).map_err(|e| CliError::io(&out.out, e))?;
    if out.format != OutputFormat::SummaryJson {
        warm::save_factors(&out.out, p).map_err(|e| CliError::io(&out.out, e))?;
    }
    if out.format != OutputFormat::MatrixMarket {
        let path = out.out.join("summary.json");
        let text = serde_json::to_string_pretty(summary).expect("summary serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

pub fn run_svt<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    drive("svt", argv, svt_main)
}

fn svt_main(cli: SvtCli) -> Result<i32, CliError> {
    init_logging(cli.solver.display);
    let mut spec = ThresholdSpec::from_parts(cli.sigma, cli.energy)?;
    if let Some(f) = cli.fro_norm_sq {
        spec = spec.with_fro_norm_sq(f);
        spec.validate()?;
    }
    let input = Input::load(&cli.input)?;
    let op = input.op();
    let mut opts = cli.solver.options();
    opts.warm_start = load_warm(cli.warm_start.as_deref(), op.nrows(), op.ncols())?;

    let start = Instant::now();
    let (p, trace) = svt_run_traced(op, &spec, &opts)?;
    let wall = start.elapsed().as_secs_f64();

    let (mode, value) = match spec.threshold {
        Threshold::Sigma(s) => ("sigma", json!(s)),
        Threshold::Energy(e) => ("energy", json!(e)),
        Threshold::TopK => ("top-k", Value::Null),
    };
    let summary = json!({
        "flag": p.flag.code(),
        "k": p.len(),
        "mode": mode,
        "sigma_or_energy": value,
        "E_tot": total_residual(op, &p.u, &p.s, &p.v),
        "UV_err": orthogonality_error(&p.u, &p.v),
        "wall_seconds": wall,
        "matvec_count": trace.total_matvecs,
    });
    write_outputs(&cli.output, &p, &summary)?;
    Ok(i32::from(p.flag.code()))
}

pub fn run_mc<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    drive("svt-mc", argv, mc_main)
}

fn mc_main(cli: McCli) -> Result<i32, CliError> {
    init_logging(cli.display);
    let raw = mm::read(&cli.input).map_err(|e| CliError::from_mm(&cli.input, e))?;
    if raw.layout != Layout::Coordinate {
        return Err(CliError::Usage("observations must be a coordinate file".into()));
    }
    let obs = ObservedMatrix::new(raw.nrows, raw.ncols, &raw.entries)?;
    let truth = match &cli.truth {
        Some(path) => {
            let t = mm::read_dense(path).map_err(|e| CliError::from_mm(path, e))?;
            if (t.nrows(), t.ncols()) != (raw.nrows, raw.ncols) {
                return Err(CliError::Usage(format!(
                    "truth is {}x{} but the observations are {}x{}",
                    t.nrows(),
                    t.ncols(),
                    raw.nrows,
                    raw.ncols
                )));
            }
            Some(t)
        }
        None => None,
    };
    let params = SvtMcParams {
        tau: cli.tau,
        delta: cli.delta,
        tol_outer: cli.tol_outer,
        max_outer: cli.max_outer,
        k0: cli.k0,
        incre: cli.incre,
        warm_start: !cli.no_warm_start,
        inner: SvtOptions {
            tol: cli.tol,
            seed: cli.seed,
            display: cli.display,
            ..Default::default()
        },
    };

    let start = Instant::now();
    let r = svt_mc_complete(&obs, &params)?;
    let wall = start.elapsed().as_secs_f64();

    let converged = r.residual <= cli.tol_outer;
    let mut summary = json!({
        "converged": converged,
        "iterations": r.iterations,
        "residual": r.residual,
        "rank": r.rank(),
        "tau": r.tau,
        "delta": r.delta,
        "wall_seconds": wall,
        "matvec_count": r.history.iter().map(|h| h.total_matvecs).sum::<usize>(),
    });
    if let Some(t) = &truth {
        summary["recovery_error"] = json!(r.to_dense().sub(t).fro_norm() / t.fro_norm());
    }
    let p = PartialSvd {
        u: r.u,
        s: r.s,
        v: r.v,
        flag: svt_core::Flag::Success,
    };
    write_outputs(&cli.output, &p, &summary)?;
    Ok(if converged { 0 } else { 1 })
}

pub fn run_compress<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    drive("svt-compress", argv, compress_main)
}

fn compress_main(cli: CompressCli) -> Result<i32, CliError> {
    init_logging(cli.solver.display);
    let input = Input::load(&cli.input)?;
    let (m, n) = (input.op().nrows(), input.op().ncols());
    let mut opts = cli.solver.options();
    opts.warm_start = load_warm(cli.warm_start.as_deref(), m, n)?;
    let op = CountingOperator::new(input.op());

    let start = Instant::now();
    let c = compress_energy(&op, cli.energy, cli.fro_norm_sq, &opts)?;
    let wall = start.elapsed().as_secs_f64();
    let matvecs = op.matvecs();

    let dense_check = match &input {
        Input::Dense(d) => Some(c.direct_nrmse(d)),
        Input::Sparse(s) if m * n <= DENSE_CHECK_LIMIT => Some(c.direct_nrmse(&s.to_dense())),
        Input::Sparse(_) => None,
    };
    let summary = json!({
        "flag": c.flag.code(),
        "k": c.rank(),
        "mode": "energy",
        "sigma_or_energy": cli.energy,
        "energy": c.energy,
        "nrmse": c.nrmse,
        "nrmse_direct": dense_check,
        "E_tot": total_residual(input.op(), &c.u, &c.s, &c.v),
        "UV_err": orthogonality_error(&c.u, &c.v),
        "wall_seconds": wall,
        "matvec_count": matvecs,
    });
    let p = c.as_warm_start();
    write_outputs(&cli.output, &p, &summary)?;
    Ok(i32::from(c.flag.code()))
}
