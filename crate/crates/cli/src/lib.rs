//! Matrix Market I/O and the `svt`, `svt-mc` and `svt-compress` front-ends.
//!
//! Exit codes: the solver flag (0–3) on a completed run, 64 for usage
//! errors, 65 for malformed input data, 70 for numerical failures and 74
//! for I/O errors.

pub mod mm;
pub mod warm;

mod commands;

use std::ffi::OsString;
use std::io;
use std::path::Path;

pub use commands::{run_compress, run_mc, run_svt};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn from_mm(path: &Path, e: mm::MmError) -> Self {
        match e {
            mm::MmError::Io(source) => Self::io(path, source),
            other => Self::Data(format!("{}: {other}", path.display())),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Numeric(_) => EXIT_SOFTWARE,
            Self::Io { .. } => EXIT_IO,
        }
    }
}

impl From<svt_core::Error> for CliError {
    fn from(e: svt_core::Error) -> Self {
        use svt_core::Error as E;
        match e {
            E::Dimension(_) | E::Usage(_) => Self::Usage(e.to_string()),
            E::NoConvergence { .. } | E::RankExhausted(_) | E::Diverged(_) => Self::Numeric(e.to_string()),
        }
    }
}

/// Parse with clap, run, and map the outcome to an exit code. Help and
/// version requests exit 0.
fn drive<C, I, T>(name: &str, argv: I, run: impl FnOnce(C) -> Result<i32, CliError>) -> i32
where
    C: clap::Parser,
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match C::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{name}: {e}");
            e.exit_code()
        }
    }
}
