//! Output directories: `U.mtx`, `V.mtx` (array format) and `S.txt`.
//!
//! The same layout is read back as a warm start.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use svt_core::{Flag, PartialSvd};

use crate::mm;
use crate::CliError;

pub const U_FILE: &str = "U.mtx";
pub const V_FILE: &str = "V.mtx";
pub const S_FILE: &str = "S.txt";

/// Write the factors into `dir`, creating it if needed.
pub fn save_factors(dir: &Path, p: &PartialSvd) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    mm::save_array(&dir.join(U_FILE), &p.u)?;
    mm::save_array(&dir.join(V_FILE), &p.v)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(S_FILE))?);
    for s in &p.s {
        writeln!(w, "{}", mm::fmt_f64(*s))?;
    }
    w.flush()
}

fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Data(format!("{}:{}: bad value '{}'", path.display(), n + 1, l.trim())))
        })
        .collect()
}

/// Load a previous output directory. A directory with none of the three
/// files (or an empty result) means a cold start.
pub fn load_factors(dir: &Path) -> Result<Option<PartialSvd>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::io(
            dir,
            io::Error::new(io::ErrorKind::NotFound, "warm-start directory not found"),
        ));
    }
    let files = [U_FILE, V_FILE, S_FILE].map(|f| dir.join(f));
    let present = files.iter().filter(|p| p.exists()).count();
    if present == 0 {
        return Ok(None);
    }
    if present < 3 {
        return Err(CliError::Usage(format!(
            "{} needs all of {U_FILE}, {V_FILE} and {S_FILE}",
            dir.display()
        )));
    }
    let read = |p: &Path| mm::read_dense(p).map_err(|e| CliError::from_mm(p, e));
    let u = read(&files[0])?;
    let v = read(&files[1])?;
    let s = read_values(&files[2])?;
    if u.ncols() != s.len() || v.ncols() != s.len() {
        return Err(CliError::Usage(format!(
            "warm start has {} values but U has {} columns and V has {}",
            s.len(),
            u.ncols(),
            v.ncols()
        )));
    }
    if s.is_empty() {
        return Ok(None);
    }
    Ok(Some(PartialSvd {
        u,
        s,
        v,
        flag: Flag::Success,
    }))
}

/// Check a loaded warm start against an `m x n` input.
pub fn check_shape(w: &PartialSvd, m: usize, n: usize) -> Result<(), CliError> {
    if w.u.nrows() != m || w.v.nrows() != n {
        return Err(CliError::Usage(format!(
            "warm start U0 has {} rows and V0 has {}; the input is {m}x{n}",
            w.u.nrows(),
            w.v.nrows()
        )));
    }
    Ok(())
}
