//! Matrix Market files: coordinate and array layouts, real/integer/pattern
//! fields, general/symmetric/skew-symmetric storage.
//!
//! Symmetric and skew-symmetric storage is expanded to general on read.
//! Values are written in shortest round-trip form, so a write followed by
//! a read reproduces every entry bit for bit.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use svt_core::{DenseMatrix, SparseMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: index out of bounds: ({row}, {col}) in a {nrows}x{ncols} matrix")]
    OutOfBounds {
        line: usize,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("line {line}: unsupported {what}")]
    Unsupported { line: usize, what: String },
}

impl MmError {
    fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

/// Parsed file contents with symmetric storage already expanded. Indices
/// are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct MmMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub layout: Layout,
    pub entries: Vec<(usize, usize, f64)>,
}

impl MmMatrix {
    /// Coordinate files keep explicit zeros; array files drop them.
    pub fn to_sparse(&self) -> SparseMatrix {
        let kept: Vec<_> = match self.layout {
            Layout::Coordinate => self.entries.clone(),
            Layout::Array => self.entries.iter().copied().filter(|e| e.2 != 0.0).collect(),
        };
        SparseMatrix::from_triplets(self.nrows, self.ncols, &kept).expect("indices checked while parsing")
    }

    /// Duplicate coordinates are summed.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            d.set(i, j, d.get(i, j) + v);
        }
        d
    }
}

fn parse_header(text: &str, line: usize) -> Result<(Layout, Field, Symmetry), MmError> {
    let tokens: Vec<String> = text.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(MmError::parse(line, "header must start with %%MatrixMarket"));
    }
    if tokens.len() != 5 {
        return Err(MmError::parse(
            line,
            format!("header needs 5 fields, found {}", tokens.len()),
        ));
    }
    if tokens[1] != "matrix" {
        return Err(MmError::Unsupported {
            line,
            what: format!("object '{}'", tokens[1]),
        });
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(MmError::parse(line, format!("unknown format '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" if layout == Layout::Coordinate => Field::Pattern,
        other => {
            return Err(MmError::Unsupported {
                line,
                what: format!("field '{other}' for {} data", tokens[2]),
            })
        }
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => {
            return Err(MmError::Unsupported {
                line,
                what: format!("symmetry '{other}'"),
            })
        }
    };
    Ok((layout, field, symmetry))
}

fn parse_usize(tok: Option<&str>, what: &str, line: usize) -> Result<usize, MmError> {
    let tok = tok.ok_or_else(|| MmError::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| MmError::parse(line, format!("cannot parse {what} from '{tok}'")))
}

fn parse_value(tok: Option<&str>, line: usize) -> Result<f64, MmError> {
    let tok = tok.ok_or_else(|| MmError::parse(line, "missing value"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| MmError::parse(line, format!("cannot parse value from '{tok}'")))?;
    if !v.is_finite() {
        return Err(MmError::parse(line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

/// Read a Matrix Market stream.
pub fn parse<R: BufRead>(reader: R) -> Result<MmMatrix, MmError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (layout, field, symmetry) = match lines.next() {
        Some((n, l)) => parse_header(&l?, n)?,
        None => return Err(MmError::parse(1, "empty file")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    // array layout: position in the column-major (possibly triangular) stream
    let (mut ai, mut aj) = (0usize, 0usize);
    let mut seen = 0usize;
    let mut last_line = 1;

    for (n, text) in lines {
        let text = text?;
        last_line = n;
        let t = text.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut tok = t.split_whitespace();
        let Some((m, nc, expected)) = size else {
            let m = parse_usize(tok.next(), "row count", n)?;
            let nc = parse_usize(tok.next(), "column count", n)?;
            let expected = match layout {
                Layout::Coordinate => parse_usize(tok.next(), "entry count", n)?,
                Layout::Array => match symmetry {
                    Symmetry::General => m * nc,
                    Symmetry::Symmetric => nc * (nc + 1) / 2,
                    Symmetry::Skew => nc * nc.saturating_sub(1) / 2,
                },
            };
            if symmetry != Symmetry::General && m != nc {
                return Err(MmError::parse(n, format!("{m}x{nc} matrix cannot be stored symmetric")));
            }
            if symmetry == Symmetry::Skew && layout == Layout::Array {
                ai = 1;
            }
            size = Some((m, nc, expected));
            continue;
        };
        if seen == expected {
            return Err(MmError::parse(n, format!("more than the declared {expected} entries")));
        }
        let (i, j, v) = match layout {
            Layout::Coordinate => {
                let i = parse_usize(tok.next(), "row index", n)?;
                let j = parse_usize(tok.next(), "column index", n)?;
                if i == 0 || j == 0 || i > m || j > nc {
                    return Err(MmError::OutOfBounds {
                        line: n,
                        row: i,
                        col: j,
                        nrows: m,
                        ncols: nc,
                    });
                }
                let v = match field {
                    Field::Pattern => 1.0,
                    Field::Real => parse_value(tok.next(), n)?,
                };
                (i - 1, j - 1, v)
            }
            Layout::Array => {
                let v = parse_value(tok.next(), n)?;
                let here = (ai, aj, v);
                ai += 1;
                if ai == m {
                    aj += 1;
                    ai = match symmetry {
                        Symmetry::General => 0,
                        Symmetry::Symmetric => aj,
                        Symmetry::Skew => aj + 1,
                    };
                }
                here
            }
        };
        if tok.next().is_some() {
            return Err(MmError::parse(n, "trailing fields after entry"));
        }
        seen += 1;
        match symmetry {
            Symmetry::General => entries.push((i, j, v)),
            Symmetry::Symmetric => {
                entries.push((i, j, v));
                if i != j {
                    entries.push((j, i, v));
                }
            }
            Symmetry::Skew => {
                if i == j {
                    return Err(MmError::parse(n, "diagonal entry in skew-symmetric storage"));
                }
                entries.push((i, j, v));
                entries.push((j, i, -v));
            }
        }
    }

    let Some((nrows, ncols, expected)) = size else {
        return Err(MmError::parse(last_line, "missing size line"));
    };
    if seen != expected {
        return Err(MmError::parse(
            last_line,
            format!("expected {expected} entries, found {seen}"),
        ));
    }
    Ok(MmMatrix {
        nrows,
        ncols,
        layout,
        entries,
    })
}

pub fn read(path: &Path) -> Result<MmMatrix, MmError> {
    parse(BufReader::new(File::open(path)?))
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix, MmError> {
    read(path).map(|m| m.to_sparse())
}

pub fn read_dense(path: &Path) -> Result<DenseMatrix, MmError> {
    read(path).map(|m| m.to_dense())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_array<W: Write>(mut w: W, a: &DenseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    for v in a.as_slice() {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    w.flush()
}

pub fn write_coordinate<W: Write>(mut w: W, a: &SparseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
    }
    w.flush()
}

pub fn save_array(path: &Path, a: &DenseMatrix) -> io::Result<()> {
    write_array(BufWriter::new(File::create(path)?), a)
}

pub fn save_coordinate(path: &Path, a: &SparseMatrix) -> io::Result<()> {
    write_coordinate(BufWriter::new(File::create(path)?), a)
}
