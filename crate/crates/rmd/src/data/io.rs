//! File formats: Matrix Market coordinate input for sparse nonnegative
//! matrices, dense CSV for matrices and factor pairs. All floating-point
//! output uses 17 significant digits so a write/read round trip is
//! bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::core::{FactorPair, ObservedMatrix};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid value '{tok}'")))
}

/// Reads a Matrix Market coordinate file (real, general or symmetric) as an
/// observed matrix. Symmetric storage is expanded; duplicate coordinates
/// accumulate; negative values are rejected.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<ObservedMatrix> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let first = first?;
    let header: Vec<String> =
        first.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if header.len() < 5 || header[0] != "%%matrixmarket" || header[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate real <symmetry>'"));
    }
    if header[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format '{}'", header[2])));
    }
    if header[3] != "real" && header[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field '{}'", header[3])));
    }
    let symmetric = match header[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut values: Option<DMatrix<f64>> = None;
    let mut declared = 0usize;
    let mut seen = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match values {
            None => {
                if toks.len() != 3 {
                    return Err(parse_err(lineno, "size line must be 'm n nnz'"));
                }
                let m = parse_usize(toks[0], lineno, "row count")?;
                let n = parse_usize(toks[1], lineno, "column count")?;
                declared = parse_usize(toks[2], lineno, "entry count")?;
                if m == 0 || n == 0 {
                    return Err(parse_err(lineno, "matrix dimensions must be positive"));
                }
                values = Some(DMatrix::zeros(m, n));
            }
            Some(ref mut v) => {
                if seen == declared {
                    return Err(parse_err(lineno, "more entries than the size line declared"));
                }
                if toks.len() != 3 {
                    return Err(parse_err(lineno, "entry line must be 'i j value'"));
                }
                let i = parse_usize(toks[0], lineno, "row index")?;
                let j = parse_usize(toks[1], lineno, "column index")?;
                let val = parse_f64(toks[2], lineno)?;
                if i < 1 || i > v.nrows() || j < 1 || j > v.ncols() {
                    return Err(parse_err(
                        lineno,
                        format!("entry ({i}, {j}) outside a {}x{} matrix", v.nrows(), v.ncols()),
                    ));
                }
                v[(i - 1, j - 1)] += val;
                if symmetric && i != j {
                    v[(j - 1, i - 1)] += val;
                }
                seen += 1;
            }
        }
    }
    let values = values.ok_or_else(|| parse_err(1, "missing size line"))?;
    if seen != declared {
        return Err(Error::Parse {
            line: 0,
            msg: format!("size line declared {declared} entries, file has {seen}"),
        });
    }
    ObservedMatrix::from_values(values)
}

fn write_row(out: &mut impl Write, row: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if first {
            first = false;
        } else {
            write!(out, ",")?;
        }
        write!(out, "{v:.16e}")?;
    }
    writeln!(out)
}

/// Writes a dense matrix as CSV: header "m,n", then one line per row.
pub fn write_dense_csv(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{},{}", a.nrows(), a.ncols())?;
    for i in 0..a.nrows() {
        write_row(&mut out, (0..a.ncols()).map(|j| a[(i, j)]))?;
    }
    out.flush()?;
    Ok(())
}

fn read_csv_rows(
    lines: &mut impl Iterator<Item = (usize, std::io::Result<String>)>,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("{what} ends before row {} of {rows}", i + 1)))?;
        let lineno = idx + 1;
        let line = line?;
        let toks: Vec<&str> = line.trim().split(',').collect();
        if toks.len() != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} values, found {}", toks.len()),
            ));
        }
        for (j, tok) in toks.iter().enumerate() {
            a[(i, j)] = parse_f64(tok.trim(), lineno)?;
        }
    }
    Ok(a)
}

/// Reads a dense CSV written by [`write_dense_csv`].
pub fn read_dense_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let toks: Vec<&str> = header.trim().split(',').collect();
    if toks.len() != 2 {
        return Err(parse_err(1, "header must be 'm,n'"));
    }
    let m = parse_usize(toks[0].trim(), 1, "row count")?;
    let n = parse_usize(toks[1].trim(), 1, "column count")?;
    read_csv_rows(&mut lines, m, n, "matrix")
}

/// Writes a factor pair as CSV: header "m,n,r", then the m rows of W and
/// the r rows of H.
pub fn write_factors(path: impl AsRef<Path>, f: &FactorPair) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    let (m, n) = f.dims();
    let r = f.rank();
    writeln!(out, "{m},{n},{r}")?;
    for i in 0..m {
        write_row(&mut out, (0..r).map(|j| f.w()[(i, j)]))?;
    }
    for i in 0..r {
        write_row(&mut out, (0..n).map(|j| f.h()[(i, j)]))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a factor pair written by [`write_factors`].
pub fn read_factors(path: impl AsRef<Path>) -> Result<FactorPair> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let toks: Vec<&str> = header.trim().split(',').collect();
    if toks.len() != 3 {
        return Err(parse_err(1, "header must be 'm,n,r'"));
    }
    let m = parse_usize(toks[0].trim(), 1, "row count")?;
    let n = parse_usize(toks[1].trim(), 1, "column count")?;
    let r = parse_usize(toks[2].trim(), 1, "rank")?;
    let w = read_csv_rows(&mut lines, m, r, "factor W")?;
    let h = read_csv_rows(&mut lines, r, n, "factor H")?;
    FactorPair::new(w, h)
}
