//! Matrix Market coordinate format (`real`, `general` or `symmetric`).
//!
//! Indices are 1-based on disk and 0-based in memory. Symmetric files carry
//! the lower triangle and are expanded to full storage on read.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{CsrMatrix, SparseError, SymmetryTag};
use crate::Scalar;

fn mm_err(line: usize, msg: impl Into<String>) -> SparseError {
    SparseError::MatrixMarket { line, msg: msg.into() }
}

pub fn read_matrix_market<T: Scalar, P: AsRef<Path>>(path: P) -> Result<CsrMatrix<T>, SparseError> {
    let f = fs::File::open(path)?;
    parse_matrix_market(BufReader::new(f))
}

pub fn parse_matrix_market<T: Scalar, R: Read>(reader: R) -> Result<CsrMatrix<T>, SparseError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(mm_err(1, format!("malformed header `{header}`")));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(mm_err(1, "only `matrix coordinate` files are supported"));
    }
    if tokens[3] != "real" {
        return Err(mm_err(1, format!("unsupported field `{}`", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(mm_err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip: Vec<(usize, usize, T)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "size line must be `rows cols nnz`"));
                }
                let p = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| mm_err(lineno, format!("bad integer `{s}`")))
                };
                let (r, c, z) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                if symmetric && r != c {
                    return Err(mm_err(lineno, "symmetric matrix must be square"));
                }
                size = Some((r, c, z));
                trip.reserve(if symmetric { 2 * z } else { z });
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "entry line must be `row col value`"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| mm_err(lineno, format!("bad row index `{}`", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| mm_err(lineno, format!("bad column index `{}`", fields[1])))?;
                let v: T = fields[2]
                    .parse()
                    .map_err(|_| mm_err(lineno, format!("bad value `{}`", fields[2])))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(mm_err(lineno, format!("index ({i}, {j}) out of range for {nr}x{nc}")));
                }
                let (i, j) = (i - 1, j - 1);
                if symmetric {
                    if j > i {
                        return Err(mm_err(lineno, "symmetric file has an upper-triangle entry"));
                    }
                    if i != j {
                        trip.push((j, i, v));
                    }
                }
                trip.push((i, j, v));
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| mm_err(1, "missing size line"))?;
    let stored = if symmetric {
        trip.iter().filter(|e| e.0 >= e.1).count()
    } else {
        trip.len()
    };
    if stored != nnz {
        return Err(mm_err(0, format!("header declares {nnz} entries, found {stored}")));
    }
    let a = CsrMatrix::from_unsorted(nr, nc, trip)?;
    if symmetric {
        let mut a = a;
        a.set_symmetry_unchecked(SymmetryTag::Symmetric);
        Ok(a)
    } else {
        Ok(a)
    }
}

/// Renders `a`; symmetric-tagged matrices emit the lower triangle.
pub fn format_matrix_market<T: Scalar>(a: &CsrMatrix<T>) -> String {
    let symmetric = a.symmetry().is_symmetric();
    let stored: Vec<(usize, usize, T)> = if symmetric {
        a.triplets().filter(|&(i, j, _)| j <= i).collect()
    } else {
        a.triplets().collect()
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "%%MatrixMarket matrix coordinate real {}",
        if symmetric { "symmetric" } else { "general" }
    );
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), stored.len());
    for (i, j, v) in stored {
        // `{:e}` prints the shortest representation that round-trips.
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market<T: Scalar, P: AsRef<Path>>(a: &CsrMatrix<T>, path: P) -> Result<(), SparseError> {
    fs::write(path, format_matrix_market(a))?;
    Ok(())
}
