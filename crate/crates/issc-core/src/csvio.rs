//! CSV emission and parsing for matrices and result tables.
//!
//! Floats are written with `{:.17e}` so that f64 values round-trip exactly
//! and repeated runs produce byte-identical files.

use std::fmt::Write as _;

use num_complex::Complex;

use crate::error::{IsscError, Result};
use crate::linalg::CMatrix;
use crate::scalar::Scalar;

/// Full-precision float formatting used in every emitted CSV.
pub fn fmt_float<T: Scalar>(x: T) -> String {
    format!("{:.17e}", x.to_f64().expect("scalar convertible to f64"))
}

/// Renders a complex matrix as paired real/imaginary CSV:
/// `i,j,re,im` per line with a header.
pub fn matrix_to_csv<T: Scalar>(m: &CMatrix<T>) -> String {
    let mut out = String::from("i,j,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[[i, j]];
            let _ = writeln!(out, "{},{},{},{}", i, j, fmt_float(z.re), fmt_float(z.im));
        }
    }
    out
}

/// Parses the output of [`matrix_to_csv`].
pub fn matrix_from_csv<T: Scalar>(text: &str) -> Result<CMatrix<T>> {
    let mut entries: Vec<(usize, usize, T, T)> = Vec::new();
    let mut max_i = 0usize;
    let mut max_j = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(IsscError::domain(format!(
                "matrix CSV line {} has {} fields, expected 4",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_idx = |s: &str| -> Result<usize> {
            s.trim()
                .parse::<usize>()
                .map_err(|e| IsscError::domain(format!("bad index `{s}`: {e}")))
        };
        let parse_val = |s: &str| -> Result<T> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|e| IsscError::domain(format!("bad float `{s}`: {e}")))?;
            Ok(T::of(v))
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        max_i = max_i.max(i);
        max_j = max_j.max(j);
        entries.push((i, j, parse_val(fields[2])?, parse_val(fields[3])?));
    }
    if entries.is_empty() {
        return Err(IsscError::domain("matrix CSV has no data rows"));
    }
    let n = max_i + 1;
    if max_j + 1 != n || entries.len() != n * n {
        return Err(IsscError::domain(format!(
            "matrix CSV is not a complete square matrix ({} rows for {}x{})",
            entries.len(),
            n,
            n
        )));
    }
    let mut m = crate::linalg::cmat_zeros::<T>(n);
    for (i, j, re, im) in entries {
        m[[i, j]] = Complex::new(re, im);
    }
    Ok(m)
}

/// Writes a rectangular table: header row plus `fmt_float`-rendered cells.
pub fn table_to_csv<T: Scalar>(header: &[&str], rows: &[Vec<T>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
