//! Plain-text matrix format.
//!
//! ```text
//! m1 m2
//! a(0,0) a(0,1) ... a(0,m2-1)
//! ...
//! ```
//!
//! Values are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` exactly. Lines end in LF with no trailing whitespace.

use std::fmt::Write as _;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix_text<T: Real>(a: &DenseMatrix<T>) -> String {
    let mut out = String::new();
    append_matrix_text(&mut out, a);
    out
}

pub(crate) fn append_matrix_text<T: Real>(out: &mut String, a: &DenseMatrix<T>) {
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|x| fmt_float(x.to_f64_lossy())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn read_matrix_text<T: Real>(text: &str) -> Result<DenseMatrix<T>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut cursor = 0;
    let m = parse_matrix_block(&lines, &mut cursor)?;
    if let Some((k, _)) = lines
        .iter()
        .enumerate()
        .skip(cursor)
        .find(|(_, l)| !l.trim().is_empty())
    {
        return Err(Error::parse(k + 1, "unexpected content after matrix"));
    }
    Ok(m)
}

/// Parses a header line plus `m1` rows starting at `lines[*cursor]`; advances the cursor.
pub(crate) fn parse_matrix_block<T: Real>(lines: &[&str], cursor: &mut usize) -> Result<DenseMatrix<T>> {
    let header_line = *cursor + 1;
    let header = lines
        .get(*cursor)
        .ok_or_else(|| Error::parse(header_line, "missing matrix header"))?;
    let dims = parse_usizes(header, header_line)?;
    let [m1, m2] = dims[..] else {
        return Err(Error::parse(header_line, "matrix header must be \"m1 m2\""));
    };
    if m1 == 0 || m2 == 0 {
        return Err(Error::parse(header_line, "matrix dimensions must be positive"));
    }
    *cursor += 1;
    let mut data = Vec::with_capacity(m1 * m2);
    for _ in 0..m1 {
        let line_no = *cursor + 1;
        let line = lines
            .get(*cursor)
            .ok_or_else(|| Error::parse(line_no, "missing matrix row"))?;
        let row = parse_floats::<T>(line, line_no)?;
        if row.len() != m2 {
            return Err(Error::parse(
                line_no,
                format!("expected {m2} values, found {}", row.len()),
            ));
        }
        data.extend(row);
        *cursor += 1;
    }
    DenseMatrix::from_row_major(m1, m2, data).map_err(|e| Error::parse(header_line, e.to_string()))
}

pub(crate) fn parse_usizes(line: &str, line_no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("expected integer, found {tok:?}")))
        })
        .collect()
}

pub(crate) fn parse_floats<T: Real>(line: &str, line_no: usize) -> Result<Vec<T>> {
    line.split_whitespace().map(|tok| parse_float(tok, line_no)).collect()
}

pub(crate) fn parse_float<T: Real>(tok: &str, line_no: usize) -> Result<T> {
    let x: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line_no, format!("expected number, found {tok:?}")))?;
    if !x.is_finite() {
        return Err(Error::parse(line_no, "non-finite value"));
    }
    Ok(T::lit(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_layout() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -0.1], vec![1e-300, 3.0]]).unwrap();
        let s = write_matrix_text(&a);
        assert_eq!(
            s,
            "2 2\n1.0000000000000000e0 -1.0000000000000001e-1\n1.0000000000000000e-300 3.0000000000000000e0\n"
        );
        assert!(!s.lines().any(|l| l.ends_with(' ')));
        let back: DenseMatrix<f64> = read_matrix_text(&s).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn malformed_inputs_name_the_line() {
        let err = read_matrix_text::<f64>("2 2\n1 2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_matrix_text::<f64>("2 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_matrix_text::<f64>("1 1\nnan\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(read_matrix_text::<f64>("1 1\n1\n5\n").is_err());
    }
}
