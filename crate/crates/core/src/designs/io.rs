//! Observation files.
//!
//! ```text
//! USR m1 m2 n
//! i j y              (n lines, 0-based indices)
//! ```
//!
//! or, for any other design,
//!
//! ```text
//! FULL m1 m2 n
//! y                  (then X_i in the matrix text format; repeated n times)
//! m1 m2
//! ...
//! ```
//!
//! A `FULL` file carries no distribution, so it reads back as a fixed design.

use std::fmt::Write as _;
use std::path::Path;

use super::{Design, Entry, ObservationSet, Samples};
use crate::error::{Error, Result};
use crate::linalg::text::{append_matrix_text, fmt_float, parse_float, parse_matrix_block, parse_usizes};
use crate::scalar::Real;

pub fn write_observations<T: Real>(obs: &ObservationSet<T>) -> String {
    let (m1, m2) = obs.dims();
    let mut out = String::new();
    match &obs.samples {
        Samples::Entries(es) => {
            let _ = writeln!(out, "USR {m1} {m2} {}", es.len());
            for e in es {
                let _ = writeln!(out, "{} {} {}", e.row, e.col, fmt_float(e.y.to_f64_lossy()));
            }
        }
        Samples::Matrices(ms) => {
            let _ = writeln!(out, "FULL {m1} {m2} {}", ms.len());
            for (x, y) in ms {
                let _ = writeln!(out, "{}", fmt_float(y.to_f64_lossy()));
                append_matrix_text(&mut out, x);
            }
        }
    }
    out
}

pub fn read_observations<T: Real>(text: &str) -> Result<ObservationSet<T>> {
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.first().ok_or_else(|| Error::parse(1, "empty file"))?;
    let mut toks = header.split_whitespace();
    let tag = toks.next().unwrap_or("");
    let rest: Vec<&str> = toks.collect();
    let dims = parse_usizes(&rest.join(" "), 1)?;
    let [m1, m2, n] = dims[..] else {
        return Err(Error::parse(1, "header must be \"USR m1 m2 n\" or \"FULL m1 m2 n\""));
    };
    if m1 == 0 || m2 == 0 {
        return Err(Error::parse(1, "dimensions must be positive"));
    }
    if n == 0 {
        return Err(Error::parse(1, "observation set must contain at least one record"));
    }
    let mut cursor = 1;
    let obs = match tag {
        "USR" => {
            let mut es = Vec::with_capacity(n);
            for _ in 0..n {
                let line_no = cursor + 1;
                let line = lines
                    .get(cursor)
                    .ok_or_else(|| Error::parse(line_no, format!("expected {n} records")))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                let [i, j, y] = toks[..] else {
                    return Err(Error::parse(line_no, "record must be \"i j y\""));
                };
                let idx = parse_usizes(&format!("{i} {j}"), line_no)?;
                let (row, col) = (idx[0], idx[1]);
                if row >= m1 || col >= m2 {
                    return Err(Error::parse(
                        line_no,
                        format!("index ({row}, {col}) out of range for {m1}x{m2}"),
                    ));
                }
                es.push(Entry {
                    row,
                    col,
                    y: parse_float(y, line_no)?,
                });
                cursor += 1;
            }
            ObservationSet {
                design: Design::UsrCompletion { m1, m2 },
                samples: Samples::Entries(es),
            }
        }
        "FULL" => {
            let mut ms = Vec::with_capacity(n);
            for _ in 0..n {
                let line_no = cursor + 1;
                let line = lines
                    .get(cursor)
                    .ok_or_else(|| Error::parse(line_no, format!("expected {n} records")))?;
                let y = parse_float::<T>(line.trim(), line_no)?;
                cursor += 1;
                let block_line = cursor + 1;
                let x = parse_matrix_block::<T>(&lines, &mut cursor)?;
                if x.shape() != (m1, m2) {
                    return Err(Error::parse(block_line, format!("design matrix must be {m1}x{m2}")));
                }
                ms.push((x, y));
            }
            let matrices = ms.iter().map(|(x, _)| x.clone()).collect();
            ObservationSet {
                design: Design::Fixed {
                    m1,
                    m2,
                    matrices,
                    mu: None,
                },
                samples: Samples::Matrices(ms),
            }
        }
        other => return Err(Error::parse(1, format!("unknown file tag {other:?}"))),
    };
    if let Some((k, _)) = lines
        .iter()
        .enumerate()
        .skip(cursor)
        .find(|(_, l)| !l.trim().is_empty())
    {
        return Err(Error::parse(k + 1, "more records than the header announces"));
    }
    Ok(obs)
}

pub fn write_observations_file<T: Real>(obs: &ObservationSet<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_observations(obs))?;
    Ok(())
}

pub fn read_observations_file<T: Real>(path: impl AsRef<Path>) -> Result<ObservationSet<T>> {
    read_observations(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{generate_ground_truth, sample_observations, NoiseModel};

    #[test]
    fn usr_layout() {
        let obs = ObservationSet::new(
            Design::usr(2, 3),
            Samples::Entries(vec![Entry { row: 1, col: 2, y: 0.5 }]),
        )
        .unwrap();
        assert_eq!(write_observations(&obs), "USR 2 3 1\n1 2 5.0000000000000000e-1\n");
    }

    #[test]
    fn usr_round_trip() {
        let a0 = generate_ground_truth::<f64>(4, 5, 2, 1.0, 3).unwrap();
        let noise = NoiseModel::Gaussian { sigma: 0.3 };
        let obs = sample_observations(&a0, &Design::usr(4, 5), &noise, 40, 8).unwrap();
        let back: ObservationSet<f64> = read_observations(&write_observations(&obs)).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn full_round_trip_keeps_records() {
        let a0 = generate_ground_truth::<f64>(3, 2, 1, 1.0, 3).unwrap();
        let noise = NoiseModel::Gaussian { sigma: 0.3 };
        let obs = sample_observations(&a0, &Design::GaussianFull { m1: 3, m2: 2 }, &noise, 5, 8).unwrap();
        let back: ObservationSet<f64> = read_observations(&write_observations(&obs)).unwrap();
        assert_eq!(back.samples, obs.samples);
        assert!(matches!(back.design, Design::Fixed { .. }));
    }

    #[test]
    fn out_of_range_index_names_line() {
        let err = read_observations::<f64>("USR 2 2 2\n0 0 1.0\n0 2 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(
            read_observations::<f64>("USR 2 2 0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read_observations::<f64>("").is_err());
    }

    #[test]
    fn record_count_must_match_header() {
        assert!(matches!(
            read_observations::<f64>("USR 2 2 2\n0 0 1.0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read_observations::<f64>("USR 2 2 1\n0 0 1.0\n1 1 1.0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
