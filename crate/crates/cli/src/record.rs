//! Per-trial CSV records, the rate fit and `.dat` plot data.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use tracereg::linalg::text::fmt_float;
use tracereg::stats::{median, quantile};

use crate::error::{invalid, CliResult};

fn sig17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_float(*x))
}

/// One Monte-Carlo trial. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trial: usize,
    pub m1: usize,
    pub m2: usize,
    pub n: usize,
    pub rank_true: usize,
    #[serde(serialize_with = "sig17")]
    pub lambda: f64,
    pub lambda_rule: String,
    /// `‖Â − A0‖₂² / (m1 m2)`.
    #[serde(serialize_with = "sig17")]
    pub frob_err_sq_norm: f64,
    pub rank_hat: usize,
    #[serde(serialize_with = "sig17")]
    pub oracle_rhs_fast: f64,
    #[serde(serialize_with = "sig17")]
    pub oracle_rhs_slow: f64,
    /// `‖M‖_∞`.
    #[serde(serialize_with = "sig17")]
    pub m_norm: f64,
    #[serde(serialize_with = "sig17")]
    pub bound_m: f64,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.lambda,
            self.frob_err_sq_norm,
            self.oracle_rhs_fast,
            self.oracle_rhs_slow,
            self.m_norm,
            self.bound_m,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

pub fn write_records(path: &Path, records: &[ExperimentRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> CliResult<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Least-squares line through `(log n, log median error)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(n, median error)` per grid point.
    pub points: Vec<(usize, f64)>,
}

fn by_n(records: &[ExperimentRecord]) -> BTreeMap<usize, Vec<&ExperimentRecord>> {
    let mut groups: BTreeMap<usize, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.n).or_default().push(r);
    }
    groups
}

pub fn fit_rate(records: &[ExperimentRecord]) -> CliResult<RateFit> {
    let groups = by_n(records);
    if groups.len() < 3 {
        return Err(invalid(format!(
            "rate fit needs at least 3 distinct n, found {}",
            groups.len()
        )));
    }
    let points: Vec<(usize, f64)> = groups
        .iter()
        .map(|(&n, rs)| (n, median(&rs.iter().map(|r| r.frob_err_sq_norm).collect::<Vec<_>>())))
        .collect();
    if points.iter().any(|&(_, m)| m.is_nan() || m <= 0.0) {
        return Err(invalid("median error must be positive at every n for a log-log fit"));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        points,
    })
}

/// Columns `n median_error q25 q75 theory_bound`; the bound is the median fast-rate right-hand side.
pub fn write_dat(path: &Path, records: &[ExperimentRecord]) -> CliResult<()> {
    let mut out = String::from("# n median_error q25 q75 theory_bound\n");
    for (n, rs) in by_n(records) {
        let errs: Vec<f64> = rs.iter().map(|r| r.frob_err_sq_norm).collect();
        let bounds: Vec<f64> = rs.iter().map(|r| r.oracle_rhs_fast).collect();
        out.push_str(&format!(
            "{n} {} {} {} {}\n",
            fmt_float(median(&errs)),
            fmt_float(quantile(&errs, 0.25)),
            fmt_float(quantile(&errs, 0.75)),
            fmt_float(median(&bounds))
        ));
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, err: f64) -> ExperimentRecord {
        ExperimentRecord {
            trial: 0,
            m1: 3,
            m2: 3,
            n,
            rank_true: 1,
            lambda: 0.1,
            lambda_rule: "oracle".into(),
            frob_err_sq_norm: err,
            rank_hat: 1,
            oracle_rhs_fast: 2.0 * err,
            oracle_rhs_slow: 3.0 * err,
            m_norm: 0.05,
            bound_m: 0.2,
            seed: 1,
        }
    }

    #[test]
    fn exact_power_laws() {
        let inv: Vec<_> = [100, 200, 400, 800].iter().map(|&n| rec(n, 3.0 / n as f64)).collect();
        let f = fit_rate(&inv).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let root: Vec<_> = [100, 200, 400]
            .iter()
            .map(|&n| rec(n, 1.0 / (n as f64).sqrt()))
            .collect();
        assert!((fit_rate(&root).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let rs = vec![rec(10, 1.0), rec(10, 2.0), rec(20, 1.0)];
        assert!(fit_rate(&rs).is_err());
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rs = vec![rec(10, 0.25), rec(20, 1.0 / 3.0)];
        write_records(&p, &rs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,m1,m2,n,rank_true,lambda,lambda_rule,frob_err_sq_norm,rank_hat,oracle_rhs_fast,oracle_rhs_slow,m_norm,bound_m,seed"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,3,3,10,1,1.0000000000000001e-1,oracle,2.5000000000000000e-1,1,5.0000000000000000e-1,7.5000000000000000e-1,5.0000000000000003e-2,2.0000000000000001e-1,1"
        );
        assert_eq!(read_records(&p).unwrap(), rs);
    }

    #[test]
    fn dat_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.dat");
        write_dat(&p, &[rec(10, 1.0), rec(10, 3.0), rec(20, 0.5)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# n median_error q25 q75 theory_bound");
        assert_eq!(
            lines[1],
            "10 2.0000000000000000e0 1.5000000000000000e0 2.5000000000000000e0 4.0000000000000000e0"
        );
        assert_eq!(lines.len(), 3);
    }
}
