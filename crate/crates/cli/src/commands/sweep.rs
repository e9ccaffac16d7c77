use rayon::prelude::*;
use serde::Serialize;
use tracereg::designs::generate_ground_truth;
use tracereg::rng::derive_seed;

use super::{
    completion_trial, lambda_rule, print_json, require_out, sibling, validate_common, write_json, TrialOutcome,
    TRUTH_STREAM,
};
use crate::args::ExperimentArgs;
use crate::error::{invalid, CliError, CliResult};
use crate::record::{fit_rate, write_dat, write_records, RateFit};

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub trials: Vec<TrialOutcome>,
    pub fit: Option<RateFit>,
}

impl SweepOutcome {
    pub fn violations(&self) -> usize {
        self.trials.iter().filter(|t| !t.consistent()).count()
    }
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    n_grid: &'a [usize],
    trials: usize,
    rows: usize,
    hypothesis_held: usize,
    violations: usize,
    fit: Option<&'a RateFit>,
}

/// Trials for every grid point, in `(n, trial)` order.
pub fn run_sweep(exp: &ExperimentArgs) -> CliResult<SweepOutcome> {
    validate_common(exp)?;
    let grid = exp.n_grid.clone().unwrap_or_else(|| vec![exp.n]);
    if grid.contains(&0) {
        return Err(invalid("sample sizes must be positive"));
    }
    let rule = lambda_rule(exp)?;
    let a0 = generate_ground_truth(exp.m1, exp.m2, exp.rank, exp.a, derive_seed(exp.seed, TRUTH_STREAM))?;
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&n| (0..exp.trials).map(move |k| (n, k)))
        .collect();
    let trials = jobs
        .par_iter()
        .enumerate()
        .map(|(stream, &(n, k))| completion_trial(&a0, exp, &rule, n, k, stream as u64))
        .collect::<CliResult<Vec<_>>>()?;
    let records: Vec<_> = trials.iter().map(|t| t.record.clone()).collect();
    let distinct = {
        let mut g = grid.clone();
        g.sort_unstable();
        g.dedup();
        g.len()
    };
    let fit = if distinct >= 3 { Some(fit_rate(&records)?) } else { None };
    Ok(SweepOutcome { trials, fit })
}

pub fn cmd_rate_sweep(exp: &ExperimentArgs) -> CliResult<()> {
    let out = require_out(exp)?;
    let outcome = run_sweep(exp)?;
    let records: Vec<_> = outcome.trials.iter().map(|t| t.record.clone()).collect();
    if let Some(bad) = records.iter().find(|r| !r.is_finite()) {
        return Err(CliError::Numerical(format!(
            "non-finite value in trial {} at n = {}",
            bad.trial, bad.n
        )));
    }
    write_records(out, &records)?;
    write_dat(&sibling(out, "dat"), &records)?;
    let grid = exp.n_grid.clone().unwrap_or_else(|| vec![exp.n]);
    let summary = SweepSummary {
        n_grid: &grid,
        trials: exp.trials,
        rows: records.len(),
        hypothesis_held: outcome.trials.iter().filter(|t| t.hypothesis_held).count(),
        violations: outcome.violations(),
        fit: outcome.fit.as_ref(),
    };
    write_json(&sibling(out, "json"), &summary)?;
    print_json(&summary)?;
    if summary.violations > 0 {
        return Err(CliError::Assertion(format!(
            "{} trials violate an oracle bound whose hypothesis held",
            summary.violations
        )));
    }
    Ok(())
}
