use serde::Serialize;
use tracereg::designs::read_observations_file;
use tracereg::estimators::{estimate_completion_with_rank, penalized_objective, select_lambda, solve_penalized};
use tracereg::linalg::text::{read_matrix_text, write_matrix_text};
use tracereg::{Matrix, SolverConfig};

use super::{lambda_rule, require_out, sibling, write_json};
use crate::args::EstimateArgs;
use crate::error::{invalid, CliResult};

#[derive(Serialize)]
struct EstimateSidecar {
    lambda: f64,
    rule: &'static str,
    iterations: usize,
    objective: f64,
    rank: usize,
}

pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let exp = &args.exp;
    let out = require_out(exp)?;
    let obs = read_observations_file::<f64>(&args.input)?;
    let a0: Option<Matrix> = match &args.a0 {
        Some(p) => Some(read_matrix_text(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    if let Some(a) = &a0 {
        if a.shape() != obs.dims() {
            return Err(invalid(format!(
                "--a0 is {:?}, observations are {:?}",
                a.shape(),
                obs.dims()
            )));
        }
    }
    let rule = lambda_rule(exp)?;
    let lambda = select_lambda(&rule, &obs, a0.as_ref())?;
    // Uniform completion has a closed form; other designs go through the iterative solver.
    let (estimate, iterations, rank) = if obs.is_completion() {
        let (a, r) = estimate_completion_with_rank(&obs, lambda)?;
        (a, 0, r)
    } else {
        let cfg = SolverConfig {
            max_iters: args.max_iters,
            rel_tol: args.tol,
            step_size: None,
        };
        let s = solve_penalized(&obs, lambda, &cfg)?;
        if !s.converged {
            eprintln!(
                "warning: solver stopped after {} iterations without meeting the tolerance",
                s.iterations
            );
        }
        (s.estimate, s.iterations, s.rank)
    };
    let objective = penalized_objective(&estimate, &obs, lambda)?;
    std::fs::write(out, write_matrix_text(&estimate))?;
    write_json(
        &sibling(out, "json"),
        &EstimateSidecar {
            lambda,
            rule: rule.name(),
            iterations,
            objective,
            rank,
        },
    )?;
    Ok(())
}
