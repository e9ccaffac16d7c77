use serde::Serialize;
use tracereg::lasso::{
    check_sharp_oracle, embedding_gap, gaussian_response, lasso_solve, read_linear_csv, sharp_oracle_lambda,
    SharpOracleConfig, SharpOracleVerdict,
};
use tracereg::rng::derive_seed;
use tracereg::{LinearDesign, SolverConfig};

use super::{print_json, write_json};
use crate::args::{LassoArgs, RuleKind};
use crate::error::{invalid, CliError, CliResult};

/// Agreement required between the Lasso and the diagonal-embedded trace solver.
const EMBEDDING_TOL: f64 = 1e-6;

#[derive(Serialize)]
struct LassoFit {
    lambda: f64,
    beta: Vec<f64>,
    sweeps: usize,
    kkt_residual: f64,
    converged: bool,
}

#[derive(Serialize)]
struct LassoReport {
    #[serde(flatten)]
    verdict: SharpOracleVerdict,
    embedding_max_diff: f64,
}

fn lambda_for(args: &LassoArgs, p: usize, n: usize) -> CliResult<f64> {
    match args.exp.lambda_rule {
        RuleKind::Fixed => args
            .exp
            .lambda
            .ok_or_else(|| invalid("--lambda-rule fixed needs --lambda")),
        _ => Ok(sharp_oracle_lambda(args.exp.sigma, p, n, args.exp.a)?),
    }
}

pub fn cmd_lasso(args: &LassoArgs) -> CliResult<()> {
    let exp = &args.exp;
    if let Some(input) = &args.input {
        let (design, y) = read_linear_csv(&std::fs::read_to_string(input)?)?;
        let lambda = lambda_for(args, design.p(), design.n())?;
        let out = lasso_solve(
            &design,
            &y,
            lambda,
            &SolverConfig {
                max_iters: 100_000,
                ..SolverConfig::default()
            },
        )?;
        let fit = LassoFit {
            lambda,
            beta: out.beta,
            sweeps: out.sweeps,
            kkt_residual: out.kkt_residual,
            converged: out.converged,
        };
        if let Some(p) = &exp.out {
            write_json(p, &fit)?;
        }
        return print_json(&fit);
    }

    let (n, p, s) = (exp.n, args.p, args.sparsity);
    if s > p {
        return Err(invalid("--sparsity cannot exceed --p"));
    }
    let design = LinearDesign::orthonormal(n, p, derive_seed(exp.seed, u64::MAX))?;
    // Nonzeros spread over the coordinates with alternating signs.
    let mut beta_star = vec![0.0; p];
    for k in 0..s {
        beta_star[k * p / s.max(1)] = if k % 2 == 0 { args.beta } else { -args.beta };
    }
    let cfg = SharpOracleConfig {
        sigma: exp.sigma,
        a: exp.a,
        trials: exp.trials,
        seed: exp.seed,
        kappa_budget: args.kappa_budget,
    };
    let verdict = check_sharp_oracle(&design, &beta_star, &cfg)?;
    let y = gaussian_response(&design, &beta_star, exp.sigma, derive_seed(exp.seed, u64::MAX - 1), 0)?;
    let gap = embedding_gap(&design, &y, lambda_for(args, p, n)?)?;
    let report = LassoReport {
        verdict,
        embedding_max_diff: gap,
    };
    if let Some(path) = &exp.out {
        write_json(path, &report)?;
    }
    print_json(&report)?;
    if !report.verdict.passed {
        return Err(CliError::Assertion(format!(
            "violation fraction {} exceeds {} + {}",
            report.verdict.violation_frac, report.verdict.failure_probability, report.verdict.wilson_slack
        )));
    }
    if gap > EMBEDDING_TOL {
        return Err(CliError::Assertion(format!(
            "diagonal embedding differs from the Lasso by {gap}"
        )));
    }
    Ok(())
}
