use tracereg::stats::Wilson;
use tracereg::stochastic::{tail_verify, CompletionNoise, TailBound, TailScenario};

use super::{completion_noise, noise_model, print_json, validate_common, write_json};
use crate::args::{ExperimentArgs, NoiseKind};
use crate::error::{CliError, CliResult};

pub fn cmd_bernstein(exp: &ExperimentArgs) -> CliResult<()> {
    validate_common(exp)?;
    let bound = match completion_noise(exp) {
        CompletionNoise::Learning { eta } => TailBound::Learning { eta },
        CompletionNoise::GaussianSubexp { sigma, a, alpha, c } => TailBound::GaussianSubexp { sigma, a, alpha, c },
    };
    let name = match exp.noise {
        NoiseKind::Gaussian => "gaussian",
        NoiseKind::Subexp => "subexp",
        NoiseKind::Bounded => "bounded",
        NoiseKind::None => "noiseless",
    };
    let scenario = TailScenario {
        name: format!("{name}_{}x{}_n{}_r{}", exp.m1, exp.m2, exp.n, exp.rank),
        m1: exp.m1,
        m2: exp.m2,
        n: exp.n,
        rank: exp.rank,
        a: exp.a,
        noise: noise_model(exp),
        bound,
    };
    let report = tail_verify(&scenario, exp.trials, exp.t, exp.seed)?;
    if let Some(out) = &exp.out {
        write_json(out, &report)?;
    }
    print_json(&report)?;
    // Exceedance is an assertion failure only when even the 3-sigma Wilson interval sits above the target.
    let w = Wilson::new(report.exceed_count, report.trials, 3.0);
    if w.lower() > report.target {
        return Err(CliError::Assertion(format!(
            "exceedance {} is significantly above the target {}",
            report.exceed_frac, report.target
        )));
    }
    Ok(())
}
