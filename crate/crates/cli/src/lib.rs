//! Experiment harness behind the `tracereg` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod record;

use args::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::Estimate(a) => commands::cmd_estimate(a),
        Command::RateSweep(a) => commands::cmd_rate_sweep(a),
        Command::RankRecovery(a) => commands::cmd_rank_recovery(a),
        Command::Bernstein(a) => commands::cmd_bernstein(a),
        Command::Lasso(a) => commands::cmd_lasso(a),
        Command::Packing(a) => commands::cmd_packing(a),
    }
}
