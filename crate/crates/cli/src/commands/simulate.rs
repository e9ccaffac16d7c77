use tracereg::designs::{generate_ground_truth, sample_observations, write_observations_file, Design};
use tracereg::linalg::text::write_matrix_text;
use tracereg::rng::derive_seed;

use super::{noise_model, require_out, sibling, validate_common, TRUTH_STREAM};
use crate::args::{DesignChoice, SimulateArgs};
use crate::error::CliResult;

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let exp = &args.exp;
    validate_common(exp)?;
    let out = require_out(exp)?;
    let (m1, m2) = (exp.m1, exp.m2);
    let design = match args.design {
        DesignChoice::Usr => Design::usr(m1, m2),
        DesignChoice::ColumnMask => Design::ColumnMask { m1, m2 },
        DesignChoice::Gaussian => Design::GaussianFull { m1, m2 },
        DesignChoice::Rademacher => Design::RademacherFull { m1, m2 },
    };
    let a0 = generate_ground_truth(m1, m2, exp.rank, exp.a, derive_seed(exp.seed, TRUTH_STREAM))?;
    let obs = sample_observations(&a0, &design, &noise_model(exp), exp.n, derive_seed(exp.seed, 0))?;
    write_observations_file(&obs, out)?;
    let a0_path = args.a0_out.clone().unwrap_or_else(|| sibling(out, "a0.txt"));
    std::fs::write(a0_path, write_matrix_text(&a0))?;
    Ok(())
}
