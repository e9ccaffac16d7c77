use serde::Serialize;
use tracereg::designs::Design;
use tracereg::linalg::svd;
use tracereg::lowerbound::{build_packing, pairwise_difference_ranks, solve_gamma, PackingConfig, PackingScale};

use super::{print_json, require_out, CHECK_SLACK};
use crate::args::{NoiseKind, PackingArgs};
use crate::error::{invalid, CliError, CliResult};

#[derive(Serialize)]
struct PackingReport {
    cardinality: usize,
    target_cardinality: usize,
    amplitude: f64,
    gamma: f64,
    min_pairwise_hamming: u32,
    required_hamming: u32,
    min_pairwise_frob_sq: f64,
    separation_bound: f64,
    max_rank: usize,
    max_difference_rank: usize,
    mean_kl: f64,
    kl_budget: f64,
    attempts: usize,
    passed: bool,
}

pub fn cmd_packing(args: &PackingArgs) -> CliResult<()> {
    let exp = &args.exp;
    let dir = require_out(exp)?;
    let scale = match exp.noise {
        NoiseKind::Gaussian => PackingScale::Gaussian {
            sigma: exp.sigma,
            a: exp.a,
        },
        NoiseKind::Bounded => PackingScale::Bounded { eta: exp.eta },
        other => {
            return Err(invalid(format!(
                "packing supports gaussian or bounded noise, not {other:?}"
            )))
        }
    };
    let (m1, m2, r) = (exp.m1, exp.m2, exp.rank);
    // The tiles do not depend on γ, so they are drawn at a provisional admissible value.
    let mut cfg = PackingConfig::completion(m1, m2, r, exp.n, 1.0, scale);
    cfg.gamma = args.gamma.unwrap_or_else(|| cfg.max_gamma());
    let design = Design::usr(m1, m2);
    let mut packing = build_packing(&cfg, exp.seed, args.max_attempts)?;
    if args.gamma.is_none() {
        packing = solve_gamma(&packing, &design, args.kl_alpha)?;
    }
    let cfg = packing.config;
    let mats = packing.matrices();
    let amp = packing.amplitude();

    // Exhaustive checks, independent of the summary statistics kept on the packing.
    let mut min_frob = f64::INFINITY;
    let mut min_ham = u32::MAX;
    for (k, a) in mats.iter().enumerate() {
        for (l, b) in mats.iter().enumerate().skip(k + 1) {
            min_frob = min_frob.min(a.sub(b)?.frobenius_sq());
            min_ham = min_ham.min((packing.tiles[k] ^ packing.tiles[l]).count_ones());
        }
    }
    let mut max_rank = 0;
    for a in &mats {
        max_rank = max_rank.max(svd(a)?.numerical_rank());
    }
    let entry_cap = match scale {
        PackingScale::Gaussian { a, .. } => a,
        PackingScale::Bounded { eta } => eta / 2.0,
    };
    let entries_ok = mats.iter().all(|a| a.as_slice().iter().all(|&v| v == 0.0 || v == amp)) && amp <= entry_cap;
    let max_difference_rank = pairwise_difference_ranks(&mats)?.into_iter().max().unwrap_or(0);
    let card = packing.cardinality();
    let mean_kl = if card > 1 { packing.mean_kl(&design)? } else { 0.0 };
    let kl_budget = if card > 2 {
        args.kl_alpha * ((card - 1) as f64).ln()
    } else {
        0.0
    };

    let report = PackingReport {
        cardinality: card,
        target_cardinality: cfg.target_cardinality(),
        amplitude: amp,
        gamma: cfg.gamma,
        min_pairwise_hamming: min_ham,
        required_hamming: cfg.min_hamming(),
        min_pairwise_frob_sq: min_frob,
        separation_bound: cfg.separation_bound(),
        max_rank,
        max_difference_rank,
        mean_kl,
        kl_budget,
        attempts: packing.attempts,
        passed: card >= cfg.target_cardinality()
            && min_ham >= cfg.min_hamming()
            && min_frob >= cfg.separation_bound() * (1.0 - CHECK_SLACK)
            && max_rank <= r
            && max_difference_rank <= r
            && entries_ok
            && mean_kl <= kl_budget * (1.0 + CHECK_SLACK),
    };
    packing.write_dir(dir)?;
    print_json(&report)?;
    if !report.passed {
        return Err(CliError::Assertion(
            "packing fails a separation, rank, entry or KL requirement".into(),
        ));
    }
    Ok(())
}
