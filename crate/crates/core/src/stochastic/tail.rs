use rayon::prelude::*;
use serde::Serialize;

use super::{completion_failure_factor, completion_m_bound, compute_m, CompletionNoise};
use crate::designs::{generate_ground_truth, sample_observations_with, Design, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, DenseMatrix};
use crate::rng::{derive_seed, trial_rng};

/// Which closed-form bound a tail experiment is checked against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailBound {
    Learning { eta: f64 },
    GaussianSubexp { sigma: f64, a: f64, alpha: f64, c: f64 },
}

impl TailBound {
    fn as_noise(&self) -> CompletionNoise<f64> {
        match *self {
            TailBound::Learning { eta } => CompletionNoise::Learning { eta },
            TailBound::GaussianSubexp { sigma, a, alpha, c } => CompletionNoise::GaussianSubexp { sigma, a, alpha, c },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailBound::Learning { .. } => "learning",
            TailBound::GaussianSubexp { .. } => "gaussian_subexp",
        }
    }
}

/// A uniform-completion experiment: fixed `A0` of the given rank and entry bound, fresh samples per trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TailScenario {
    pub name: String,
    pub m1: usize,
    pub m2: usize,
    pub n: usize,
    /// `0` uses `A0 = 0`.
    pub rank: usize,
    pub a: f64,
    pub noise: NoiseModel<f64>,
    pub bound: TailBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub trials: usize,
    pub t: f64,
    pub bound_kind: String,
    pub exceed_count: usize,
    pub exceed_frac: f64,
    pub target: f64,
    #[serde(skip)]
    pub bound: f64,
    #[serde(skip)]
    pub norms: Vec<f64>,
}

/// Counts trials with `‖M‖_∞` above the closed-form bound at level `t`.
pub fn tail_verify(scenario: &TailScenario, trials: usize, t: f64, seed: u64) -> Result<CoverageReport> {
    if trials < 100 {
        return Err(Error::invalid(format!("need at least 100 trials, got {trials}")));
    }
    let (m1, m2, n) = (scenario.m1, scenario.m2, scenario.n);
    let bound = completion_m_bound(&scenario.bound.as_noise(), m1, m2, n, t)?;
    let a0 = if scenario.rank == 0 {
        DenseMatrix::zeros(m1, m2)
    } else {
        generate_ground_truth(m1, m2, scenario.rank, scenario.a, derive_seed(seed, u64::MAX))?
    };
    let design = Design::usr(m1, m2);
    let norms: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let obs = sample_observations_with(&a0, &design, &scenario.noise, n, &mut rng)?;
            operator_norm(&compute_m(&obs, &a0)?)
        })
        .collect::<Result<_>>()?;
    let exceed_count = norms.iter().filter(|&&x| x > bound).count();
    Ok(CoverageReport {
        scenario: scenario.name.clone(),
        trials,
        t,
        bound_kind: scenario.bound.name().to_string(),
        exceed_count,
        exceed_frac: exceed_count as f64 / trials as f64,
        target: completion_failure_factor(&scenario.bound.as_noise()) * (-t).exp(),
        bound,
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn learning(rank: usize, noise: NoiseModel<f64>) -> TailScenario {
        TailScenario {
            name: "learning".into(),
            m1: 10,
            m2: 12,
            n: 400,
            rank,
            a: 0.5,
            noise,
            bound: TailBound::Learning { eta: 1.0 },
        }
    }

    #[test]
    fn learning_coverage_is_conservative() {
        let rep = tail_verify(&learning(2, NoiseModel::BoundedSign { eta: 1.0 }), 300, 2.0, 1).unwrap();
        assert!(rep.exceed_frac <= rep.target);
        assert!((rep.target - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exceedance_nonincreasing_in_t() {
        let sc = learning(2, NoiseModel::BoundedSign { eta: 1.0 });
        let lo = tail_verify(&sc, 200, 0.1, 5).unwrap();
        let hi = tail_verify(&sc, 200, 5.0, 5).unwrap();
        assert!(hi.exceed_count <= lo.exceed_count);
        assert!(hi.bound > lo.bound);
    }

    #[test]
    fn noiseless_zero_truth_never_exceeds() {
        let rep = tail_verify(&learning(0, NoiseModel::None), 100, 0.5, 2).unwrap();
        assert_eq!(rep.exceed_count, 0);
        assert!(rep.norms.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(tail_verify(&learning(0, NoiseModel::None), 99, 0.5, 2).is_err());
    }

    #[test]
    fn report_json_fields() {
        let rep = tail_verify(&learning(0, NoiseModel::None), 100, 0.5, 2).unwrap();
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 7);
        for k in [
            "scenario",
            "trials",
            "t",
            "bound_kind",
            "exceed_count",
            "exceed_frac",
            "target",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
