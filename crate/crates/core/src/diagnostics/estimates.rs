//! Batch verification of the perturbation and gradient estimates on seeded random inputs.
//!
//! Three inequalities are checked, each with an additive slack
//! `slack_factor * dt * instance_scale` for the time discretization:
//!
//! - `estimp`:    `sup_t ||psi'(t)|| <= 2 ||mu|| ||deps||_{L1} sup_t ||psi(t)||`
//! - `estimadj2`: `sup_t ||chi'(t)|| <= 4 ||mu|| ||O|| ||deps||_{L1}` (unit `psi0`)
//! - `estnab`:    `||grad J(eps^k)||_{L1} <= lambda (n_fwd + n_bwd)` along a monotonic run

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances;
use crate::model::{instance_scale, BilinearModel, ControlField};
use crate::propagate::{adjoint_with, forward_with, linearized_adjoint_with, linearized_with, Propagators};
use crate::scheme::{gradient_bound_lambda, run_monotonic, RunLog, SchemeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Estimp,
    Estimadj2,
    Estnab,
}

impl Inequality {
    pub const ALL: [Inequality; 3] = [Inequality::Estimp, Inequality::Estimadj2, Inequality::Estnab];
}

/// One evaluated inequality `lhs <= rhs + slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl EstimateCheck {
    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + self.slack
    }

    /// `rhs + slack - lhs`; negative means violated.
    pub fn margin(&self) -> f64 {
        self.rhs + self.slack - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub trials: usize,
    pub seed: u64,
    /// Multiplies `dt * instance_scale`.
    pub slack_factor: f64,
    /// Amplitude of the random base control.
    pub amplitude: f64,
    /// Iterations of the monotonic run scanned by `estnab`.
    pub run_iterations: usize,
    pub delta: f64,
    pub eta: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            trials: 50,
            seed: 0,
            slack_factor: 10.0,
            amplitude: 1.0,
            run_iterations: 20,
            delta: 1.0,
            eta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySummary {
    pub inequality: Inequality,
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    /// Smallest `rhs + slack - lhs` seen.
    pub worst_margin: f64,
    /// Largest `lhs / rhs` seen (ignoring `rhs = 0`).
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub trial: usize,
    pub trial_seed: u64,
    /// Iteration index for `estnab`.
    pub iteration: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config: EstimateConfig,
    pub slack: f64,
    pub lambda: f64,
    pub summaries: Vec<InequalitySummary>,
    pub violations: Vec<Violation>,
}

impl EstimateReport {
    pub fn all_passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self, which: Inequality) -> Option<&InequalitySummary> {
        self.summaries.iter().find(|s| s.inequality == which)
    }
}

/// Per-trial seed derived from the batch seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn default_slack<M: BilinearModel + ?Sized>(model: &M, factor: f64) -> f64 {
    factor * model.grid().dt() * instance_scale(model)
}

/// `estimp` and `estimadj2` for one control and perturbation.
pub fn check_perturbation_estimates<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    deps: &ControlField,
    slack: f64,
) -> Result<[EstimateCheck; 2]> {
    deps.ensure_on(model.grid())?;
    let props = Propagators::build(model, eps)?;
    let psi = forward_with(model, &props);
    let chi = adjoint_with(model, &props, model.apply_observable(psi.terminal()));
    let psi_lin = linearized_with(model, &props, deps, &psi);
    let chi_lin = linearized_adjoint_with(model, &props, deps, &chi, model.apply_observable(psi_lin.terminal()));

    let mu = model.coupling_norm();
    let l1 = deps.norm_l1();
    let psi_sup = psi.sup_norm(model);
    let psi0 = model.norm(model.initial_state());
    Ok([
        EstimateCheck {
            inequality: Inequality::Estimp,
            lhs: psi_lin.sup_norm(model),
            rhs: 2.0 * mu * l1 * psi_sup,
            slack,
        },
        EstimateCheck {
            inequality: Inequality::Estimadj2,
            lhs: chi_lin.sup_norm(model),
            rhs: 4.0 * mu * model.observable_norm() * l1 * psi0 * psi0,
            slack,
        },
    ])
}

/// `estnab` for every record of a run.
pub fn check_gradient_estimate(log: &RunLog, lambda: f64, slack: f64) -> Vec<EstimateCheck> {
    log.records
        .iter()
        .map(|r| EstimateCheck {
            inequality: Inequality::Estnab,
            lhs: r.grad_l1,
            rhs: lambda * (r.n_fwd + r.n_bwd),
            slack,
        })
        .collect()
}

/// Runs `config.trials` seeded trials on `model`, in parallel; the report does not
/// depend on the thread count.
pub fn verify_estimates<M: BilinearModel + ?Sized>(model: &M, config: &EstimateConfig) -> Result<EstimateReport> {
    if config.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !model.is_unitary() {
        return Err(Error::invalid(
            "model",
            "the estimates assume norm-preserving dynamics; this model is not unitary",
        ));
    }
    let params = SchemeParams::new(config.delta, config.eta)?
        .with_max_iter(config.run_iterations.max(1))
        .with_tolerances(0.0, 0.0);
    let slack = default_slack(model, config.slack_factor);
    let lambda = gradient_bound_lambda(model, &params);
    let grid = *model.grid();

    let per_trial: Vec<Vec<(usize, Option<usize>, EstimateCheck)>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = instances::rng(trial_seed(config.seed, trial));
            let eps = instances::random_smooth_control(&mut rng, grid, config.amplitude);
            let deps = instances::random_rough_control(&mut rng, grid, config.amplitude);
            let mut out: Vec<_> = check_perturbation_estimates(model, &eps, &deps, slack)?
                .into_iter()
                .map(|c| (trial, None, c))
                .collect();
            let log = run_monotonic(model, &params, &eps)?;
            out.extend(
                check_gradient_estimate(&log, lambda, slack)
                    .into_iter()
                    .zip(&log.records)
                    .map(|(c, r)| (trial, Some(r.k), c)),
            );
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut summaries: Vec<InequalitySummary> = Inequality::ALL
        .iter()
        .map(|&inequality| InequalitySummary {
            inequality,
            checked: 0,
            passed: 0,
            failed: 0,
            worst_margin: f64::INFINITY,
            worst_ratio: 0.0,
        })
        .collect();
    let mut violations = Vec::new();
    for (trial, iteration, check) in per_trial.into_iter().flatten() {
        let s = summaries
            .iter_mut()
            .find(|s| s.inequality == check.inequality)
            .expect("summary per inequality");
        s.checked += 1;
        s.worst_margin = s.worst_margin.min(check.margin());
        if check.rhs > 0.0 {
            s.worst_ratio = s.worst_ratio.max(check.lhs / check.rhs);
        }
        if check.passed() {
            s.passed += 1;
        } else {
            s.failed += 1;
            violations.push(Violation {
                inequality: check.inequality,
                trial,
                trial_seed: trial_seed(config.seed, trial),
                iteration,
                lhs: check.lhs,
                rhs: check.rhs,
                slack: check.slack,
            });
        }
    }
    Ok(EstimateReport {
        config: *config,
        slack,
        lambda,
        summaries,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;

    #[test]
    fn zero_perturbation_is_trivially_bounded() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let m = instances::two_level(1.0, 1.0, g).unwrap();
        let mut r = instances::rng(1);
        let eps = instances::random_smooth_control(&mut r, g, 1.0);
        for c in check_perturbation_estimates(&m, &eps, &ControlField::zeros(g), 0.0).unwrap() {
            assert_eq!(c.lhs, 0.0);
            assert_eq!(c.rhs, 0.0);
            assert!(c.passed());
        }
    }

    #[test]
    fn small_batch_passes_and_is_reproducible() {
        let g = TimeGrid::new(1.0, 200).unwrap();
        let mut r = instances::rng(5);
        let m = instances::random_nlevel(&mut r, 3, 0.5, g).unwrap();
        let cfg = EstimateConfig {
            trials: 6,
            seed: 11,
            run_iterations: 8,
            ..EstimateConfig::default()
        };
        let a = verify_estimates(&m, &cfg).unwrap();
        assert!(a.all_passed(), "{:?}", a.violations);
        assert_eq!(a.summary(Inequality::Estimp).unwrap().checked, 6);
        assert_eq!(a.summary(Inequality::Estnab).unwrap().checked, 48);
        let b = verify_estimates(&m, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn violations_are_reported() {
        let c = EstimateCheck {
            inequality: Inequality::Estimp,
            lhs: 2.0,
            rhs: 1.0,
            slack: 0.5,
        };
        assert!(!c.passed());
        assert_eq!(c.margin(), -0.5);
    }

    #[test]
    fn rejects_zero_trials_and_non_unitary_models() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = instances::two_level(1.0, 1.0, g).unwrap();
        let cfg = EstimateConfig {
            trials: 0,
            ..EstimateConfig::default()
        };
        assert!(verify_estimates(&m, &cfg).is_err());
        let mut r = instances::rng(2);
        let ode = instances::random_real_ode(&mut r, 3, 1.0, g).unwrap();
        assert!(verify_estimates(&ode, &EstimateConfig::default()).is_err());
    }
}
