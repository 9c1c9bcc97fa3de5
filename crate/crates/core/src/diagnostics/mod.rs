//! Numerical certification of the analytic claims: convergence-rate and
//! Lojasiewicz-exponent fits, batch verification of the perturbation and
//! gradient estimates, finite-difference gradient checks, and the observed
//! order of the monotonicity identity.

mod estimates;
mod gradcheck;
mod identity;
mod rate;

pub use estimates::{
    check_gradient_estimate, check_perturbation_estimates, default_slack, trial_seed, verify_estimates,
    EstimateCheck, EstimateConfig, EstimateReport, Inequality, InequalitySummary, Violation,
};
pub use gradcheck::{
    check_gradient, directional_derivative, GradientCheckConfig, GradientCheckReport, GradientCheckRow, Refinement,
};
pub use identity::{identity_order, IdentityOrder};
pub use rate::{
    fit_delta, fit_lojasiewicz, fit_rate, linear_fit, write_rate_csv, DeltaSequence, RateFit, Regime, MIN_RECORDS,
    NOISE_FLOOR, TRANSIENT_FRACTION,
};

use crate::scheme::RunLog;

/// Largest `||eps^{k'} - eps^{k-1}|| - Delta^k` over stored snapshots; `<= 0` when the
/// tail sums bound every later distance. Needs a run with `keep_history`.
pub fn delta_bound_excess(log: &RunLog) -> Option<f64> {
    if log.history.len() != log.records.len() + 1 {
        return None;
    }
    let delta = DeltaSequence::from_records(&log.records);
    let mut worst = f64::NEG_INFINITY;
    for (i, d) in delta.values().iter().enumerate() {
        // record i is iteration k = i + 1; its tail bounds distances from eps^{k-1} = history[i]
        for later in &log.history[i + 1..] {
            worst = worst.max(later.distance_l2(&log.history[i]) - d);
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::model::{ControlField, TimeGrid};
    use crate::scheme::{run_monotonic_with, RunOptions, SchemeParams};

    #[test]
    fn tail_sums_bound_stored_distances() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let m = instances::two_level(1.0, 0.4, g).unwrap();
        let p = SchemeParams::new(0.7, 0.7).unwrap().with_max_iter(25).with_tolerances(0.0, 0.0);
        let opts = RunOptions {
            keep_history: true,
            ..RunOptions::default()
        };
        let log = run_monotonic_with(&m, &p, &ControlField::constant(g, 1.0), &opts).unwrap();
        assert!(delta_bound_excess(&log).unwrap() <= 1e-14);
    }
}
