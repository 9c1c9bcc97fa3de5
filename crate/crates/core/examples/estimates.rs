//! Batch verification of the perturbation estimates and of the gradient bound
//! `||grad J(eps^k)||_{L1} <= lambda (n_fwd + n_bwd)` on seeded random controls.

use bilinear_monotonic::diagnostics::{verify_estimates, EstimateConfig};
use bilinear_monotonic::instances;
use bilinear_monotonic::TimeGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(1.0, 200)?;
    let mut rng = instances::rng(12);
    let model = instances::random_nlevel(&mut rng, 4, 0.5, grid)?;

    let config = EstimateConfig {
        trials: 50,
        seed: 99,
        delta: 0.7,
        eta: 1.2,
        ..EstimateConfig::default()
    };
    let report = verify_estimates(&model, &config)?;
    println!("lambda = {:.4}, slack = {:.3e}", report.lambda, report.slack);
    println!("{:>10} {:>8} {:>8} {:>12} {:>10}", "estimate", "checked", "failed", "worst margin", "max l/r");
    for s in &report.summaries {
        println!(
            "{:>10} {:>8} {:>8} {:>12.4e} {:>10.4}",
            format!("{:?}", s.inequality).to_lowercase(),
            s.checked,
            s.failed,
            s.worst_margin,
            s.worst_ratio
        );
    }
    for v in report.violations.iter().take(5) {
        println!("violation: {v:?}");
    }
    println!("{}", if report.all_passed() { "all passed" } else { "violations found" });
    Ok(())
}
