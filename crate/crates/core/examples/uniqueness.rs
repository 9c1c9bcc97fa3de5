//! Above `alpha = 6 T ||mu||^2 ||O||` the critical set is a single point: runs from
//! different starting controls reach the same limit. Below it they need not.

use bilinear_monotonic::functional::{critical_residual, hessian_invertibility_margin};
use bilinear_monotonic::instances;
use bilinear_monotonic::model::uniqueness_threshold;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::{BilinearModel, ControlField, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(4.0, 400)?;
    let mut rng = instances::rng(21);
    let base = instances::random_nlevel(&mut rng, 3, 1.0, grid)?;
    let threshold = uniqueness_threshold(&base);
    println!("uniqueness threshold = {threshold:.3}");

    let starts = [
        ControlField::constant(grid, 1.0),
        ControlField::constant(grid, -1.0),
        ControlField::from_fn(grid, |t| 2.0 * (3.0 * t).sin())?,
    ];
    for factor in [1.5, 0.002] {
        let model = base.with_alpha(factor * threshold)?;
        let params = SchemeParams::new(0.5, 0.5)?.with_tolerances(0.0, 1e-10).with_max_iter(3000);
        let limits = starts
            .iter()
            .map(|e0| run_monotonic(&model, &params, e0))
            .collect::<Result<Vec<_>, _>>()?;
        println!(
            "\nalpha = {:.4} (margin {:+.3})",
            model.alpha(),
            hessian_invertibility_margin(&model)
        );
        for (i, log) in limits.iter().enumerate() {
            let crit = critical_residual(&model, &log.final_eps)?;
            println!(
                "  start {i}: J = {:.8}, iterations {:>4}, critical residual {:.2e}",
                log.final_j(),
                log.iterations(),
                crit.residual_l2
            );
        }
        for i in 1..limits.len() {
            println!(
                "  ||eps_0 - eps_{i}|| = {:.3e}",
                limits[0].final_eps.distance_l2(&limits[i].final_eps)
            );
        }
    }
    Ok(())
}
