//! Second-order information at a converged control: Hessian-vector products from
//! the linearized state and costate, a power iteration for the extreme curvature,
//! and the criticality residual.

use bilinear_monotonic::functional::{critical_residual, evaluate, hessian_invertibility_margin, hessian_vector_with};
use bilinear_monotonic::instances;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::{ControlField, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(3.0, 300)?;
    let model = instances::two_level(1.0, 0.1, grid)?;
    let params = SchemeParams::zhu_rabitz().with_tolerances(0.0, 1e-11).with_max_iter(5000);
    let log = run_monotonic(&model, &params, &ControlField::constant(grid, 0.5))?;
    let star = &log.final_eps;
    let crit = critical_residual(&model, star)?;
    println!(
        "J* = {:.8}, critical residual {:.2e} (critical: {})",
        log.final_j(),
        crit.residual_l2,
        crit.is_critical
    );

    // largest |eigenvalue| of the Hessian at eps*; negative means a local maximum direction
    let eval = evaluate(&model, star)?;
    let mut rng = instances::rng(5);
    let mut v = instances::random_direction(&mut rng, grid);
    let mut rayleigh = 0.0;
    for _ in 0..60 {
        let hv = hessian_vector_with(&model, &eval, &v);
        rayleigh = v.inner(&hv);
        v = hv.scaled(1.0 / hv.norm_l2());
    }
    println!("dominant Hessian eigenvalue ~ {rayleigh:.5} (penalty alone gives {:.5})", -2.0 * 0.1);
    println!("invertibility margin alpha - 6T|mu|^2|O| = {:.3}", hessian_invertibility_margin(&model));
    Ok(())
}
