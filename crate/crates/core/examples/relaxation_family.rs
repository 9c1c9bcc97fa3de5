//! The (delta, eta) family on one problem: Krotov (1, 0), Zhu-Rabitz (1, 1),
//! under- and over-relaxed sweeps, and the degenerate corner (2, 2).
//!
//! Each row reports how well the monotonicity identity
//! `dJ = <dpsi(T)|O|dpsi(T)> + alpha (2/delta - 1) n_fwd^2 + alpha (2/eta - 1) n_bwd^2`
//! holds along the run.
//!
//! At (2, 2) both updates are reflections; starting from the backward-sweep `eps~^0`
//! they cancel and the iteration stays put after one step.

use bilinear_monotonic::instances;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::TimeGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(6.0, 600)?;
    let model = instances::ladder(3, 0.05, grid)?;
    let mut rng = instances::rng(4);
    let eps0 = instances::random_smooth_control(&mut rng, grid, 0.8);

    println!(
        "{:>6} {:>6} {:>6} {:>12} {:>12} {:>12}",
        "delta", "eta", "iters", "J", "min dJ", "max resid"
    );
    for (delta, eta) in [(1.0, 0.0), (1.0, 1.0), (0.5, 0.5), (1.5, 1.5), (1.0, 1.8), (2.0, 2.0)] {
        let params = SchemeParams::new(delta, eta)?.with_max_iter(200).with_tolerances(0.0, 1e-9);
        let log = run_monotonic(&model, &params, &eps0)?;
        let min_dj = log.records.iter().map(|r| r.dj).fold(f64::INFINITY, f64::min);
        println!(
            "{delta:>6} {eta:>6} {:>6} {:>12.8} {:>12.3e} {:>12.3e}",
            log.iterations(),
            log.final_j(),
            min_dj,
            log.max_identity_residual()
        );
    }
    Ok(())
}
