//! The real bilinear ODE `y' = (A + v B) y` with the Krotov member (delta, eta) = (1, 0):
//! every iteration satisfies `dJ = dy(T).C dy(T) + alpha ||dv||^2` up to O(dt^2).

use bilinear_monotonic::instances;
use bilinear_monotonic::model::RealOdeModel;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::{BilinearModel, TimeGrid};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(2.0, 400)?;
    // rotation about z as drift, rotation about x as control; maximize y_z(T)^2
    let a = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    let c = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0]));
    let y0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let model = RealOdeModel::new(a, b, c, y0, 0.5, grid)?;
    let mut rng = instances::rng(2);
    let v0 = instances::random_smooth_control(&mut rng, grid, 0.3);

    let params = SchemeParams::krotov(1.0)?.with_max_iter(60).with_tolerances(1e-12, 0.0);
    let log = run_monotonic(&model, &params, &v0)?;
    println!("{:>4} {:>12} {:>12} {:>14} {:>10}", "k", "J", "dJ", "dy.C dy + a dv", "residual");
    for r in &log.records {
        let rhs = r.terminal_term + model.alpha() * r.n_fwd * r.n_fwd;
        println!("{:>4} {:>12.8} {:>12.4e} {:>14.4e} {:>10.2e}", r.k, r.j, r.dj, rhs, (r.dj - rhs).abs());
    }
    Ok(())
}
