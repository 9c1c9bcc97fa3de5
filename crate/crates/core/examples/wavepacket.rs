//! Steering a Gaussian packet across a harmonic well on a 1D grid
//! (Crank-Nicolson propagation), then writing the optimized field and the
//! position expectation along the optimized trajectory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use bilinear_monotonic::cli::output_root;
use bilinear_monotonic::functional::write_field_csv;
use bilinear_monotonic::instances;
use bilinear_monotonic::propagate::propagate_forward;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::{BilinearModel, ControlField, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(3.0, 300)?;
    // 128 points on [-8, 8], packet from x = -1.5 to x = +1.5
    let model = instances::harmonic_grid(128, 8.0, 1.5, 0.02, grid)?;
    let params = SchemeParams::zhu_rabitz().with_tolerances(1e-10, 1e-8).with_max_iter(300);
    let log = run_monotonic(&model, &params, &ControlField::zeros(grid))?;
    println!(
        "overlap with target: {:.4} -> {:.4} in {} iterations",
        log.initial_j,
        log.final_j() + model.alpha() * log.final_eps.norm_l2().powi(2),
        log.iterations()
    );

    let psi = propagate_forward(&model, &log.final_eps)?;
    let xs = model.positions();
    let dx = model.dx();
    let dir = output_root().join("wavepacket");
    fs::create_dir_all(&dir)?;
    write_field_csv(&log.final_eps, "eps", BufWriter::new(File::create(dir.join("field.csv"))?))?;
    let mut w = BufWriter::new(File::create(dir.join("position.csv"))?);
    writeln!(w, "t,x_mean")?;
    for (j, s) in psi.nodes().iter().enumerate() {
        let mean: f64 = s.iter().zip(&xs).map(|(a, x)| a.norm_sqr() * x).sum::<f64>() * dx;
        writeln!(w, "{},{}", grid.node(j), mean)?;
    }
    w.flush()?;
    println!("wrote {}", dir.display());
    Ok(())
}
