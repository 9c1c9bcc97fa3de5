//! A (delta, eta, alpha) sweep through the batch front end, on four threads.
//! Each combination gets its own output directory; the table is printed and
//! written as `sweep_summary.csv`.

use bilinear_monotonic::cli::{output_root, prepare_file, sweep, SweepSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/two_level.json");
    let prepared = prepare_file(config.as_ref())?;
    let spec = SweepSpec {
        deltas: vec![0.5, 1.0, 1.5],
        etas: vec![0.0, 1.0],
        alphas: vec![0.1, 1.0],
        jobs: 4,
    };
    let dir = output_root().join("sweep_example");
    let rows = sweep(&prepared, &spec, &dir)?;
    println!("{:>6} {:>5} {:>6} {:>12} {:>6} {:>12} {:>7}", "delta", "eta", "alpha", "final J", "iters", "regime", "theta");
    for r in &rows {
        println!(
            "{:>6} {:>5} {:>6} {:>12.8} {:>6} {:>12} {:>7}",
            r.delta,
            r.eta,
            r.alpha,
            r.final_j.unwrap_or(f64::NAN),
            r.iterations.unwrap_or(0),
            r.regime.map_or("-".into(), |g| format!("{g:?}").to_lowercase()),
            r.theta_hat.map_or("-".into(), |t| format!("{t:.3}"))
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}
