//! Convergence-rate diagnostics on a run above the uniqueness threshold:
//! the tail sums `Delta^k` decay exponentially, so the Lojasiewicz exponent is 1/2.
//! Writes the fitted sequence to `<output root>/rate_fit/rate.csv`.

use std::fs::{self, File};

use bilinear_monotonic::cli::output_root;
use bilinear_monotonic::diagnostics::{fit_delta, fit_lojasiewicz, fit_rate, write_rate_csv, DeltaSequence};
use bilinear_monotonic::instances;
use bilinear_monotonic::model::uniqueness_threshold;
use bilinear_monotonic::scheme::{run_monotonic, SchemeParams};
use bilinear_monotonic::{BilinearModel, ControlField, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(1.0, 200)?;
    let mut rng = instances::rng(9);
    let base = instances::random_nlevel(&mut rng, 4, 1.0, grid)?;
    let model = base.with_alpha(1.5 * uniqueness_threshold(&base))?;

    // small relaxation: more iterations above roundoff to fit
    let params = SchemeParams::new(0.2, 0.2)?.with_tolerances(0.0, 1e-11).with_max_iter(2000);
    let log = run_monotonic(&model, &params, &ControlField::constant(grid, 0.5))?;
    println!("{} iterations, final |grad J| = {:.2e}", log.iterations(), log.records.last().unwrap().grad_residual);

    let fit = fit_rate(&log.records);
    println!(
        "Delta^k fit: {:?}, tau = {:.4}, theta = {:.3}, r^2 = {:.6}, window {:?}",
        fit.regime,
        fit.tau_hat.unwrap_or(f64::NAN),
        fit.theta_hat.unwrap_or(f64::NAN),
        fit.r_squared,
        fit.window
    );
    let loja = fit_lojasiewicz(&log.records, log.final_j());
    println!(
        "gradient fit: theta = {:.3}, r^2 = {:.6}",
        loja.theta_hat.unwrap_or(f64::NAN),
        loja.r_squared
    );

    // a synthetic algebraic tail for contrast: Delta^k ~ k^-2, so theta = 2/5
    let ks: Vec<usize> = (1..=200).collect();
    let values = ks.iter().map(|&k| (k as f64).powi(-2)).collect();
    let slow = fit_delta(&DeltaSequence::from_values(ks, values), false);
    println!(
        "synthetic k^-2: {:?}, p = {:.3}, theta = {:.3}",
        slow.regime,
        slow.power.unwrap_or(f64::NAN),
        slow.theta_hat.unwrap_or(f64::NAN)
    );

    let dir = output_root().join("rate_fit");
    fs::create_dir_all(&dir)?;
    let path = dir.join("rate.csv");
    write_rate_csv(&DeltaSequence::from_records(&log.records), &fit, File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
