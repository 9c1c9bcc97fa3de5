//! Runs a JSON config exactly as `bimono run` does, then re-reads the telemetry it wrote.
//!
//! `cargo run --release --example config_run -- examples/configs/wavepacket.json`

use std::fs::File;
use std::path::PathBuf;

use bilinear_monotonic::cli::{output_root, prepare_file, run_prepared, CONVERGENCE_CSV};
use bilinear_monotonic::diagnostics::fit_rate;
use bilinear_monotonic::scheme::read_convergence_csv;
use bilinear_monotonic::BilinearModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/real_ode.json"))
    });
    let prepared = prepare_file(&path)?;
    println!(
        "{} model, dim {}, {} steps, alpha {}",
        prepared.model.kind(),
        prepared.model.dim(),
        prepared.model.grid().intervals(),
        prepared.model.alpha()
    );
    let dir = output_root().join(path.file_stem().unwrap_or_default());
    let outcome = run_prepared(&prepared, &dir)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);

    let records = read_convergence_csv(File::open(dir.join(CONVERGENCE_CSV))?)?;
    let fit = fit_rate(&records);
    println!("rate regime from {} records: {:?}", records.len(), fit.regime);
    Ok(())
}
