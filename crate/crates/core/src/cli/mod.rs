//! Batch front end: JSON configs, runs, parameter sweeps, diagnostic suites and rate fits.
//!
//! Exit codes: [`EXIT_OK`] converged or check passed, [`EXIT_MAX_ITER`] iteration budget
//! exhausted, [`EXIT_ERROR`] invalid input, I/O failure or failed check.

mod commands;
pub mod config;

pub use commands::{
    check, cmd_check, cmd_fit_rate, cmd_run, cmd_sweep, output_root, report_hash, resolve_output_dir, run_prepared,
    sweep, sweep_dir_name, write_run_outputs, CheckOptions, CheckOutcome, RunOutcome, Suite, SweepRow, SweepSpec,
    CONVERGENCE_CSV, FINAL_CONTROL_CSV, GRAD_MIN_RATIO, GRAD_TOL, SUMMARY_JSON, SWEEP_SUMMARY_CSV,
};
pub use config::{load_config, parse_config, prepare, prepare_file, Prepared, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;

/// Environment variable naming the default output root (default `./bimono-out`).
pub const OUTPUT_ROOT_ENV: &str = "BIMONO_OUTPUT_ROOT";
