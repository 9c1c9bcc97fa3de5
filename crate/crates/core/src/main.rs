use std::path::PathBuf;
use std::process::ExitCode;

use bilinear_monotonic::cli::{self, CheckOptions, Suite, SweepSpec, EXIT_ERROR};
use clap::{Parser, Subcommand, ValueEnum};

/// Monotonic (delta, eta) optimal control for bilinear systems.
///
/// Configs are JSON; complex numbers are written as [re, im] pairs and complex
/// matrices as arrays of rows. Outputs go to --out, else the config's "output",
/// else $BIMONO_OUTPUT_ROOT/<config name> (default root ./bimono-out).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme; writes convergence.csv, final_control.csv, summary.json.
    /// Exit 0 converged, 2 iteration budget exhausted, 1 error.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cartesian sweep over delta, eta and alpha; one subdirectory per run plus sweep_summary.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a diagnostic suite on the configured model; exit 1 on any failure.
    Check {
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Random trials for the estimates suite.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Iterations per resolution for the identity suite.
        #[arg(long, default_value_t = 8)]
        iterations: usize,
    },
    /// Fit the convergence regime of a convergence.csv and print it as JSON.
    FitRate {
        log: PathBuf,
        /// Fit the Lojasiewicz exponent from gradient norms instead.
        #[arg(long)]
        lojasiewicz: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Grad,
    Estimates,
    Identity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let result = match cli.command {
        Command::Run { config, out: dir } => cli::cmd_run(&config, dir.as_deref(), &mut out),
        Command::Sweep {
            config,
            delta,
            eta,
            alpha,
            jobs,
            out: dir,
        } => {
            let spec = SweepSpec {
                deltas: delta,
                etas: eta,
                alphas: alpha,
                jobs,
            };
            cli::cmd_sweep(&config, &spec, dir.as_deref(), &mut out)
        }
        Command::Check {
            config,
            suite,
            trials,
            seed,
            iterations,
        } => {
            let suite = match suite {
                SuiteArg::Grad => Suite::Grad,
                SuiteArg::Estimates => Suite::Estimates,
                SuiteArg::Identity => Suite::Identity,
            };
            let options = CheckOptions {
                suite,
                trials,
                seed,
                iterations,
            };
            cli::cmd_check(&config, &options, &mut out)
        }
        Command::FitRate { log, lojasiewicz } => cli::cmd_fit_rate(&log, lojasiewicz, &mut out),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    });
    ExitCode::from(code as u8)
}
