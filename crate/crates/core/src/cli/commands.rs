use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{prepare_file, Prepared};
use super::{EXIT_ERROR, EXIT_MAX_ITER, EXIT_OK, OUTPUT_ROOT_ENV};
use crate::diagnostics::{
    check_gradient, fit_lojasiewicz, fit_rate, identity_order, verify_estimates, EstimateConfig,
    GradientCheckConfig, RateFit, Regime,
};
use crate::error::{Error, Result};
use crate::model::BilinearModel;
use crate::scheme::{
    read_convergence_csv, run_monotonic, write_convergence_csv, write_final_control_csv, RunLog, RunSummary,
};

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const FINAL_CONTROL_CSV: &str = "final_control.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SWEEP_SUMMARY_CSV: &str = "sweep_summary.csv";

/// Root for outputs when neither the command line nor the config names a directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("bimono-out"))
}

/// `--out` wins; then the config's `output` (relative paths under the output root);
/// then `<output root>/<config file stem>`.
pub fn resolve_output_dir(cli_out: Option<&Path>, prepared: &Prepared, config_path: &Path) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    match &prepared.config.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(p),
            None => p.clone(),
        },
        None => {
            let stem = config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            output_root().join(stem)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `convergence.csv`, `final_control.csv` and `summary.json` into `dir`.
pub fn write_run_outputs(dir: &Path, prepared: &Prepared, log: &RunLog) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let conv = dir.join(CONVERGENCE_CSV);
    write_convergence_csv(&log.records, create(&conv)?)?;
    let ctrl = dir.join(FINAL_CONTROL_CSV);
    write_final_control_csv(&log.final_eps, &log.final_eps_tilde, create(&ctrl)?)?;
    let summary = RunSummary::new(&prepared.model, log, &prepared.eps0);
    write_json(&dir.join(SUMMARY_JSON), &summary)?;
    Ok(summary)
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub log: RunLog,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.summary.converged {
            EXIT_OK
        } else {
            EXIT_MAX_ITER
        }
    }
}

pub fn run_prepared(prepared: &Prepared, dir: &Path) -> Result<RunOutcome> {
    let log = run_monotonic(&prepared.model, &prepared.params, &prepared.eps0)?;
    let summary = write_run_outputs(dir, prepared, &log)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        log,
        summary,
    })
}

/// `run`: one monotonic run; exit 0 converged, 2 iteration budget exhausted.
pub fn cmd_run(config_path: &Path, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let prepared = prepare_file(config_path)?;
    let dir = resolve_output_dir(out_dir, &prepared, config_path);
    let outcome = run_prepared(&prepared, &dir)?;
    let s = &outcome.summary;
    let _ = writeln!(
        out,
        "{}: {} after {} iterations, J = {:.10}, grad = {}",
        dir.display(),
        s.stop_reason.as_str(),
        s.iterations,
        s.final_j,
        s.final_grad_residual.map_or("n/a".to_string(), |g| format!("{g:.3e}")),
    );
    Ok(outcome.exit_code())
}

#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub eta: f64,
    pub alpha: f64,
    #[serde(rename = "final_J")]
    pub final_j: Option<f64>,
    pub iterations: Option<usize>,
    pub regime: Option<Regime>,
    pub theta_hat: Option<f64>,
    pub stop_reason: Option<String>,
    pub error: Option<String>,
}

pub fn sweep_dir_name(delta: f64, eta: f64, alpha: f64) -> String {
    format!("delta_{delta}_eta_{eta}_alpha_{alpha}")
}

fn sweep_one(base: &Prepared, dir: &Path, delta: f64, eta: f64, alpha: f64) -> SweepRow {
    let mut row = SweepRow {
        delta,
        eta,
        alpha,
        final_j: None,
        iterations: None,
        regime: None,
        theta_hat: None,
        stop_reason: None,
        error: None,
    };
    let result = (|| -> Result<(RunOutcome, RateFit)> {
        let mut p = base.clone();
        p.params.delta = delta;
        p.params.eta = eta;
        p.params.validate()?;
        p.config.scheme.delta = delta;
        p.config.scheme.eta = eta;
        p.config.scheme.alpha = alpha;
        p.model = p.model.with_alpha(alpha)?;
        let outcome = run_prepared(&p, &dir.join(sweep_dir_name(delta, eta, alpha)))?;
        let fit = fit_rate(&outcome.log.records);
        Ok((outcome, fit))
    })();
    match result {
        Ok((outcome, fit)) => {
            row.final_j = Some(outcome.summary.final_j);
            row.iterations = Some(outcome.summary.iterations);
            row.regime = Some(fit.regime);
            row.theta_hat = fit.theta_hat;
            row.stop_reason = Some(outcome.summary.stop_reason.as_str().to_string());
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the Cartesian product of overrides (empty lists keep the config value) on
/// `jobs` threads. Rows come back in product order regardless of scheduling.
pub fn sweep(base: &Prepared, spec: &SweepSpec, dir: &Path) -> Result<Vec<SweepRow>> {
    let or_base = |v: &[f64], b: f64| if v.is_empty() { vec![b] } else { v.to_vec() };
    let deltas = or_base(&spec.deltas, base.params.delta);
    let etas = or_base(&spec.etas, base.params.eta);
    let alphas = or_base(&spec.alphas, base.model.alpha());
    let mut combos = Vec::with_capacity(deltas.len() * etas.len() * alphas.len());
    for &d in &deltas {
        for &e in &etas {
            for &a in &alphas {
                combos.push((d, e, a));
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let rows: Vec<SweepRow> =
        pool.install(|| combos.par_iter().map(|&(d, e, a)| sweep_one(base, dir, d, e, a)).collect());

    let path = dir.join(SWEEP_SUMMARY_CSV);
    let mut w = csv::Writer::from_writer(create(&path)?);
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// `sweep`: per-run failures are recorded in the summary and do not stop the sweep.
/// Exits 1 if any run failed, 2 if any hit the iteration budget, else 0.
pub fn cmd_sweep(config_path: &Path, spec: &SweepSpec, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let prepared = prepare_file(config_path)?;
    let dir = resolve_output_dir(out_dir, &prepared, config_path);
    let rows = sweep(&prepared, spec, &dir)?;
    let mut code = EXIT_OK;
    for r in &rows {
        let status = match (&r.error, r.stop_reason.as_deref()) {
            (Some(e), _) => {
                code = EXIT_ERROR;
                format!("error: {e}")
            }
            (None, Some("max_iter")) => {
                if code == EXIT_OK {
                    code = EXIT_MAX_ITER;
                }
                "max_iter".to_string()
            }
            (None, s) => s.unwrap_or("").to_string(),
        };
        let _ = writeln!(out, "delta={} eta={} alpha={}: {status}", r.delta, r.eta, r.alpha);
    }
    let _ = writeln!(out, "summary: {}", dir.join(SWEEP_SUMMARY_CSV).display());
    Ok(code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Grad,
    Estimates,
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub suite: Suite,
    pub trials: usize,
    /// Defaults to the config seed.
    pub seed: Option<u64>,
    /// Iterations per resolution for the identity suite.
    pub iterations: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            suite: Suite::Grad,
            trials: 50,
            seed: None,
            iterations: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub passed: bool,
    pub report: serde_json::Value,
    /// FNV-1a of the serialized report (estimates suite).
    pub hash: Option<u64>,
    pub observed_order: Option<f64>,
}

/// Relative gradient error tolerated by the `grad` suite.
pub const GRAD_TOL: f64 = 1e-3;
/// Minimum error reduction under `dt -> dt/2`, unless the error is already at roundoff.
pub const GRAD_MIN_RATIO: f64 = 1.8;
const ROUNDOFF: f64 = 1e-10;

pub fn report_hash(json: &str) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(json.as_bytes());
    h.finish()
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn check(prepared: &Prepared, options: &CheckOptions) -> Result<CheckOutcome> {
    let seed = options.seed.unwrap_or(prepared.config.seed);
    let model = &prepared.model;
    match options.suite {
        Suite::Grad => {
            let cfg = GradientCheckConfig {
                seed,
                ..GradientCheckConfig::default()
            };
            let rep = check_gradient(model, &prepared.eps0, &cfg)?;
            let refined_ok = rep
                .refinement
                .is_none_or(|r| r.error_coarse <= ROUNDOFF || r.ratio >= GRAD_MIN_RATIO);
            Ok(CheckOutcome {
                passed: rep.max_rel_error <= GRAD_TOL && refined_ok,
                report: to_value(&rep),
                hash: None,
                observed_order: None,
            })
        }
        Suite::Estimates => {
            let cfg = EstimateConfig {
                trials: options.trials,
                seed,
                delta: prepared.params.delta,
                eta: prepared.params.eta,
                ..EstimateConfig::default()
            };
            let rep = verify_estimates(model, &cfg)?;
            let text = serde_json::to_string(&rep).expect("reports serialize");
            Ok(CheckOutcome {
                passed: rep.all_passed(),
                report: to_value(&rep),
                hash: Some(report_hash(&text)),
                observed_order: None,
            })
        }
        Suite::Identity => {
            let rep = identity_order(model, &prepared.params, &prepared.eps0, options.iterations)?;
            let passed = rep.residual_coarse <= ROUNDOFF * 1e-3 || rep.observed_order >= 1.0;
            Ok(CheckOutcome {
                passed,
                report: to_value(&rep),
                hash: None,
                observed_order: Some(rep.observed_order),
            })
        }
    }
}

/// `check`: prints the JSON report; exit 0 on pass, 1 on any failure.
pub fn cmd_check(config_path: &Path, options: &CheckOptions, out: &mut dyn Write) -> Result<i32> {
    let prepared = prepare_file(config_path)?;
    let outcome = check(&prepared, options)?;
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&outcome.report).expect("reports serialize")
    );
    if let Some(order) = outcome.observed_order {
        let _ = writeln!(out, "observed order: {order:.3}");
    }
    if let Some(h) = outcome.hash {
        let _ = writeln!(out, "report hash: {h:016x}");
    }
    let _ = writeln!(out, "{}", if outcome.passed { "PASS" } else { "FAIL" });
    Ok(if outcome.passed { EXIT_OK } else { EXIT_ERROR })
}

/// `fit-rate`: prints the rate fit (or the Lojasiewicz fit, with `J_limit` = last `J`) as JSON.
pub fn cmd_fit_rate(log_path: &Path, lojasiewicz: bool, out: &mut dyn Write) -> Result<i32> {
    let file = File::open(log_path).map_err(|e| Error::io(log_path, e))?;
    let records = read_convergence_csv(file).map_err(|e| match e {
        Error::Parse { path, message } => Error::Parse {
            path: format!("{}: {path}", log_path.display()),
            message,
        },
        other => other,
    })?;
    let fit = if lojasiewicz {
        let j_limit = records.last().map_or(0.0, |r| r.j);
        fit_lojasiewicz(&records, j_limit)
    } else {
        fit_rate(&records)
    };
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&fit).expect("fits serialize"));
    Ok(EXIT_OK)
}
