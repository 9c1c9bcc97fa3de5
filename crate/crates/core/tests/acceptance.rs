//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use bilinear_monotonic::cli::cmd_run;
use bilinear_monotonic::diagnostics::{
    check_gradient, fit_lojasiewicz, fit_rate, identity_order, verify_estimates, EstimateConfig,
    GradientCheckConfig, Regime,
};
use bilinear_monotonic::instances;
use bilinear_monotonic::model::{instance_scale, uniqueness_threshold, RealOdeModel};
use bilinear_monotonic::propagate::{propagate_adjoint, propagate_forward};
use bilinear_monotonic::scheme::{control_bound_m, run_monotonic, RunLog, SchemeParams};
use bilinear_monotonic::{BilinearModel, ControlField, Result, TimeGrid};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// Sup norms seen on runs, for the control bound.
#[derive(Default)]
struct BoundLedger {
    entries: Vec<(String, f64, f64)>,
}

impl BoundLedger {
    fn record<M: BilinearModel + ?Sized>(
        &mut self,
        label: &str,
        model: &M,
        params: &SchemeParams,
        eps0: &ControlField,
        log: &RunLog,
    ) {
        if !model.is_unitary() {
            return;
        }
        if let Ok(m) = control_bound_m(model, params, eps0) {
            self.entries.push((label.to_string(), log.max_eps_linf(), m));
        }
    }
}

fn norm_conservation() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for i in 0..100u64 {
        let mut rng = instances::rng(1000 + i);
        let g = TimeGrid::new(1.0 + (i % 3) as f64, 200)?;
        let eps = instances::random_smooth_control(&mut rng, g, 2.0);
        let (fwd, adj) = if i % 10 == 9 {
            let m = instances::harmonic_grid(128, 8.0, 1.5, 1.0, g)?;
            let psi = propagate_forward(&m, &eps)?;
            let chi = propagate_adjoint(&m, &eps, &m.apply_observable(psi.terminal()))?;
            (psi.norm_drift(&m), chi.norm_drift(&m))
        } else {
            let n = 2 + (i as usize % 7);
            let m = instances::random_nlevel(&mut rng, n, 1.0, g)?;
            let psi = propagate_forward(&m, &eps)?;
            let chi = propagate_adjoint(&m, &eps, &m.apply_observable(psi.terminal()))?;
            (psi.norm_drift(&m), chi.norm_drift(&m))
        };
        worst = worst.max(fwd).max(adj);
        count += 1;
    }
    Ok(Outcome::new(
        worst <= 1e-10,
        format!("{count} instances, worst drift {worst:.2e}"),
    ))
}

fn gradient_correctness() -> Result<Outcome> {
    let g = TimeGrid::new(1.0, 1000)?;
    let m = instances::two_level(1.0, 0.5, g)?;
    let eps = ControlField::from_fn(g, |t| 1.0 + (2.0 * t).sin())?;
    let cfg = GradientCheckConfig {
        directions: 5,
        seed: 7,
        ..GradientCheckConfig::default()
    };
    let rep = check_gradient(&m, &eps, &cfg)?;
    let refine = rep.refinement.expect("refinement requested");
    Ok(Outcome::new(
        rep.max_rel_error <= 1e-3 && refine.ratio >= 1.8,
        format!(
            "dt {:.0e}: max rel error {:.2e}; dt/2: {:.2e} (ratio {:.2})",
            rep.dt, refine.error_coarse, refine.error_fine, refine.ratio
        ),
    ))
}

fn monotonicity(bounds: &mut BoundLedger) -> Result<Outcome> {
    let g = TimeGrid::new(2.0, 200)?;
    let two = instances::two_level(1.0, 0.5, g)?;
    let four = instances::ladder(4, 0.2, g)?;
    let eps0 = ControlField::from_fn(g, |t| 0.5 * (3.0 * t).cos())?;
    let mut ok = true;
    let mut worst_violation = 0.0_f64;
    let mut min_order = f64::INFINITY;
    for (name, model) in [("2-level", &two), ("4-level", &four)] {
        for d in [1.0, 0.5] {
            let p = SchemeParams::new(d, d)?.with_max_iter(40).with_tolerances(0.0, 0.0);
            let log = run_monotonic(model, &p, &eps0)?;
            for r in &log.records {
                // J may only decrease by the measured discretization residual
                let violation = (-r.dj - r.identity_residual).max(0.0);
                worst_violation = worst_violation.max(violation);
                ok &= violation <= 1e-14;
            }
            bounds.record(&format!("{name} delta=eta={d}"), model, &p, &eps0, &log);
            let order = identity_order(model, &p, &eps0, 8)?;
            min_order = min_order.min(order.observed_order);
            ok &= order.observed_order >= 1.0;
        }
    }
    Ok(Outcome::new(
        ok,
        format!("worst unexplained decrease {worst_violation:.1e}, min observed order {min_order:.2}"),
    ))
}

fn degenerate_identity() -> Result<Outcome> {
    let g = TimeGrid::new(1.0, 400)?;
    let mut rng = instances::rng(41);
    let four = instances::random_nlevel(&mut rng, 4, 0.5, g)?;
    let two = instances::two_level(1.0, 0.5, g)?;
    let p = SchemeParams::new(2.0, 2.0)?.with_max_iter(25).with_tolerances(0.0, 0.0);
    let mut ok = true;
    let mut worst_ratio = 0.0_f64;
    for model in [&two, &four] {
        let eps0 = instances::random_smooth_control(&mut rng, g, 1.0);
        let log = run_monotonic(model, &p, &eps0)?;
        let allowed = 10.0 * g.dt() * instance_scale(model);
        for r in &log.records {
            let gap = (r.dj - r.terminal_term).abs();
            worst_ratio = worst_ratio.max(gap / allowed);
            ok &= gap <= allowed;
        }
    }
    Ok(Outcome::new(ok, format!("worst |dJ - terminal| / (10 dt scale) = {worst_ratio:.2e}")))
}

fn control_bound(bounds: &BoundLedger) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut ok = !bounds.entries.is_empty();
    for (label, sup, m) in &bounds.entries {
        let excess = sup - m;
        worst = worst.max(excess);
        if excess > 1e-8 {
            ok = false;
            eprintln!("  bound exceeded on {label}: {sup} > {m}");
        }
    }
    Outcome::new(
        ok,
        format!("{} runs, max(sup|eps| - M) = {worst:.3e}", bounds.entries.len()),
    )
}

fn estimate_suite() -> Result<Outcome> {
    let g = TimeGrid::new(1.0, 200)?;
    let mut rng = instances::rng(5);
    let cfg = EstimateConfig {
        trials: 50,
        seed: 2024,
        ..EstimateConfig::default()
    };
    let two = instances::two_level(1.0, 0.5, g)?;
    let four = instances::random_nlevel(&mut rng, 4, 0.5, g)?;
    let wave = instances::harmonic_grid(64, 6.0, 1.0, 0.5, g)?;
    let reports = [
        verify_estimates(&two, &cfg)?,
        verify_estimates(&four, &cfg)?,
        verify_estimates(&wave, &EstimateConfig { run_iterations: 10, ..cfg })?,
    ];
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    let checked: usize = reports
        .iter()
        .flat_map(|r| r.summaries.iter().map(|s| s.checked))
        .sum();
    let worst_ratio = reports
        .iter()
        .flat_map(|r| r.summaries.iter().map(|s| s.worst_ratio))
        .fold(0.0_f64, f64::max);
    Ok(Outcome::new(
        violations == 0,
        format!("{checked} checks on 3 models x 50 trials, {violations} violations, worst lhs/rhs {worst_ratio:.3}"),
    ))
}

struct UniquenessRuns {
    threshold_alpha: f64,
    dt: f64,
    a: RunLog,
    b: RunLog,
}

fn uniqueness_runs(bounds: &mut BoundLedger) -> Result<(UniquenessRuns, impl BilinearModel)> {
    let g = TimeGrid::new(1.0, 200)?;
    // generic instance: random psi0 and observable, so the critical point is not eps = 0
    let mut rng = instances::rng(9);
    let base = instances::random_nlevel(&mut rng, 4, 1.0, g)?;
    let alpha = 1.5 * uniqueness_threshold(&base);
    let m = base.with_alpha(alpha)?;
    // small relaxation keeps enough iterations above roundoff for a rate fit
    let p = SchemeParams::new(0.2, 0.2)?.with_max_iter(2000).with_tolerances(0.0, 1e-11);
    let eps_a = ControlField::constant(g, 0.5);
    let eps_b = ControlField::from_fn(g, |t| -1.0 + 2.0 * t)?;
    let a = run_monotonic(&m, &p, &eps_a)?;
    let b = run_monotonic(&m, &p, &eps_b)?;
    bounds.record("uniqueness A", &m, &p, &eps_a, &a);
    bounds.record("uniqueness B", &m, &p, &eps_b, &b);
    Ok((
        UniquenessRuns {
            threshold_alpha: alpha,
            dt: g.dt(),
            a,
            b,
        },
        m,
    ))
}

fn uniqueness(runs: &UniquenessRuns) -> Outcome {
    let ga = runs.a.records.last().map_or(f64::INFINITY, |r| r.grad_residual);
    let gb = runs.b.records.last().map_or(f64::INFINITY, |r| r.grad_residual);
    let dist = runs.a.final_eps.distance_l2(&runs.b.final_eps);
    Outcome::new(
        ga <= 1e-6 && gb <= 1e-6 && dist <= 1e-4,
        format!(
            "alpha {:.1}: grad {ga:.1e} / {gb:.1e} after {} / {} iterations, ||eps*|| = {:.2e}, ||eps_A - eps_B|| = {dist:.1e}",
            runs.threshold_alpha,
            runs.a.iterations(),
            runs.b.iterations(),
            runs.a.final_eps.norm_l2()
        ),
    )
}

fn rate_regime(runs: &UniquenessRuns) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, log) in [("A", &runs.a), ("B", &runs.b)] {
        let fit = fit_rate(&log.records);
        let loja = fit_lojasiewicz(&log.records, log.final_j());
        let theta = fit.theta_hat.unwrap_or(f64::NAN);
        ok &= fit.regime == Regime::Exponential && fit.r_squared >= 0.99 && (theta - 0.5).abs() <= 0.1;
        parts.push(format!(
            "{name}: {} r2 {:.5} theta {theta:.2} tau {:.3} (gradient theta {:.3})",
            regime_name(fit.regime),
            fit.r_squared,
            fit.tau_hat.unwrap_or(f64::NAN),
            loja.theta_hat.unwrap_or(f64::NAN)
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Exponential => "exponential",
        Regime::Algebraic => "algebraic",
        Regime::Undetermined => "undetermined",
    }
}

fn ode_reduction() -> Result<Outcome> {
    let mut ok = true;
    let mut worst_ratio = 0.0_f64;
    let mut orders = Vec::new();
    for seed in [3u64, 4, 5] {
        let g = TimeGrid::new(1.0, 200)?;
        let mut rng = instances::rng(seed);
        let m: RealOdeModel = instances::random_real_ode(&mut rng, 4, 2.0, g)?;
        let eps0 = instances::random_smooth_control(&mut rng, g, 0.5);
        let p = SchemeParams::krotov(1.0)?.with_max_iter(20).with_tolerances(0.0, 0.0);
        let log = run_monotonic(&m, &p, &eps0)?;
        let allowed = 10.0 * g.dt() * instance_scale(&m);
        for r in &log.records {
            // dJ = dy(T).C dy(T) + alpha ||dv||^2
            let rhs = r.terminal_term + m.alpha() * r.n_fwd * r.n_fwd;
            let gap = (r.dj - rhs).abs();
            worst_ratio = worst_ratio.max(gap / allowed);
            ok &= gap <= allowed && r.dj >= -gap;
        }
        let order = identity_order(&m, &p, &eps0, 8)?;
        ok &= order.observed_order >= 1.0;
        orders.push(format!("{:.2}", order.observed_order));
    }
    Ok(Outcome::new(
        ok,
        format!(
            "worst residual / (10 dt scale) = {worst_ratio:.2e}, observed orders {}",
            orders.join(", ")
        ),
    ))
}

fn fixed_point<M: BilinearModel>(model: &M, runs: &UniquenessRuns, bounds: &mut BoundLedger) -> Result<Outcome> {
    let star = &runs.a.final_eps;
    let allowed = 5.0 * runs.dt * instance_scale(model);
    let mut ok = true;
    let mut worst = 0.0_f64;
    for d in [0.2, 1.0] {
        let p = SchemeParams::new(d, d)?.with_max_iter(1).with_tolerances(0.0, 0.0);
        let log = run_monotonic(model, &p, star)?;
        bounds.record(&format!("fixed point delta=eta={d}"), model, &p, star, &log);
        let step = log.final_eps.distance_l2(star);
        worst = worst.max(step);
        ok &= step <= allowed;
    }
    Ok(Outcome::new(
        ok,
        format!("||eps^1 - eps*|| = {worst:.2e} (allowed {allowed:.2e})"),
    ))
}

const DETERMINISM_CONFIG: &str = r#"{
    "model": {"type": "nlevel",
              "h0": [[[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0]],[[0,0],[0,0],[2.5,0]]],
              "mu": [[[0,0],[1,0],[0,0]],[[1,0],[0,0],[0.7,0]],[[0,0],[0.7,0],[0,0]]],
              "observable": [[[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0]],[[0,0],[0,0],[1,0]]],
              "psi0": [[1,0],[0,0],[0,0]]},
    "grid": {"T": 3.0, "N": 300},
    "scheme": {"delta": 0.8, "eta": 1.2, "alpha": 0.4, "max_iter": 60, "tol_dj": 0, "tol_de": 0},
    "init_control": {"random_smooth": {"amplitude": 0.5}},
    "seed": 17
}"#;

fn determinism() -> Result<Outcome> {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).map_err(|e| bilinear_monotonic::Error::io(&root, e))?;
    let config = root.join("three_level.json");
    fs::write(&config, DETERMINISM_CONFIG).map_err(|e| bilinear_monotonic::Error::io(&config, e))?;
    let mut bytes = Vec::new();
    for run in 0..3 {
        let dir = root.join(format!("run{run}"));
        cmd_run(&config, Some(&dir), &mut std::io::sink())?;
        let path = dir.join("convergence.csv");
        bytes.push(fs::read(&path).map_err(|e| bilinear_monotonic::Error::io(&path, e))?);
    }
    let identical = bytes.windows(2).all(|w| w[0] == w[1]);
    Ok(Outcome::new(
        identical && !bytes[0].is_empty(),
        format!("3 runs, {} bytes each, identical: {identical}", bytes[0].len()),
    ))
}

fn main() {
    let mut bounds = BoundLedger::default();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        results.push((id, name, outcome, start.elapsed().as_secs_f64()));
    };

    timed(1, "norm conservation", &mut || norm_conservation());
    timed(2, "gradient correctness", &mut || gradient_correctness());
    timed(3, "monotonicity", &mut || monotonicity(&mut bounds));
    timed(4, "degenerate identity at delta = eta = 2", &mut || degenerate_identity());
    timed(6, "estimate suite", &mut || estimate_suite());
    let runs = uniqueness_runs(&mut bounds);
    match &runs {
        Ok((runs, model)) => {
            timed(7, "convergence and uniqueness", &mut || Ok(uniqueness(runs)));
            timed(8, "rate regime", &mut || Ok(rate_regime(runs)));
            timed(10, "fixed point", &mut || fixed_point(model, runs, &mut bounds));
        }
        Err(e) => {
            for (id, name) in [(7, "convergence and uniqueness"), (8, "rate regime"), (10, "fixed point")] {
                let msg = format!("error: {e}");
                timed(id, name, &mut || Ok(Outcome::new(false, msg.clone())));
            }
        }
    }
    timed(9, "real ODE reduction", &mut || ode_reduction());
    timed(11, "determinism", &mut || determinism());
    timed(5, "control sup bound", &mut || Ok(control_bound(&bounds)));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, outcome, secs) in &results {
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} [{secs:.1}s]: {}", outcome.detail);
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
