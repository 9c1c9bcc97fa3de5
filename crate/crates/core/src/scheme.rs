//! The `(delta, eta)` monotonic iteration.
//!
//! Iteration `k` marches forward, setting
//! `eps^k = (1 - delta) eps~^{k-1} - (delta / alpha) Im <chi^{k-1}|mu|psi^k>`
//! while propagating `psi^k`, then marches backward from `chi^k(T) = O psi^k(T)`, setting
//! `eps~^k = (1 - eta) eps^k - (eta / alpha) Im <chi^k|mu|psi^k>` while propagating `chi^k`.
//! The cost then obeys
//!
//! ```text
//! J(eps^k) - J(eps^{k-1}) = <dpsi(T)|O|dpsi(T)>
//!     + alpha (2/delta - 1) ||eps^k - eps~^{k-1}||^2
//!     + alpha (2/eta - 1)   ||eps~^{k-1} - eps^{k-1}||^2
//! ```
//!
//! which is nonnegative for `delta, eta` in `(0, 2]`. On the time grid the
//! identity holds up to a discretization residual that every record reports.
//!
//! Both updates are implicit in time (the control at `t` depends on the state
//! at `t`). [`Resolution::Midpoint`] (the default) solves a scalar fixed point
//! per interval with the coupling sampled at the interval midpoint; a fixed
//! point of the whole iteration is then exactly a zero of the sampled gradient.
//! [`Resolution::Endpoint`] evaluates the coupling at the already-known
//! endpoint (left going forward, right going backward), which is explicit and
//! first-order consistent.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::gradient_from;
use crate::model::{
    uniqueness_threshold, BilinearModel, ControlField, HalfStep, ModelSummary, State,
};
use crate::propagate::{adjoint_with, forward_with, Propagators, StateTrajectory};

const FIXED_POINT_MAX_ITER: usize = 200;
const FIXED_POINT_TOL: f64 = 1e-14;
const FIXED_POINT_STALL: f64 = 1e-11;

/// How the time-implicit control updates are resolved on each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Scalar fixed point with the coupling at the interval midpoint. Second order.
    #[default]
    Midpoint,
    /// Explicit: left node in the forward sweep, right node in the backward sweep. First order.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeParams {
    pub delta: f64,
    /// `0` disables the backward update (`eps~^k = eps^k`), the Krotov-type limit.
    pub eta: f64,
    pub max_iter: usize,
    /// Stop once `|J_k - J_{k-1}| < tol_dj`; `0` disables the rule.
    pub tol_dj: f64,
    /// Stop once `||eps^k - eps^{k-1}||_{L2} < tol_de`; `0` disables the rule.
    pub tol_de: f64,
    pub resolution: Resolution,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            eta: 1.0,
            max_iter: 10_000,
            tol_dj: 1e-10,
            tol_de: 1e-8,
            resolution: Resolution::Midpoint,
        }
    }
}

impl SchemeParams {
    pub fn new(delta: f64, eta: f64) -> Result<Self> {
        let p = Self {
            delta,
            eta,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    /// `eta = 0`: only the forward update is relaxed.
    pub fn krotov(delta: f64) -> Result<Self> {
        Self::new(delta, 0.0)
    }

    /// `delta = eta = 1`.
    pub fn zhu_rabitz() -> Self {
        Self::default()
    }

    pub fn with_tolerances(mut self, tol_dj: f64, tol_de: f64) -> Self {
        self.tol_dj = tol_dj;
        self.tol_de = tol_de;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 2.0) {
            return Err(Error::invalid("scheme.delta", format!("must lie in (0, 2], got {}", self.delta)));
        }
        if !(self.eta >= 0.0 && self.eta <= 2.0) {
            return Err(Error::invalid("scheme.eta", format!("must lie in [0, 2], got {}", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("scheme.max_iter", "must be at least 1"));
        }
        for (name, v) in [("scheme.tol_dj", self.tol_dj), ("scheme.tol_de", self.tol_de)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn backward_enabled(&self) -> bool {
        self.eta > 0.0
    }
}

/// Telemetry of iteration `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "dJ")]
    pub dj: f64,
    /// `||eps^k - eps~^{k-1}||_{L2}`
    pub n_fwd: f64,
    /// `||eps~^{k-1} - eps^{k-1}||_{L2}`
    pub n_bwd: f64,
    /// `<psi^k(T) - psi^{k-1}(T)|O|psi^k(T) - psi^{k-1}(T)>`
    pub terminal_term: f64,
    pub identity_residual: f64,
    /// `||grad J(eps^k)||_{L2}`
    pub grad_residual: f64,
    /// `max(||eps^k||_inf, ||eps~^k||_inf)`
    pub eps_linf: f64,
    /// `||grad J(eps^k)||_{L1}`; not part of the CSV format.
    #[serde(skip, default = "nan")]
    pub grad_l1: f64,
    /// `||eps^k - eps^{k-1}||_{L2}`; not part of the CSV format.
    #[serde(skip, default = "nan")]
    pub step_l2: f64,
}

fn nan() -> f64 {
    f64::NAN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ConvergedDj,
    ConvergedDe,
    MaxIter,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        !matches!(self, StopReason::MaxIter)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ConvergedDj => "converged_dj",
            StopReason::ConvergedDe => "converged_de",
            StopReason::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub params: SchemeParams,
    pub model: ModelSummary,
    /// `J(eps^0)`
    pub initial_j: f64,
    pub records: Vec<IterationRecord>,
    pub final_eps: ControlField,
    pub final_eps_tilde: ControlField,
    pub stop_reason: StopReason,
    /// `eps^0, eps^1, ...` when requested through [`RunOptions::keep_history`].
    pub history: Vec<ControlField>,
}

impl RunLog {
    pub fn final_j(&self) -> f64 {
        self.records.last().map_or(self.initial_j, |r| r.j)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Largest sup norm over `eps^k` and `eps~^k`, `k >= 1`.
    pub fn max_eps_linf(&self) -> f64 {
        self.records.iter().fold(0.0_f64, |m, r| m.max(r.eps_linf))
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.records.iter().fold(0.0_f64, |m, r| m.max(r.identity_residual))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Use this `eps~^0` instead of computing it with one backward sweep from `psi^0`.
    /// With an arbitrary `eps~^0` the first record's identity residual is not small.
    pub eps_tilde0: Option<ControlField>,
    pub keep_history: bool,
}

/// Output of one sweep: the new control, its trajectory, and the propagators it was advanced with.
pub struct Sweep<S> {
    pub control: ControlField,
    pub trajectory: StateTrajectory,
    pub propagators: Propagators<S>,
}

/// Solves `e = update(step(e))` starting at `guess`: a plain fixed-point step, then
/// secant steps on `r(e) = update(e) - e` (the plain step stalls when the update
/// depends strongly on `e`). Returns `e` together with the half step built at `e`.
fn solve_scalar<M: BilinearModel + ?Sized>(
    model: &M,
    interval: usize,
    guess: f64,
    update: impl Fn(&M::Step) -> f64,
) -> Result<(f64, M::Step)> {
    let mut e = guess;
    let mut last: Option<(f64, f64)> = None;
    let mut best = (f64::INFINITY, guess);
    for _ in 0..FIXED_POINT_MAX_ITER {
        let step = model.half_step(e).map_err(|err| relabel(err, interval))?;
        let next = update(&step);
        if !next.is_finite() {
            break;
        }
        let r = next - e;
        let scale = 1.0 + e.abs();
        if r.abs() <= FIXED_POINT_TOL * scale {
            return Ok((e, step));
        }
        if r.abs() < best.0 {
            best = (r.abs(), e);
        }
        // secant only while the residual is well above roundoff, and within a trust region
        let secant = last
            .filter(|_| r.abs() > 1e3 * FIXED_POINT_TOL * scale)
            .and_then(|(e0, r0)| {
                let cand = e - r * (e - e0) / (r - r0);
                (cand.is_finite() && (cand - e).abs() <= 10.0 * r.abs()).then_some(cand)
            });
        last = Some((e, r));
        e = secant.unwrap_or(next);
    }
    // roundoff in `update` can keep the residual just above the tight tolerance
    let (change, e_best) = best;
    if change <= FIXED_POINT_STALL * (1.0 + e_best.abs()) {
        let step = model.half_step(e_best).map_err(|err| relabel(err, interval))?;
        return Ok((e_best, step));
    }
    Err(Error::ImplicitUpdate { interval, change })
}

fn relabel(err: Error, interval: usize) -> Error {
    match err {
        Error::NonFinite { what, .. } => Error::NonFinite { what, index: interval },
        other => other,
    }
}

/// Forward march producing `eps^k` and `psi^k` from `eps~^{k-1}` and `chi^{k-1}`.
pub fn forward_sweep<M: BilinearModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    eps_tilde_prev: &ControlField,
    chi_prev: &StateTrajectory,
) -> Result<Sweep<M::Step>> {
    params.validate()?;
    let grid = *model.grid();
    eps_tilde_prev.ensure_on(&grid)?;
    chi_prev.grid().ensure_matches(&grid)?;

    let n = grid.intervals();
    let (delta, alpha) = (params.delta, model.alpha());
    let relax = |b: f64, coupling: f64| (1.0 - delta) * b - delta / alpha * coupling;

    let mut values = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut mids = Vec::with_capacity(n);
    nodes.push(model.initial_state().clone());
    for j in 0..n {
        let b = eps_tilde_prev.values()[j];
        let psi = &nodes[j];
        let explicit = relax(b, model.coupling(chi_prev.at(j), psi));
        let (e, step) = match params.resolution {
            Resolution::Endpoint => {
                (explicit, model.half_step(explicit).map_err(|err| relabel(err, j))?)
            }
            Resolution::Midpoint => {
                let chi_mid = chi_prev.mid(j);
                solve_scalar(model, j, explicit, |s| relax(b, model.coupling(chi_mid, &s.forward(psi))))?
            }
        };
        let mid = step.forward(psi);
        let next = step.forward(&mid);
        values.push(e);
        steps.push(step);
        mids.push(mid);
        nodes.push(next);
    }
    Ok(Sweep {
        control: ControlField::from_raw(grid, values),
        trajectory: StateTrajectory::from_parts(grid, nodes, mids),
        propagators: Propagators::from_steps(steps),
    })
}

/// Backward march producing `eps~^k` and `chi^k` from `eps^k` and `psi^k`.
/// With `eta = 0` the control is copied and `chi^k` is propagated under `eps^k`.
pub fn backward_sweep<M: BilinearModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    eps_k: &ControlField,
    psi_k: &StateTrajectory,
) -> Result<Sweep<M::Step>> {
    params.validate()?;
    eps_k.ensure_on(model.grid())?;
    psi_k.grid().ensure_matches(model.grid())?;
    if !params.backward_enabled() {
        let props = Propagators::build(model, eps_k)?;
        return Ok(copy_sweep(model, eps_k, psi_k, props));
    }
    backward_march(model, params, eps_k, psi_k)
}

fn copy_sweep<M: BilinearModel + ?Sized>(
    model: &M,
    eps_k: &ControlField,
    psi_k: &StateTrajectory,
    props: Propagators<M::Step>,
) -> Sweep<M::Step> {
    let chi = adjoint_with(model, &props, model.apply_observable(psi_k.terminal()));
    Sweep {
        control: eps_k.clone(),
        trajectory: chi,
        propagators: props,
    }
}

fn backward_march<M: BilinearModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    eps_k: &ControlField,
    psi_k: &StateTrajectory,
) -> Result<Sweep<M::Step>> {
    let grid = *model.grid();
    let n = grid.intervals();
    let (eta, alpha) = (params.eta, model.alpha());
    let relax = |a: f64, coupling: f64| (1.0 - eta) * a - eta / alpha * coupling;

    let mut values = vec![0.0; n];
    let mut steps: Vec<Option<M::Step>> = (0..n).map(|_| None).collect();
    let mut nodes = vec![State::zeros(0); n + 1];
    let mut mids = vec![State::zeros(0); n];
    nodes[n] = model.apply_observable(psi_k.terminal());
    for j in (0..n).rev() {
        let a = eps_k.values()[j];
        let chi = &nodes[j + 1];
        let explicit = relax(a, model.coupling(chi, psi_k.at(j + 1)));
        let (e, step) = match params.resolution {
            Resolution::Endpoint => {
                (explicit, model.half_step(explicit).map_err(|err| relabel(err, j))?)
            }
            Resolution::Midpoint => {
                let psi_mid = psi_k.mid(j);
                solve_scalar(model, j, explicit, |s| relax(a, model.coupling(&s.adjoint(chi), psi_mid)))?
            }
        };
        let mid = step.adjoint(chi);
        nodes[j] = step.adjoint(&mid);
        mids[j] = mid;
        values[j] = e;
        steps[j] = Some(step);
    }
    Ok(Sweep {
        control: ControlField::from_raw(grid, values),
        trajectory: StateTrajectory::from_parts(grid, nodes, mids),
        propagators: Propagators::from_steps(steps.into_iter().map(|s| s.expect("every interval visited")).collect()),
    })
}

/// `|dJ - (terminal + alpha (2/delta - 1) n_fwd^2 + alpha (2/eta - 1) n_bwd^2)|`.
/// With `eta = 0` the backward increment vanishes identically and its term is dropped.
pub fn monotonic_identity_residual(record: &IterationRecord, params: &SchemeParams, alpha: f64) -> f64 {
    (record.dj - identity_rhs(record, params, alpha)).abs()
}

/// Right-hand side of the monotonicity identity for one record.
pub fn identity_rhs(record: &IterationRecord, params: &SchemeParams, alpha: f64) -> f64 {
    let fwd = alpha * (2.0 / params.delta - 1.0) * record.n_fwd * record.n_fwd;
    let bwd = if params.backward_enabled() {
        alpha * (2.0 / params.eta - 1.0) * record.n_bwd * record.n_bwd
    } else {
        0.0
    };
    record.terminal_term + fwd + bwd
}

/// A priori bound `M = max(||eps^0||_inf, max(1, delta/(2-delta), eta/(2-eta)) ||O|| ||mu|| / alpha)`
/// on every `eps^k` and `eps~^k` of a norm-preserving model. Undefined at `delta = 2` or `eta = 2`.
pub fn control_bound_m<M: BilinearModel + ?Sized>(model: &M, params: &SchemeParams, eps0: &ControlField) -> Result<f64> {
    params.validate()?;
    if params.delta >= 2.0 {
        return Err(Error::invalid("scheme.delta", "the control bound needs delta < 2"));
    }
    if params.eta >= 2.0 {
        return Err(Error::invalid("scheme.eta", "the control bound needs eta < 2"));
    }
    let factor = 1.0_f64
        .max(params.delta / (2.0 - params.delta))
        .max(params.eta / (2.0 - params.eta));
    Ok(eps0
        .norm_linf()
        .max(factor * model.observable_norm() * model.coupling_norm() / model.alpha()))
}

/// `lambda = 2 sqrt(T) (4 T ||O|| ||mu||^2 + alpha |1 - 1/delta|)`, the constant in
/// `||grad J(eps^k)||_{L1} <= lambda (n_fwd + n_bwd)`.
pub fn gradient_bound_lambda<M: BilinearModel + ?Sized>(model: &M, params: &SchemeParams) -> f64 {
    let t = model.grid().horizon();
    let mu = model.coupling_norm();
    2.0 * t.sqrt() * (4.0 * t * model.observable_norm() * mu * mu + model.alpha() * (1.0 - 1.0 / params.delta).abs())
}

pub fn run_monotonic<M: BilinearModel + ?Sized>(model: &M, params: &SchemeParams, eps0: &ControlField) -> Result<RunLog> {
    run_monotonic_with(model, params, eps0, &RunOptions::default())
}

pub fn run_monotonic_with<M: BilinearModel + ?Sized>(
    model: &M,
    params: &SchemeParams,
    eps0: &ControlField,
    options: &RunOptions,
) -> Result<RunLog> {
    params.validate()?;
    eps0.ensure_on(model.grid())?;
    let alpha = model.alpha();

    let props0 = Propagators::build(model, eps0)?;
    let mut psi = forward_with(model, &props0);
    let mut eps = eps0.clone();
    let initial_j = model.payoff(psi.terminal()) - alpha * eps.inner(&eps);
    if !initial_j.is_finite() {
        return Err(Error::Diverged { iteration: 0, what: "J" });
    }
    let (mut eps_tilde, mut chi) = match &options.eps_tilde0 {
        Some(t) => {
            t.ensure_on(model.grid())?;
            let props = Propagators::build(model, t)?;
            let chi = adjoint_with(model, &props, model.apply_observable(psi.terminal()));
            (t.clone(), chi)
        }
        None => {
            let s = if params.backward_enabled() {
                backward_march(model, params, &eps, &psi)?
            } else {
                copy_sweep(model, &eps, &psi, props0)
            };
            (s.control, s.trajectory)
        }
    };

    let mut history = Vec::new();
    if options.keep_history {
        history.push(eps.clone());
    }
    let mut records = Vec::new();
    let mut j_prev = initial_j;
    let mut stop_reason = StopReason::MaxIter;
    for k in 1..=params.max_iter {
        let diverged = |what| move |err: Error| match err {
            Error::NonFinite { .. } => Error::Diverged { iteration: k, what },
            other => other,
        };
        let fwd = forward_sweep(model, params, &eps_tilde, &chi).map_err(diverged("forward control"))?;
        let eps_new = fwd.control;
        let psi_new = fwd.trajectory;
        let j_new = model.payoff(psi_new.terminal()) - alpha * eps_new.inner(&eps_new);
        if !j_new.is_finite() {
            return Err(Error::Diverged { iteration: k, what: "J" });
        }
        let dpsi = psi_new.terminal() - psi.terminal();
        let terminal_term = model.payoff(&dpsi);
        let n_fwd = eps_new.distance_l2(&eps_tilde);
        let n_bwd = eps_tilde.distance_l2(&eps);
        let step_l2 = eps_new.distance_l2(&eps);

        let (bwd, grad) = if params.backward_enabled() {
            let chi_exact = adjoint_with(model, &fwd.propagators, model.apply_observable(psi_new.terminal()));
            let grad = gradient_from(model, &eps_new, &psi_new, &chi_exact);
            let bwd = backward_march(model, params, &eps_new, &psi_new).map_err(diverged("backward control"))?;
            (bwd, grad)
        } else {
            let bwd = copy_sweep(model, &eps_new, &psi_new, fwd.propagators);
            let grad = gradient_from(model, &eps_new, &psi_new, &bwd.trajectory);
            (bwd, grad)
        };

        let mut record = IterationRecord {
            k,
            j: j_new,
            dj: j_new - j_prev,
            n_fwd,
            n_bwd,
            terminal_term,
            identity_residual: 0.0,
            grad_residual: grad.field().norm_l2(),
            eps_linf: eps_new.norm_linf().max(bwd.control.norm_linf()),
            grad_l1: grad.field().norm_l1(),
            step_l2,
        };
        record.identity_residual = monotonic_identity_residual(&record, params, alpha);
        records.push(record);

        eps = eps_new;
        psi = psi_new;
        eps_tilde = bwd.control;
        chi = bwd.trajectory;
        j_prev = j_new;
        if options.keep_history {
            history.push(eps.clone());
        }

        if params.tol_dj > 0.0 && record.dj.abs() < params.tol_dj {
            stop_reason = StopReason::ConvergedDj;
            break;
        }
        if params.tol_de > 0.0 && step_l2 < params.tol_de {
            stop_reason = StopReason::ConvergedDe;
            break;
        }
    }

    Ok(RunLog {
        params: *params,
        model: model.summary(),
        initial_j,
        records,
        final_eps: eps,
        final_eps_tilde: eps_tilde,
        stop_reason,
        history,
    })
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub params: SchemeParams,
    pub model: ModelSummary,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub initial_j: f64,
    pub final_j: f64,
    pub iterations: usize,
    /// `null` when the bound is undefined (`delta` or `eta` = 2) or the model is not norm preserving.
    pub bound_m: Option<f64>,
    pub max_eps_linf: f64,
    pub uniqueness_threshold: f64,
    pub invertibility_margin: f64,
    pub final_grad_residual: Option<f64>,
}

impl RunSummary {
    pub fn new<M: BilinearModel + ?Sized>(model: &M, log: &RunLog, eps0: &ControlField) -> Self {
        let bound_m = if model.is_unitary() {
            control_bound_m(model, &log.params, eps0).ok()
        } else {
            None
        };
        let threshold = uniqueness_threshold(model);
        Self {
            params: log.params,
            model: log.model.clone(),
            stop_reason: log.stop_reason,
            converged: log.stop_reason.is_converged(),
            initial_j: log.initial_j,
            final_j: log.final_j(),
            iterations: log.iterations(),
            bound_m,
            max_eps_linf: log.max_eps_linf().max(eps0.norm_linf()),
            uniqueness_threshold: threshold,
            invertibility_margin: model.alpha() - threshold,
            final_grad_residual: log.records.last().map(|r| r.grad_residual),
        }
    }
}

pub fn write_convergence_csv<W: Write>(records: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    if records.is_empty() {
        w.write_record([
            "k",
            "J",
            "dJ",
            "n_fwd",
            "n_bwd",
            "terminal_term",
            "identity_residual",
            "grad_residual",
            "eps_linf",
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Parse {
        path: "convergence.csv".into(),
        message: e.to_string(),
    })
}

pub fn read_convergence_csv<R: Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// `t,eps,eps_tilde` with `t` at interval midpoints.
pub fn write_final_control_csv<W: Write>(eps: &ControlField, eps_tilde: &ControlField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "eps", "eps_tilde"]).map_err(csv_error)?;
    for j in 0..eps.len() {
        w.serialize((eps.grid().midpoint(j), eps.values()[j], eps_tilde.values()[j]))
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Parse {
        path: "final_control.csv".into(),
        message: e.to_string(),
    })
}

/// Reads the `eps` and `eps_tilde` columns back.
pub fn read_final_control_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut eps = Vec::new();
    let mut tilde = Vec::new();
    for row in rdr.deserialize::<(f64, f64, f64)>() {
        let (_, e, et) = row.map_err(csv_error)?;
        eps.push(e);
        tilde.push(et);
    }
    Ok((eps, tilde))
}

fn csv_error(e: csv::Error) -> Error {
    let path = match e.position() {
        Some(p) => format!("line {}", p.line()),
        None => "csv".to_string(),
    };
    Error::Parse {
        path,
        message: e.to_string(),
    }
}
