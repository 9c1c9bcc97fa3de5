//! Forward, adjoint and linearized propagation on the time grid.
//!
//! All four solvers share one convention: interval `j` is advanced by two
//! half steps of the constant-control propagator, and the state after the
//! first half step is kept as the interval's midpoint sample. Adjoint solves
//! apply the exact adjoint of the forward half steps, so discrete pairings
//! `<chi_j, psi_j>` are preserved step by step.
//!
//! Inhomogeneous (linearized) terms use the midpoint rule for the Duhamel
//! integral over each interval.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BilinearModel, ControlField, HalfStep, State, TimeGrid};

/// Propagation backend of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Dense exponential through a Hermitian eigendecomposition (N-level) or Pade (real ODE).
    ExactExponential,
    /// Cayley transform with tridiagonal solves (1D grid).
    CrankNicolson,
}

pub fn stepper<M: BilinearModel + ?Sized>(model: &M) -> Stepper {
    match model.kind() {
        "grid1d" => Stepper::CrankNicolson,
        _ => Stepper::ExactExponential,
    }
}

/// States at the `N + 1` grid nodes plus one midpoint sample per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    grid: TimeGrid,
    nodes: Vec<State>,
    mids: Vec<State>,
}

impl StateTrajectory {
    pub(crate) fn from_parts(grid: TimeGrid, nodes: Vec<State>, mids: Vec<State>) -> Self {
        debug_assert_eq!(nodes.len(), grid.intervals() + 1);
        debug_assert_eq!(mids.len(), grid.intervals());
        Self { grid, nodes, mids }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[State] {
        &self.nodes
    }

    /// Node state at `t_j`.
    pub fn at(&self, j: usize) -> &State {
        &self.nodes[j]
    }

    /// State at the midpoint of interval `j`.
    pub fn mid(&self, j: usize) -> &State {
        &self.mids[j]
    }

    pub fn mids(&self) -> &[State] {
        &self.mids
    }

    pub fn initial(&self) -> &State {
        &self.nodes[0]
    }

    pub fn terminal(&self) -> &State {
        &self.nodes[self.nodes.len() - 1]
    }

    /// `max_j ||x(t_j)||` under the model's inner product.
    pub fn sup_norm<M: BilinearModel + ?Sized>(&self, model: &M) -> f64 {
        self.nodes.iter().fold(0.0_f64, |acc, s| acc.max(model.norm(s)))
    }

    /// `max_j | ||x(t_j)|| - ||x(0)|| |`
    pub fn norm_drift<M: BilinearModel + ?Sized>(&self, model: &M) -> f64 {
        let n0 = model.norm(self.initial());
        self.nodes.iter().fold(0.0_f64, |acc, s| acc.max((model.norm(s) - n0).abs()))
    }

    /// CSV with one row per node: `t, re_0, im_0, re_1, im_1, ...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.nodes.first().map_or(0, |s| s.len());
        write!(out, "t")?;
        for k in 0..dim {
            write!(out, ",re_{k},im_{k}")?;
        }
        writeln!(out)?;
        for (j, s) in self.nodes.iter().enumerate() {
            write!(out, "{}", self.grid.node(j))?;
            for z in s.iter() {
                write!(out, ",{},{}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Half-step propagators for every interval of one control.
pub struct Propagators<S> {
    steps: Vec<S>,
}

impl<S: HalfStep> Propagators<S> {
    pub fn build<M: BilinearModel<Step = S> + ?Sized>(model: &M, eps: &ControlField) -> Result<Self> {
        eps.ensure_on(model.grid())?;
        let steps = eps
            .values()
            .par_iter()
            .enumerate()
            .map(|(j, &v)| {
                model.half_step(v).map_err(|e| match e {
                    Error::NonFinite { what, .. } => Error::NonFinite { what, index: j },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }

    pub(crate) fn from_steps(steps: Vec<S>) -> Self {
        Self { steps }
    }

    pub fn step(&self, j: usize) -> &S {
        &self.steps[j]
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn ensure_dim<M: BilinearModel + ?Sized>(model: &M, x: &State) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

pub fn forward_with<M: BilinearModel + ?Sized>(model: &M, props: &Propagators<M::Step>) -> StateTrajectory {
    let n = props.len();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut mids = Vec::with_capacity(n);
    nodes.push(model.initial_state().clone());
    for j in 0..n {
        let step = props.step(j);
        let mid = step.forward(&nodes[j]);
        nodes.push(step.forward(&mid));
        mids.push(mid);
    }
    StateTrajectory::from_parts(*model.grid(), nodes, mids)
}

pub fn adjoint_with<M: BilinearModel + ?Sized>(
    model: &M,
    props: &Propagators<M::Step>,
    terminal: State,
) -> StateTrajectory {
    let n = props.len();
    let mut nodes = vec![State::zeros(0); n + 1];
    let mut mids = vec![State::zeros(0); n];
    nodes[n] = terminal;
    for j in (0..n).rev() {
        let step = props.step(j);
        let mid = step.adjoint(&nodes[j + 1]);
        nodes[j] = step.adjoint(&mid);
        mids[j] = mid;
    }
    StateTrajectory::from_parts(*model.grid(), nodes, mids)
}

/// Solves the state equation from `psi0` under `eps`.
pub fn propagate_forward<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<StateTrajectory> {
    let props = Propagators::build(model, eps)?;
    Ok(forward_with(model, &props))
}

/// Solves the costate equation backward from `terminal` (usually `O psi(T)`) under `eps`.
pub fn propagate_adjoint<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    terminal: &State,
) -> Result<StateTrajectory> {
    ensure_dim(model, terminal)?;
    let props = Propagators::build(model, eps)?;
    Ok(adjoint_with(model, &props, terminal.clone()))
}

/// Linearized state `psi'` for the perturbation `deps`: zero initial value,
/// source `deps(t) G psi(t)` (i.e. `-i mu deps psi` moved to the right-hand side).
pub fn propagate_linearized<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    deps: &ControlField,
    base: &StateTrajectory,
) -> Result<StateTrajectory> {
    deps.ensure_on(model.grid())?;
    base.grid().ensure_matches(model.grid())?;
    let props = Propagators::build(model, eps)?;
    Ok(linearized_with(model, &props, deps, base))
}

pub fn linearized_with<M: BilinearModel + ?Sized>(
    model: &M,
    props: &Propagators<M::Step>,
    deps: &ControlField,
    base: &StateTrajectory,
) -> StateTrajectory {
    let n = props.len();
    let dt = model.grid().dt();
    let dim = model.dim();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut mids = Vec::with_capacity(n);
    nodes.push(State::zeros(dim));
    for j in 0..n {
        let step = props.step(j);
        let d = deps.values()[j];
        let carried = step.forward(&nodes[j]);
        if d == 0.0 {
            nodes.push(step.forward(&carried));
            mids.push(carried);
            continue;
        }
        let g_mid = model.apply_generator(base.mid(j));
        let g_left = step.forward(&model.apply_generator(base.at(j)));
        // half-interval Duhamel term by the trapezoid rule
        let mid = &carried + (&g_left + &g_mid) * Complex64::new(0.25 * dt * d, 0.0);
        // full-interval Duhamel term by the midpoint rule
        let node = step.forward(&(&carried + g_mid * Complex64::new(dt * d, 0.0)));
        nodes.push(node);
        mids.push(mid);
    }
    StateTrajectory::from_parts(*model.grid(), nodes, mids)
}

/// Linearized costate `chi'`: backward solve with source from `chi` and terminal value `terminal`.
pub fn propagate_linearized_adjoint<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    deps: &ControlField,
    chi: &StateTrajectory,
    terminal: &State,
) -> Result<StateTrajectory> {
    deps.ensure_on(model.grid())?;
    chi.grid().ensure_matches(model.grid())?;
    ensure_dim(model, terminal)?;
    let props = Propagators::build(model, eps)?;
    Ok(linearized_adjoint_with(model, &props, deps, chi, terminal.clone()))
}

pub fn linearized_adjoint_with<M: BilinearModel + ?Sized>(
    model: &M,
    props: &Propagators<M::Step>,
    deps: &ControlField,
    chi: &StateTrajectory,
    terminal: State,
) -> StateTrajectory {
    let n = props.len();
    let dt = model.grid().dt();
    let mut nodes = vec![State::zeros(0); n + 1];
    let mut mids = vec![State::zeros(0); n];
    nodes[n] = terminal;
    for j in (0..n).rev() {
        let step = props.step(j);
        let d = deps.values()[j];
        let carried = step.adjoint(&nodes[j + 1]);
        if d == 0.0 {
            nodes[j] = step.adjoint(&carried);
            mids[j] = carried;
            continue;
        }
        let g_mid = model.apply_generator_adjoint(chi.mid(j));
        let g_right = step.adjoint(&model.apply_generator_adjoint(chi.at(j + 1)));
        mids[j] = &carried + (&g_right + &g_mid) * Complex64::new(0.25 * dt * d, 0.0);
        nodes[j] = step.adjoint(&(&carried + g_mid * Complex64::new(dt * d, 0.0)));
    }
    StateTrajectory::from_parts(*model.grid(), nodes, mids)
}
