//! Time grids, piecewise-constant controls and the bilinear models they drive.
//!
//! Every model evolves `d/dt x = G(eps) x` on `[0, T]`, with a generator that
//! is affine in the scalar control. Controls are constant on each of the `N`
//! grid intervals and states live on the `N + 1` nodes, so each interval is
//! propagated exactly by a constant-generator step. Models only expose the
//! half-interval step; full steps are two half steps, which keeps midpoint
//! samples and node values consistent.

mod grid1d;
pub mod linalg;
mod nlevel;
mod real_ode;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid1d::{dense_hamiltonian as grid1d_dense_hamiltonian, gaussian_packet, positions as grid1d_positions, CrankNicolsonStep, Grid1DModel, GridObservable};
pub use linalg::{CMatrix, CVector};
pub use nlevel::{NLevelModel, NLevelStep};
pub use real_ode::{RealOdeModel, RealOdeStep};

/// A model state: complex amplitudes (real models keep a zero imaginary part).
pub type State = CVector;

/// Uniform partition of `[0, T]` into `N` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("grid.T", format!("must be a positive finite time, got {horizon}")));
        }
        if intervals < 2 {
            return Err(Error::invalid("grid.N", format!("need at least 2 intervals, got {intervals}")));
        }
        Ok(Self {
            horizon,
            intervals,
            dt: horizon / intervals as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of node `j`; node `N` is exactly `T`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.intervals {
            self.horizon
        } else {
            j as f64 * self.dt
        }
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt
    }

    /// Same grid with every interval split into `factor` pieces.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.intervals * factor.max(1))
    }

    pub fn matches(&self, other: &TimeGrid) -> bool {
        self.intervals == other.intervals
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.max(other.horizon)
    }

    pub(crate) fn ensure_matches(&self, other: &TimeGrid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.intervals,
                horizon: self.horizon,
                found: other.intervals,
            })
        }
    }
}

/// A piecewise-constant real control: one value per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ControlField {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.intervals() {
            return Err(Error::GridMismatch {
                expected: grid.intervals(),
                horizon: grid.horizon(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "control", index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.intervals()],
        }
    }

    /// Samples `f` at interval midpoints.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.intervals()).map(|j| f(grid.midpoint(j))).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.intervals());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_l1(&self) -> f64 {
        self.grid.dt() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Exact L2(0,T) inner product of two piecewise-constant fields.
    pub fn inner(&self, other: &ControlField) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.grid.dt() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn distance_l2(&self, other: &ControlField) -> f64 {
        let sq: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        (self.grid.dt() * sq).sqrt()
    }

    pub fn sub(&self, other: &ControlField) -> ControlField {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ControlField) -> ControlField {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self + scale * direction`
    pub fn axpy(&self, scale: f64, direction: &ControlField) -> ControlField {
        self.zip_with(direction, |a, b| a + scale * b)
    }

    pub fn scaled(&self, factor: f64) -> ControlField {
        Self::from_raw(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    fn zip_with(&self, other: &ControlField, f: impl Fn(f64, f64) -> f64) -> ControlField {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        )
    }

    /// Repeats each value `factor` times on the refined grid (same function of t).
    pub fn refined(&self, factor: usize) -> Result<ControlField> {
        let grid = self.grid.refined(factor)?;
        let factor = factor.max(1);
        let values = self
            .values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, factor))
            .collect();
        Ok(Self::from_raw(grid, values))
    }

    pub fn ensure_on(&self, grid: &TimeGrid) -> Result<()> {
        grid.ensure_matches(&self.grid)
    }
}

/// Propagator of one model over half a grid interval at a fixed control value.
pub trait HalfStep: Send + Sync {
    /// `U x`
    fn forward(&self, x: &State) -> State;
    /// `U^dagger x`: the adjoint step, which carries the costate backward.
    fn adjoint(&self, x: &State) -> State;

    fn full_forward(&self, x: &State) -> State {
        self.forward(&self.forward(x))
    }

    fn full_adjoint(&self, x: &State) -> State {
        self.adjoint(&self.adjoint(x))
    }
}

/// Contract shared by every bilinear control model.
///
/// The state equation is `x' = (F + eps(t) G) x` where `G` is the control
/// generator: `G = i mu` for Schrodinger models and `G = B` for the real ODE.
/// The pairing `coupling(chi, psi) = -Re <chi, G psi>` equals
/// `Im <chi|mu|psi>` in the quantum case, so the gradient of the cost reads
/// `-2 (alpha eps + coupling)` for all models.
pub trait BilinearModel: Send + Sync {
    type Step: HalfStep;

    fn grid(&self) -> &TimeGrid;
    fn alpha(&self) -> f64;
    fn dim(&self) -> usize;
    fn initial_state(&self) -> &State;

    /// Exact propagator over `dt / 2` at control value `eps`.
    fn half_step(&self, eps: f64) -> Result<Self::Step>;

    fn apply_observable(&self, x: &State) -> State;
    fn apply_generator(&self, x: &State) -> State;
    fn apply_generator_adjoint(&self, x: &State) -> State;

    /// Spectral norm of the terminal observable.
    fn observable_norm(&self) -> f64;
    /// Sup norm of the coupling operator (`mu`, or `B` for the real ODE).
    fn coupling_norm(&self) -> f64;

    /// Whether the free propagator is norm preserving.
    fn is_unitary(&self) -> bool;
    fn kind(&self) -> &'static str;

    fn with_grid(&self, grid: TimeGrid) -> Result<Self>
    where
        Self: Sized;
    fn with_alpha(&self, alpha: f64) -> Result<Self>
    where
        Self: Sized;

    fn inner(&self, a: &State, b: &State) -> Complex64 {
        a.dotc(b)
    }

    fn norm(&self, a: &State) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    fn coupling(&self, chi: &State, psi: &State) -> f64 {
        -self.inner(chi, &self.apply_generator(psi)).re
    }

    /// Terminal payoff `<x|O|x>`.
    fn payoff(&self, x: &State) -> f64 {
        self.inner(x, &self.apply_observable(x)).re
    }

    fn summary(&self) -> ModelSummary {
        ModelSummary {
            kind: self.kind().to_string(),
            dim: self.dim(),
            alpha: self.alpha(),
            horizon: self.grid().horizon(),
            intervals: self.grid().intervals(),
            observable_norm: self.observable_norm(),
            coupling_norm: self.coupling_norm(),
            uniqueness_threshold: uniqueness_threshold(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: String,
    pub dim: usize,
    pub alpha: f64,
    pub horizon: f64,
    pub intervals: usize,
    pub observable_norm: f64,
    pub coupling_norm: f64,
    pub uniqueness_threshold: f64,
}

/// `||O||_*`, the spectral norm of the terminal observable.
pub fn operator_norm_observable<M: BilinearModel + ?Sized>(model: &M) -> f64 {
    model.observable_norm()
}

/// `||mu||_inf`: spectral norm of `mu` (N-level), max |mu(x_i)| (grid), spectral norm of `B` (real ODE).
pub fn mu_sup_norm<M: BilinearModel + ?Sized>(model: &M) -> f64 {
    model.coupling_norm()
}

/// `6 T ||mu||^2 ||O||_*`. Above this penalty weight the critical set is a single point.
pub fn uniqueness_threshold<M: BilinearModel + ?Sized>(model: &M) -> f64 {
    let mu = model.coupling_norm();
    6.0 * model.grid().horizon() * mu * mu * model.observable_norm()
}

/// Characteristic magnitude used to scale O(dt) slack terms.
pub fn instance_scale<M: BilinearModel + ?Sized>(model: &M) -> f64 {
    let t_mu = model.grid().horizon() * model.coupling_norm();
    model.observable_norm().max(1e-300) * (1.0 + t_mu) * (1.0 + t_mu)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("scheme.alpha", format!("must be positive, got {alpha}")));
    }
    Ok(())
}

/// Any of the three concrete models, for callers that pick one at run time.
#[derive(Debug, Clone)]
pub enum AnyModel {
    NLevel(NLevelModel),
    RealOde(RealOdeModel),
    Grid1D(Grid1DModel),
}

pub enum AnyStep {
    NLevel(<NLevelModel as BilinearModel>::Step),
    RealOde(<RealOdeModel as BilinearModel>::Step),
    Grid1D(<Grid1DModel as BilinearModel>::Step),
}

impl HalfStep for AnyStep {
    fn forward(&self, x: &State) -> State {
        match self {
            AnyStep::NLevel(s) => s.forward(x),
            AnyStep::RealOde(s) => s.forward(x),
            AnyStep::Grid1D(s) => s.forward(x),
        }
    }

    fn adjoint(&self, x: &State) -> State {
        match self {
            AnyStep::NLevel(s) => s.adjoint(x),
            AnyStep::RealOde(s) => s.adjoint(x),
            AnyStep::Grid1D(s) => s.adjoint(x),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyModel::NLevel($m) => $e,
            AnyModel::RealOde($m) => $e,
            AnyModel::Grid1D($m) => $e,
        }
    };
}

impl BilinearModel for AnyModel {
    type Step = AnyStep;

    fn grid(&self) -> &TimeGrid {
        delegate!(self, m => m.grid())
    }
    fn alpha(&self) -> f64 {
        delegate!(self, m => m.alpha())
    }
    fn dim(&self) -> usize {
        delegate!(self, m => m.dim())
    }
    fn initial_state(&self) -> &State {
        delegate!(self, m => m.initial_state())
    }
    fn half_step(&self, eps: f64) -> Result<AnyStep> {
        Ok(match self {
            AnyModel::NLevel(m) => AnyStep::NLevel(m.half_step(eps)?),
            AnyModel::RealOde(m) => AnyStep::RealOde(m.half_step(eps)?),
            AnyModel::Grid1D(m) => AnyStep::Grid1D(m.half_step(eps)?),
        })
    }
    fn apply_observable(&self, x: &State) -> State {
        delegate!(self, m => m.apply_observable(x))
    }
    fn apply_generator(&self, x: &State) -> State {
        delegate!(self, m => m.apply_generator(x))
    }
    fn apply_generator_adjoint(&self, x: &State) -> State {
        delegate!(self, m => m.apply_generator_adjoint(x))
    }
    fn observable_norm(&self) -> f64 {
        delegate!(self, m => m.observable_norm())
    }
    fn coupling_norm(&self) -> f64 {
        delegate!(self, m => m.coupling_norm())
    }
    fn is_unitary(&self) -> bool {
        delegate!(self, m => m.is_unitary())
    }
    fn kind(&self) -> &'static str {
        delegate!(self, m => m.kind())
    }
    fn inner(&self, a: &State, b: &State) -> Complex64 {
        delegate!(self, m => m.inner(a, b))
    }
    fn coupling(&self, chi: &State, psi: &State) -> f64 {
        delegate!(self, m => m.coupling(chi, psi))
    }
    fn payoff(&self, x: &State) -> f64 {
        delegate!(self, m => m.payoff(x))
    }
    fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Ok(match self {
            AnyModel::NLevel(m) => AnyModel::NLevel(m.with_grid(grid)?),
            AnyModel::RealOde(m) => AnyModel::RealOde(m.with_grid(grid)?),
            AnyModel::Grid1D(m) => AnyModel::Grid1D(m.with_grid(grid)?),
        })
    }
    fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(match self {
            AnyModel::NLevel(m) => AnyModel::NLevel(m.with_alpha(alpha)?),
            AnyModel::RealOde(m) => AnyModel::RealOde(m.with_alpha(alpha)?),
            AnyModel::Grid1D(m) => AnyModel::Grid1D(m.with_alpha(alpha)?),
        })
    }
}
