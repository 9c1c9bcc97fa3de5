//! Monotonically convergent `(delta, eta)` schemes for bilinear optimal control.
//!
//! The crate solves `max J(eps) = <psi(T)|O|psi(T)> - alpha ||eps||^2` for
//! Schrodinger-type systems `i psi' = (H - eps(t) mu) psi` (and the real ODE
//! `y' = (A + v B) y`), using the forward/backward relaxation sweeps that make
//! `J` nondecreasing along the iterates. Around the solver sit the adjoint
//! gradient, Hessian-vector products, and a diagnostics suite that checks the
//! monotonicity identity, a priori bounds, and convergence rates on actual runs.
//!
//! Modules:
//! - [`model`]: time grids, controls, and the N-level, real ODE and 1D grid models
//! - [`propagate`]: forward, adjoint and linearized solves
//! - [`functional`]: cost, gradient, criticality residual, Hessian-vector product
//! - [`scheme`]: the monotonic iteration and its telemetry
//! - [`diagnostics`]: rate fits, estimate verification, gradient checks
//! - [`cli`]: JSON configs, run orchestration, sweeps and file output

pub mod cli;
pub mod diagnostics;
mod error;
pub mod functional;
pub mod instances;
pub mod model;
pub mod propagate;
pub mod scheme;

pub use error::{Error, Result};
pub use model::{AnyModel, BilinearModel, ControlField, TimeGrid};
