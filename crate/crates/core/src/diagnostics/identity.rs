//! Observed order of the monotonicity-identity residual under time refinement.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{BilinearModel, ControlField};
use crate::scheme::{run_monotonic, SchemeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityOrder {
    pub dt: f64,
    /// Largest identity residual over the run at `dt`.
    pub residual_coarse: f64,
    /// Same at `dt / 2`.
    pub residual_fine: f64,
    /// `log2(residual_coarse / residual_fine)`
    pub observed_order: f64,
}

/// Runs `iterations` fixed iterations at `dt` and `dt / 2` from the same
/// (refined) initial control and compares the worst identity residuals.
pub fn identity_order<M: BilinearModel>(
    model: &M,
    params: &SchemeParams,
    eps0: &ControlField,
    iterations: usize,
) -> Result<IdentityOrder> {
    let p = params.with_max_iter(iterations.max(1)).with_tolerances(0.0, 0.0);
    let coarse = run_monotonic(model, &p, eps0)?;
    let fine_model = model.with_grid(model.grid().refined(2)?)?;
    let fine = run_monotonic(&fine_model, &p, &eps0.refined(2)?)?;
    let rc = coarse.max_identity_residual();
    let rf = fine.max_identity_residual();
    Ok(IdentityOrder {
        dt: model.grid().dt(),
        residual_coarse: rc,
        residual_fine: rf,
        observed_order: (rc / rf).log2(),
    })
}
