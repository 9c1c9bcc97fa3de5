//! Finite-difference checks of the adjoint gradient.
//!
//! The adjoint gradient samples the continuous formula at interval midpoints,
//! so against the exact derivative of the discrete cost it carries an `O(dt^2)`
//! bias. Fourth-order central differences keep the stencil error far below
//! that bias, which makes the bias (and its decay under refinement) visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{cost, gradient};
use crate::instances;
use crate::model::{BilinearModel, ControlField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckConfig {
    pub directions: usize,
    /// Decreasing positive steps.
    pub h_list: Vec<f64>,
    pub seed: u64,
    /// Also compare against the same check on the grid refined by 2.
    pub refine: bool,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self {
            directions: 5,
            h_list: vec![1e-2, 1e-3],
            seed: 0,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckRow {
    pub direction: usize,
    pub h: f64,
    pub finite_difference: f64,
    pub adjoint: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub dt: f64,
    pub error_coarse: f64,
    pub error_fine: f64,
    /// `error_coarse / error_fine`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub dt: f64,
    pub rows: Vec<GradientCheckRow>,
    /// Worst relative error at the smallest `h`.
    pub max_rel_error: f64,
    pub refinement: Option<Refinement>,
}

/// `(-J(e + 2h d) + 8 J(e + h d) - 8 J(e - h d) + J(e - 2h d)) / 12h`
pub fn directional_derivative<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    direction: &ControlField,
    h: f64,
) -> Result<f64> {
    let j = |s: f64| cost(model, &eps.axpy(s, direction));
    Ok((-j(2.0 * h)? + 8.0 * j(h)? - 8.0 * j(-h)? + j(-2.0 * h)?) / (12.0 * h))
}

/// Error relative to the larger of the two derivatives and `||grad J||` (directions have unit
/// norm), so directions nearly orthogonal to the gradient do not inflate it.
fn relative(fd: f64, ad: f64, grad_norm: f64) -> f64 {
    let diff = (fd - ad).abs();
    let scale = fd.abs().max(ad.abs()).max(grad_norm);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn check_rows<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    dirs: &[ControlField],
    h_list: &[f64],
) -> Result<Vec<GradientCheckRow>> {
    let grad = gradient(model, eps)?;
    let grad_norm = grad.field().norm_l2();
    let mut rows = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let ad = grad.field().inner(d);
        for &h in h_list {
            let fd = directional_derivative(model, eps, d, h)?;
            rows.push(GradientCheckRow {
                direction: i,
                h,
                finite_difference: fd,
                adjoint: ad,
                rel_error: relative(fd, ad, grad_norm),
            });
        }
    }
    Ok(rows)
}

fn worst_at(rows: &[GradientCheckRow], h: f64) -> f64 {
    rows.iter().filter(|r| r.h == h).fold(0.0_f64, |m, r| m.max(r.rel_error))
}

/// Compares `<grad J, d>` with finite differences for seeded random unit directions.
pub fn check_gradient<M: BilinearModel>(
    model: &M,
    eps: &ControlField,
    config: &GradientCheckConfig,
) -> Result<GradientCheckReport> {
    eps.ensure_on(model.grid())?;
    if config.h_list.is_empty() || config.h_list.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::invalid("h_list", "needs at least one positive finite step"));
    }
    if config.h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("h_list", "steps must be strictly decreasing"));
    }
    let grid = *model.grid();
    let mut rng = instances::rng(config.seed);
    let dirs: Vec<ControlField> = (0..config.directions)
        .map(|_| instances::random_direction(&mut rng, grid))
        .collect();
    let rows = check_rows(model, eps, &dirs, &config.h_list)?;
    let h_min = *config.h_list.last().expect("nonempty");
    let max_rel_error = worst_at(&rows, h_min);

    let refinement = if config.refine {
        let fine = model.with_grid(grid.refined(2)?)?;
        let eps_f = eps.refined(2)?;
        let dirs_f = dirs.iter().map(|d| d.refined(2)).collect::<Result<Vec<_>>>()?;
        let rows_f = check_rows(&fine, &eps_f, &dirs_f, &[h_min])?;
        let error_fine = worst_at(&rows_f, h_min);
        Some(Refinement {
            dt: grid.dt(),
            error_coarse: max_rel_error,
            error_fine,
            ratio: if error_fine > 0.0 { max_rel_error / error_fine } else { f64::INFINITY },
        })
    } else {
        None
    };

    Ok(GradientCheckReport {
        dt: grid.dt(),
        rows,
        max_rel_error,
        refinement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::c;
    use crate::model::{CMatrix, NLevelModel, TimeGrid};
    use nalgebra::DVector;

    #[test]
    fn uncoupled_model_matches_exactly() {
        let g = TimeGrid::new(1.0, 40).unwrap();
        let h0 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        let m = NLevelModel::new(h0, CMatrix::zeros(2, 2), CMatrix::identity(2, 2), instances::basis_state(2, 0), 0.7, g)
            .unwrap();
        let mut r = instances::rng(1);
        let eps = instances::random_smooth_control(&mut r, g, 1.0);
        let cfg = GradientCheckConfig {
            h_list: vec![1e-1, 1e-2, 1e-3],
            refine: false,
            ..GradientCheckConfig::default()
        };
        let rep = check_gradient(&m, &eps, &cfg).unwrap();
        for row in &rep.rows {
            assert!(row.rel_error < 1e-11, "{row:?}");
        }
    }

    #[test]
    fn two_level_error_is_small_and_shrinks() {
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let m = instances::two_level(1.0, 0.5, g).unwrap();
        let eps = ControlField::from_fn(g, |t| 1.0 + (2.0 * t).sin()).unwrap();
        let rep = check_gradient(&m, &eps, &GradientCheckConfig::default()).unwrap();
        assert!(rep.max_rel_error <= 1e-3, "{rep:?}");
        let refine = rep.refinement.unwrap();
        assert!(refine.error_fine <= 0.6 * refine.error_coarse, "{refine:?}");
    }

    #[test]
    fn rejects_bad_steps() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = instances::two_level(1.0, 0.5, g).unwrap();
        let eps = ControlField::zeros(g);
        let bad = GradientCheckConfig {
            h_list: vec![1e-3, 1e-2],
            ..GradientCheckConfig::default()
        };
        assert!(check_gradient(&m, &eps, &bad).is_err());
        let empty = GradientCheckConfig {
            h_list: vec![],
            ..GradientCheckConfig::default()
        };
        assert!(check_gradient(&m, &eps, &empty).is_err());
    }
}
