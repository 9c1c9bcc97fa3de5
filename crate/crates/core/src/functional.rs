//! Cost functional, adjoint gradient, criticality residual and Hessian-vector products.
//!
//! The gradient is the continuous formula `-2 (alpha eps(t) + Im <chi(t)|mu|psi(t)>)`
//! sampled once per interval at its midpoint, with `psi` and `chi` taken from the
//! half-step samples of the propagators. It is not the exact derivative of the
//! discretized cost; the difference is a second-order time-discretization bias.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{uniqueness_threshold, BilinearModel, ControlField};
use crate::propagate::{
    adjoint_with, forward_with, linearized_adjoint_with, linearized_with, Propagators, StateTrajectory,
};

pub const DEFAULT_CRITICAL_TOL: f64 = 1e-6;

/// `t -> nabla J(eps)(t)`, one value per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField(pub ControlField);

impl GradientField {
    pub fn field(&self) -> &ControlField {
        &self.0
    }

    pub fn into_field(self) -> ControlField {
        self.0
    }
}

/// Membership test for the critical set `alpha eps + Im <chi|mu|psi> = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub residual_l2: f64,
    pub residual_linf: f64,
    pub tolerance: f64,
    pub is_critical: bool,
}

/// State, costate and cost at one control, reusable across gradient and Hessian evaluations.
pub struct Evaluation<M: BilinearModel + ?Sized> {
    pub props: Propagators<M::Step>,
    pub psi: StateTrajectory,
    pub chi: StateTrajectory,
    pub cost: f64,
}

pub fn evaluate<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<Evaluation<M>> {
    let props = Propagators::build(model, eps)?;
    let psi = forward_with(model, &props);
    let chi = adjoint_with(model, &props, model.apply_observable(psi.terminal()));
    let cost = model.payoff(psi.terminal()) - model.alpha() * eps.inner(eps);
    Ok(Evaluation { props, psi, chi, cost })
}

/// Midpoint samples of the coupling `Im <chi|mu|psi>` on each interval.
pub fn coupling_samples<M: BilinearModel + ?Sized>(
    model: &M,
    psi: &StateTrajectory,
    chi: &StateTrajectory,
) -> Vec<f64> {
    (0..psi.mids().len())
        .map(|j| model.coupling(chi.mid(j), psi.mid(j)))
        .collect()
}

/// `J(eps) = <psi(T)|O|psi(T)> - alpha ||eps||^2`.
pub fn cost<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<f64> {
    let props = Propagators::build(model, eps)?;
    let psi = forward_with(model, &props);
    Ok(model.payoff(psi.terminal()) - model.alpha() * eps.inner(eps))
}

pub fn gradient<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<GradientField> {
    let eval = evaluate(model, eps)?;
    Ok(gradient_from(model, eps, &eval.psi, &eval.chi))
}

/// Gradient from precomputed trajectories (`chi` must solve the costate equation for `eps`).
pub fn gradient_from<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    psi: &StateTrajectory,
    chi: &StateTrajectory,
) -> GradientField {
    let alpha = model.alpha();
    let values = coupling_samples(model, psi, chi)
        .into_iter()
        .zip(eps.values())
        .map(|(c, e)| -2.0 * (alpha * e + c))
        .collect();
    GradientField(ControlField::from_raw(*eps.grid(), values))
}

/// Stationarity residual field `alpha eps + Im <chi|mu|psi>`.
pub fn residual_field<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<ControlField> {
    let eval = evaluate(model, eps)?;
    let alpha = model.alpha();
    let values = coupling_samples(model, &eval.psi, &eval.chi)
        .into_iter()
        .zip(eps.values())
        .map(|(c, e)| alpha * e + c)
        .collect();
    Ok(ControlField::from_raw(*eps.grid(), values))
}

pub fn critical_residual<M: BilinearModel + ?Sized>(model: &M, eps: &ControlField) -> Result<CriticalityReport> {
    critical_residual_with_tol(model, eps, DEFAULT_CRITICAL_TOL)
}

pub fn critical_residual_with_tol<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    tolerance: f64,
) -> Result<CriticalityReport> {
    let r = residual_field(model, eps)?;
    let residual_l2 = r.norm_l2();
    Ok(CriticalityReport {
        residual_l2,
        residual_linf: r.norm_linf(),
        tolerance,
        is_critical: residual_l2 <= tolerance,
    })
}

/// `H_J(eps)[deps] = -2 (alpha deps + Im <chi'|mu|psi> + Im <chi|mu|psi'>)`, where
/// `psi'` solves the linearized state equation and `chi'` the linearized costate
/// equation with terminal value `O psi'(T)`.
pub fn hessian_vector<M: BilinearModel + ?Sized>(
    model: &M,
    eps: &ControlField,
    deps: &ControlField,
) -> Result<ControlField> {
    deps.ensure_on(model.grid())?;
    let eval = evaluate(model, eps)?;
    Ok(hessian_vector_with(model, &eval, deps))
}

pub fn hessian_vector_with<M: BilinearModel + ?Sized>(
    model: &M,
    eval: &Evaluation<M>,
    deps: &ControlField,
) -> ControlField {
    let psi_lin = linearized_with(model, &eval.props, deps, &eval.psi);
    let terminal = model.apply_observable(psi_lin.terminal());
    let chi_lin = linearized_adjoint_with(model, &eval.props, deps, &eval.chi, terminal);
    let alpha = model.alpha();
    let values = (0..deps.len())
        .map(|j| {
            let dc = model.coupling(chi_lin.mid(j), eval.psi.mid(j)) + model.coupling(eval.chi.mid(j), psi_lin.mid(j));
            -2.0 * (alpha * deps.values()[j] + dc)
        })
        .collect();
    ControlField::from_raw(*deps.grid(), values)
}

/// `alpha - 6 T ||mu||^2 ||O||_*`; a positive margin guarantees an invertible Hessian everywhere.
pub fn hessian_invertibility_margin<M: BilinearModel + ?Sized>(model: &M) -> f64 {
    model.alpha() - uniqueness_threshold(model)
}

/// CSV `t,value` with `t` at interval midpoints.
pub fn write_field_csv<W: Write>(field: &ControlField, header: &str, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,{header}")?;
    for (j, v) in field.values().iter().enumerate() {
        writeln!(out, "{},{}", field.grid().midpoint(j), v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{self, c};
    use crate::model::{CMatrix, NLevelModel, TimeGrid};
    use nalgebra::DVector;

    fn decoupled(alpha: f64) -> NLevelModel {
        let h0 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(0.7, 0.0)]));
        let psi0 = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        NLevelModel::new(h0, CMatrix::zeros(2, 2), CMatrix::identity(2, 2), psi0, alpha, TimeGrid::new(1.0, 50).unwrap())
            .unwrap()
    }

    #[test]
    fn decoupled_cost_is_norm_minus_penalty() {
        let m = decoupled(0.3);
        let mut r = instances::rng(2);
        let eps = instances::random_rough_control(&mut r, *m.grid(), 2.0);
        let j = cost(&m, &eps).unwrap();
        assert!((j - (1.0 - 0.3 * eps.norm_l2().powi(2))).abs() < 1e-10);
    }

    #[test]
    fn perfect_overlap_with_free_evolution() {
        let g = TimeGrid::new(1.3, 40).unwrap();
        let h0 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(2.0, 0.0)]));
        let psi0 = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let free = (h0.map(|z| z * c(0.0, -1.3))).exp() * &psi0;
        let proj = &free * free.adjoint();
        let m = NLevelModel::new(h0, instances::pauli_x(), proj, psi0, 1.0, g).unwrap();
        let j = cost(&m, &ControlField::zeros(g)).unwrap();
        assert!((j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_control_cost_matches_dense_exponential() {
        let g = TimeGrid::new(2.0, 400).unwrap();
        let m = instances::two_level(1.0, 0.5, g).unwrap();
        let eps = ControlField::constant(g, 0.3);
        let k = m.hamiltonian(0.3).map(|z| z * c(0.0, -2.0));
        let psi_t = k.exp() * m.initial_state();
        let oracle = (psi_t.adjoint() * m.observable() * &psi_t)[(0, 0)].re - 0.5 * 0.09 * 2.0;
        assert!((cost(&m, &eps).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn decoupled_gradient_and_hessian() {
        let m = decoupled(0.8);
        let mut r = instances::rng(3);
        let eps = instances::random_rough_control(&mut r, *m.grid(), 1.0);
        let g = gradient(&m, &eps).unwrap();
        for (gj, ej) in g.field().values().iter().zip(eps.values()) {
            assert_eq!(*gj, -2.0 * 0.8 * ej);
        }
        let d = instances::random_rough_control(&mut r, *m.grid(), 1.0);
        let h = hessian_vector(&m, &eps, &d).unwrap();
        for (hj, dj) in h.values().iter().zip(d.values()) {
            assert_eq!(*hj, -2.0 * 0.8 * dj);
        }
    }

    #[test]
    fn zero_control_without_coupling_is_critical() {
        let m = decoupled(1.0);
        let rep = critical_residual(&m, &ControlField::zeros(*m.grid())).unwrap();
        assert_eq!(rep.residual_l2, 0.0);
        assert!(rep.is_critical);
    }

    #[test]
    fn residual_is_half_the_gradient() {
        let g = TimeGrid::new(1.0, 80).unwrap();
        let m = instances::two_level(1.0, 0.7, g).unwrap();
        let mut r = instances::rng(4);
        let eps = instances::random_smooth_control(&mut r, g, 1.0);
        let grad = gradient(&m, &eps).unwrap();
        let rep = critical_residual(&m, &eps).unwrap();
        assert!((rep.residual_l2 - grad.field().norm_l2() / 2.0).abs() <= 1e-15 * (1.0 + rep.residual_l2));
        assert!((rep.residual_linf - grad.field().norm_linf() / 2.0).abs() <= 1e-15 * (1.0 + rep.residual_linf));
        assert!(!rep.is_critical);
    }

    #[test]
    fn residual_matches_inline_recomputation() {
        let g = TimeGrid::new(1.0, 60).unwrap();
        let m = instances::two_level(1.3, 0.9, g).unwrap();
        let mut r = instances::rng(5);
        let eps = instances::random_smooth_control(&mut r, g, 1.5);
        let rep = critical_residual(&m, &eps).unwrap();
        // recompute with explicit matrix exponentials at the interval midpoints
        let dt = g.dt();
        let mut psi = m.initial_state().clone();
        let mut psi_mid = Vec::new();
        let mut halves = Vec::new();
        for &e in eps.values() {
            let u = m.hamiltonian(e).map(|z| z * c(0.0, -0.5 * dt)).exp();
            let mid = &u * &psi;
            psi = &u * &mid;
            psi_mid.push(mid);
            halves.push(u);
        }
        let mut chi = m.observable() * &psi;
        let mut sq = 0.0;
        for j in (0..g.intervals()).rev() {
            let mid = halves[j].adjoint() * &chi;
            chi = halves[j].adjoint() * &mid;
            let im = (mid.adjoint() * m.mu() * &psi_mid[j])[(0, 0)].im;
            let res = 0.9 * eps.values()[j] + im;
            sq += dt * res * res;
        }
        assert!((rep.residual_l2 - sq.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn margin_formula() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = instances::two_level(1.0, 10.0, g).unwrap();
        assert!((hessian_invertibility_margin(&m) - 4.0).abs() < 1e-13);
        let at = m.with_alpha(6.0).unwrap();
        assert!(hessian_invertibility_margin(&at).abs() < 1e-13);
    }

    #[test]
    fn hessian_is_linear_in_direction() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let m = instances::two_level(1.0, 0.5, g).unwrap();
        let mut r = instances::rng(6);
        let eps = instances::random_smooth_control(&mut r, g, 1.0);
        let u = instances::random_smooth_control(&mut r, g, 1.0);
        let w = instances::random_smooth_control(&mut r, g, 1.0);
        let eval = evaluate(&m, &eps).unwrap();
        let hu = hessian_vector_with(&m, &eval, &u);
        let hw = hessian_vector_with(&m, &eval, &w);
        let combo = hessian_vector_with(&m, &eval, &u.scaled(2.0).add(&w.scaled(-0.5)));
        let expected = hu.scaled(2.0).add(&hw.scaled(-0.5));
        assert!(combo.distance_l2(&expected) < 1e-12);
    }
}
