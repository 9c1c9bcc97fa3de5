//! Randomized properties of the propagators, the functional and the scheme.

use approx::assert_relative_eq;
use proptest::prelude::*;

use bilinear_monotonic::functional::{cost, gradient, hessian_vector};
use bilinear_monotonic::instances;
use bilinear_monotonic::model::NLevelModel;
use bilinear_monotonic::propagate::{propagate_adjoint, propagate_forward, propagate_linearized};
use bilinear_monotonic::scheme::{
    read_convergence_csv, run_monotonic, write_convergence_csv, SchemeParams,
};
use bilinear_monotonic::{BilinearModel, ControlField, TimeGrid};

fn instance(seed: u64, n: usize, alpha: f64, intervals: usize) -> (NLevelModel, ControlField) {
    let g = TimeGrid::new(1.5, intervals).unwrap();
    let mut rng = instances::rng(seed);
    let m = instances::random_nlevel(&mut rng, n, alpha, g).unwrap();
    let eps = instances::random_smooth_control(&mut rng, g, 1.0);
    (m, eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_preserves_norms(seed in any::<u64>(), n in 2usize..=8, amp in 0.1f64..5.0) {
        let g = TimeGrid::new(2.0, 150).unwrap();
        let mut rng = instances::rng(seed);
        let m = instances::random_nlevel(&mut rng, n, 1.0, g).unwrap();
        let eps = instances::random_rough_control(&mut rng, g, amp);
        let psi = propagate_forward(&m, &eps).unwrap();
        prop_assert!(psi.norm_drift(&m) <= 1e-10);
        let chi = propagate_adjoint(&m, &eps, &m.apply_observable(psi.terminal())).unwrap();
        prop_assert!(chi.norm_drift(&m) <= 1e-10);
    }

    #[test]
    fn linearized_state_is_linear_in_the_perturbation(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (m, eps) = instance(seed, 3, 1.0, 80);
        let mut rng = instances::rng(seed ^ 1);
        let d1 = instances::random_rough_control(&mut rng, *m.grid(), 1.0);
        let d2 = instances::random_rough_control(&mut rng, *m.grid(), 1.0);
        let psi = propagate_forward(&m, &eps).unwrap();
        let l1 = propagate_linearized(&m, &eps, &d1, &psi).unwrap();
        let l2 = propagate_linearized(&m, &eps, &d2, &psi).unwrap();
        let combo = d1.scaled(a).add(&d2.scaled(b));
        let lc = propagate_linearized(&m, &eps, &combo, &psi).unwrap();
        let expect = l1.terminal() * num_complex::Complex64::new(a, 0.0) + l2.terminal() * num_complex::Complex64::new(b, 0.0);
        prop_assert!((lc.terminal() - expect).norm() <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn cost_is_payoff_minus_penalty(seed in any::<u64>(), alpha in 0.01f64..10.0) {
        let (m, eps) = instance(seed, 4, alpha, 60);
        let psi = propagate_forward(&m, &eps).unwrap();
        let expect = m.payoff(psi.terminal()) - alpha * eps.norm_l2().powi(2);
        assert_relative_eq!(cost(&m, &eps).unwrap(), expect, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn j_never_drops_by_more_than_the_identity_residual(
        seed in any::<u64>(),
        n in 2usize..=5,
        delta in 0.05f64..1.95,
        eta in 0.0f64..1.95,
        alpha in 0.05f64..5.0,
    ) {
        let (m, eps) = instance(seed, n, alpha, 100);
        let p = SchemeParams::new(delta, eta).unwrap().with_max_iter(8).with_tolerances(0.0, 0.0);
        let log = run_monotonic(&m, &p, &eps).unwrap();
        let mut prev = log.initial_j;
        for r in &log.records {
            prop_assert!(r.j - prev >= -r.identity_residual - 1e-14, "k={} dJ={} res={}", r.k, r.j - prev, r.identity_residual);
            prev = r.j;
        }
    }

    #[test]
    fn controls_stay_below_the_a_priori_bound(seed in any::<u64>(), delta in 0.1f64..1.9, eta in 0.0f64..1.9, alpha in 0.05f64..2.0) {
        let (m, eps) = instance(seed, 3, alpha, 80);
        let p = SchemeParams::new(delta, eta).unwrap().with_max_iter(10).with_tolerances(0.0, 0.0);
        let log = run_monotonic(&m, &p, &eps).unwrap();
        let bound = bilinear_monotonic::scheme::control_bound_m(&m, &p, &eps).unwrap();
        prop_assert!(log.max_eps_linf() <= bound + 1e-8, "{} > {}", log.max_eps_linf(), bound);
    }

    #[test]
    fn convergence_log_round_trips(seed in any::<u64>()) {
        let (m, eps) = instance(seed, 2, 0.5, 40);
        let p = SchemeParams::new(0.7, 1.3).unwrap().with_max_iter(5).with_tolerances(0.0, 0.0);
        let log = run_monotonic(&m, &p, &eps).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(&log.records, &mut buf).unwrap();
        let back = read_convergence_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), log.records.len());
        for (a, b) in back.iter().zip(&log.records) {
            prop_assert_eq!(a.k, b.k);
            prop_assert_eq!(a.j.to_bits(), b.j.to_bits());
            prop_assert_eq!(a.grad_residual.to_bits(), b.grad_residual.to_bits());
        }
    }
}

#[test]
fn penalty_only_gradient_is_exact() {
    // with O = 0 the cost is -alpha ||eps||^2 and its gradient -2 alpha eps
    let g = TimeGrid::new(1.0, 50).unwrap();
    let m = instances::two_level(1.0, 0.7, g).unwrap();
    let zero_o = NLevelModel::new(
        m.h0().clone(),
        m.mu().clone(),
        bilinear_monotonic::model::CMatrix::zeros(2, 2),
        m.initial_state().clone(),
        0.7,
        g,
    )
    .unwrap();
    let eps = ControlField::from_fn(g, |t| (5.0 * t).sin()).unwrap();
    let grad = gradient(&zero_o, &eps).unwrap();
    for (gv, e) in grad.field().values().iter().zip(eps.values()) {
        assert_relative_eq!(*gv, -1.4 * e, epsilon = 1e-14);
    }
}

#[test]
fn hessian_is_symmetric_and_matches_gradient_differences() {
    let (m, eps) = instance(77, 3, 0.3, 800);
    let mut rng = instances::rng(78);
    let d1 = instances::random_direction(&mut rng, *m.grid());
    let d2 = instances::random_direction(&mut rng, *m.grid());
    let h1 = hessian_vector(&m, &eps, &d1).unwrap();
    let h2 = hessian_vector(&m, &eps, &d2).unwrap();
    let (a, b) = (d2.inner(&h1), d1.inner(&h2));
    assert!((a - b).abs() <= 1e-4 * (a.abs() + b.abs() + h1.norm_l2()), "{a} vs {b}");

    let h = 1e-4;
    let gp = gradient(&m, &eps.axpy(h, &d1)).unwrap().into_field();
    let gm = gradient(&m, &eps.axpy(-h, &d1)).unwrap().into_field();
    let fd = gp.sub(&gm).scaled(0.5 / h);
    let err = fd.distance_l2(&h1) / h1.norm_l2();
    assert!(err <= 1e-3, "relative error {err}");
}

#[test]
fn hessian_symmetry_defect_shrinks_with_dt() {
    let defect = |intervals: usize| {
        let (m, eps) = instance(91, 3, 0.3, intervals);
        let mut rng = instances::rng(92);
        let d1 = instances::random_smooth_control(&mut rng, *m.grid(), 1.0);
        let d2 = instances::random_smooth_control(&mut rng, *m.grid(), 1.0);
        let h1 = hessian_vector(&m, &eps, &d1).unwrap();
        let h2 = hessian_vector(&m, &eps, &d2).unwrap();
        (d2.inner(&h1) - d1.inner(&h2)).abs()
    };
    let coarse = defect(100);
    let fine = defect(200);
    assert!(coarse < 1e-12 || fine <= 0.6 * coarse, "{coarse} -> {fine}");
}
