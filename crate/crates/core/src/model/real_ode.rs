use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::{
    check_finite_r, check_square, hermitian_min_eigenvalue, spectral_norm, symmetric_defect, to_complex,
    CMatrix,
};
use super::{check_alpha, BilinearModel, HalfStep, State, TimeGrid};
use crate::error::{Error, Result};

/// Real bilinear ODE `y' = (A + v(t) B) y`, payoff `y(T) . C y(T)`.
#[derive(Debug, Clone)]
pub struct RealOdeModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    y0: State,
    alpha: f64,
    grid: TimeGrid,
    c_complex: CMatrix,
    b_complex: CMatrix,
    c_norm: f64,
    b_norm: f64,
}

impl RealOdeModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        y0: DVector<f64>,
        alpha: f64,
        grid: TimeGrid,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::invalid("model.a", "dimension must be positive"));
        }
        for (m, field) in [(&a, "model.a"), (&b, "model.b"), (&c, "model.c")] {
            check_square(m.nrows(), m.ncols(), n, field)?;
            check_finite_r(m, field)?;
        }
        let defect = symmetric_defect(&c);
        if defect > 1e-12 {
            return Err(Error::invalid("model.c", format!("not symmetric (defect {defect:e})")));
        }
        if y0.len() != n {
            return Err(Error::invalid("model.y0", format!("expected {n} entries, got {}", y0.len())));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model.y0", "contains non-finite entries"));
        }
        check_alpha(alpha)?;

        let c_complex = to_complex(&c);
        let c_norm = spectral_norm(&c)?;
        let min_eig = hermitian_min_eigenvalue(&c_complex)?;
        if min_eig < -1e-12 * c_norm.max(1.0) {
            return Err(Error::invalid(
                "model.c",
                format!("must be positive semidefinite (min eigenvalue {min_eig:e})"),
            ));
        }
        let b_norm = spectral_norm(&b)?;
        Ok(Self {
            b_complex: to_complex(&b),
            y0: y0.map(|v| Complex64::new(v, 0.0)),
            a,
            b,
            c,
            alpha,
            grid,
            c_complex,
            c_norm,
            b_norm,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `A + v B`
    pub fn generator(&self, v: f64) -> DMatrix<f64> {
        &self.a + &self.b * v
    }
}

/// `exp((dt/2) (A + v B))`, real, stored for complex application.
#[derive(Debug, Clone)]
pub struct RealOdeStep {
    propagator: CMatrix,
}

impl HalfStep for RealOdeStep {
    fn forward(&self, x: &State) -> State {
        &self.propagator * x
    }

    fn adjoint(&self, x: &State) -> State {
        // real matrix: the adjoint is the transpose
        self.propagator.ad_mul(x)
    }
}

impl BilinearModel for RealOdeModel {
    type Step = RealOdeStep;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn initial_state(&self) -> &State {
        &self.y0
    }

    fn half_step(&self, eps: f64) -> Result<RealOdeStep> {
        if !eps.is_finite() {
            return Err(Error::NonFinite { what: "control", index: 0 });
        }
        let e = (self.generator(eps) * (0.5 * self.grid.dt())).exp();
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix exponential overflowed".into()));
        }
        Ok(RealOdeStep {
            propagator: to_complex(&e),
        })
    }

    fn apply_observable(&self, x: &State) -> State {
        &self.c_complex * x
    }

    fn apply_generator(&self, x: &State) -> State {
        &self.b_complex * x
    }

    fn apply_generator_adjoint(&self, x: &State) -> State {
        self.b_complex.ad_mul(x)
    }

    fn observable_norm(&self) -> f64 {
        self.c_norm
    }

    fn coupling_norm(&self) -> f64 {
        self.b_norm
    }

    fn is_unitary(&self) -> bool {
        false
    }

    fn kind(&self) -> &'static str {
        "real_ode"
    }

    fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Ok(Self { grid, ..self.clone() })
    }

    fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 20).unwrap()
    }

    #[test]
    fn coupling_is_minus_z_dot_by() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.5, 0.0]);
        let c = DMatrix::identity(2, 2);
        let m = RealOdeModel::new(a, b.clone(), c, DVector::from_vec(vec![1.0, 0.0]), 1.0, grid()).unwrap();
        let y = DVector::from_vec(vec![Complex64::new(0.3, 0.0), Complex64::new(-1.0, 0.0)]);
        let z = DVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0)]);
        let by = &b * DVector::from_vec(vec![0.3, -1.0]);
        let expected = -(2.0 * by[0] + 0.5 * by[1]);
        assert!((m.coupling(&z, &y) - expected).abs() < 1e-14);
        assert!((m.coupling_norm() - spectral_norm(&b).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_payoff() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = RealOdeModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            c,
            DVector::from_vec(vec![1.0, 0.0]),
            1.0,
            grid(),
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("model.c"));
    }

    #[test]
    fn adjoint_step_preserves_pairing() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.2, 1.0, -1.0, 0.1]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.3, 0.0]);
        let m = RealOdeModel::new(a, b, DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0]), 1.0, grid())
            .unwrap();
        let s = m.half_step(0.4).unwrap();
        let y = m.initial_state().clone();
        let z = DVector::from_vec(vec![Complex64::new(0.2, 0.0), Complex64::new(-0.7, 0.0)]);
        let lhs = z.dotc(&s.full_forward(&y));
        let rhs = s.full_adjoint(&z).dotc(&y);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
