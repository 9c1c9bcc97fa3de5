use num_complex::Complex64;

use super::linalg::{
    check_finite_c, check_square, hermitian_defect, hermitian_eigen, hermitian_min_eigenvalue,
    hermitian_spectral_norm, CMatrix,
};
use super::{check_alpha, BilinearModel, HalfStep, State, TimeGrid};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-12;

/// Finite-dimensional Schrodinger model `i psi' = (H0 - eps(t) mu) psi`
/// with terminal observable `O`.
#[derive(Debug, Clone)]
pub struct NLevelModel {
    h0: CMatrix,
    mu: CMatrix,
    observable: CMatrix,
    psi0: State,
    alpha: f64,
    grid: TimeGrid,
    observable_norm: f64,
    mu_norm: f64,
}

impl NLevelModel {
    pub fn new(
        h0: CMatrix,
        mu: CMatrix,
        observable: CMatrix,
        psi0: State,
        alpha: f64,
        grid: TimeGrid,
    ) -> Result<Self> {
        let n = h0.nrows();
        if n == 0 {
            return Err(Error::invalid("model.h0", "dimension must be positive"));
        }
        for (m, field) in [(&h0, "model.h0"), (&mu, "model.mu"), (&observable, "model.observable")] {
            check_square(m.nrows(), m.ncols(), n, field)?;
            check_finite_c(m, field)?;
            let defect = hermitian_defect(m);
            if defect > HERMITIAN_TOL {
                return Err(Error::invalid(field, format!("not Hermitian (defect {defect:e})")));
            }
        }
        if psi0.len() != n {
            return Err(Error::invalid(
                "model.psi0",
                format!("expected {n} amplitudes, got {}", psi0.len()),
            ));
        }
        let norm = psi0.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::invalid("model.psi0", format!("must have unit norm, got {norm}")));
        }
        check_alpha(alpha)?;

        let observable_norm = hermitian_spectral_norm(&observable)?;
        let min_eig = hermitian_min_eigenvalue(&observable)?;
        if min_eig < -1e-12 * observable_norm.max(1.0) {
            return Err(Error::invalid(
                "model.observable",
                format!("must be positive semidefinite (min eigenvalue {min_eig:e})"),
            ));
        }
        let mu_norm = hermitian_spectral_norm(&mu)?;
        Ok(Self {
            h0,
            mu,
            observable,
            psi0,
            alpha,
            grid,
            observable_norm,
            mu_norm,
        })
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn mu(&self) -> &CMatrix {
        &self.mu
    }

    pub fn observable(&self) -> &CMatrix {
        &self.observable
    }

    /// `H0 - eps mu`
    pub fn hamiltonian(&self, eps: f64) -> CMatrix {
        &self.h0 - self.mu.map(|z| z * eps)
    }
}

/// `exp(-i (dt/2) (H0 - eps mu))` assembled from a Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct NLevelStep {
    unitary: CMatrix,
}

impl HalfStep for NLevelStep {
    fn forward(&self, x: &State) -> State {
        &self.unitary * x
    }

    fn adjoint(&self, x: &State) -> State {
        self.unitary.ad_mul(x)
    }
}

impl BilinearModel for NLevelModel {
    type Step = NLevelStep;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn dim(&self) -> usize {
        self.h0.nrows()
    }

    fn initial_state(&self) -> &State {
        &self.psi0
    }

    fn half_step(&self, eps: f64) -> Result<NLevelStep> {
        if !eps.is_finite() {
            return Err(Error::NonFinite { what: "control", index: 0 });
        }
        let (vals, vecs) = hermitian_eigen(&self.hamiltonian(eps))?;
        let h = 0.5 * self.grid.dt();
        let mut scaled = vecs.clone();
        for (k, lambda) in vals.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * h);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
        Ok(NLevelStep {
            unitary: scaled * vecs.adjoint(),
        })
    }

    fn apply_observable(&self, x: &State) -> State {
        &self.observable * x
    }

    fn apply_generator(&self, x: &State) -> State {
        (&self.mu * x) * Complex64::i()
    }

    fn apply_generator_adjoint(&self, x: &State) -> State {
        (&self.mu * x) * (-Complex64::i())
    }

    fn coupling(&self, chi: &State, psi: &State) -> f64 {
        chi.dotc(&(&self.mu * psi)).im
    }

    fn observable_norm(&self) -> f64 {
        self.observable_norm
    }

    fn coupling_norm(&self) -> f64 {
        self.mu_norm
    }

    fn is_unitary(&self) -> bool {
        true
    }

    fn kind(&self) -> &'static str {
        "nlevel"
    }

    fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Ok(Self { grid, ..self.clone() })
    }

    fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }
}
