use nalgebra::DVector;
use num_complex::Complex64;

use super::linalg::{check_finite_c, check_square, hermitian_defect, hermitian_eigen, CMatrix};
use super::{check_alpha, BilinearModel, HalfStep, State, TimeGrid};
use crate::error::{Error, Result};

/// Terminal observable of a grid model.
#[derive(Debug, Clone)]
pub enum GridObservable {
    /// `|phi><phi|` under the dx-weighted inner product.
    Projector(State),
    /// Dense Hermitian PSD matrix acting on the amplitude vector.
    Matrix(CMatrix),
}

/// Schrodinger equation on `[a, b]` with homogeneous Dirichlet boundaries:
/// `H = -Laplacian_h + V(x)`, 3-point stencil, coupling `mu(x)` acting by multiplication.
///
/// States carry all `m` grid points; the two boundary amplitudes stay zero.
#[derive(Debug, Clone)]
pub struct Grid1DModel {
    lower: f64,
    upper: f64,
    dx: f64,
    potential: Vec<f64>,
    dipole: Vec<f64>,
    observable: GridObservable,
    psi0: State,
    alpha: f64,
    grid: TimeGrid,
    observable_norm: f64,
    mu_norm: f64,
}

impl Grid1DModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lower: f64,
        upper: f64,
        potential: Vec<f64>,
        dipole: Vec<f64>,
        observable: GridObservable,
        psi0: State,
        alpha: f64,
        grid: TimeGrid,
    ) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && upper > lower) {
            return Err(Error::invalid("model.domain", format!("need a < b, got [{lower}, {upper}]")));
        }
        let m = potential.len();
        if m < 3 {
            return Err(Error::invalid("model.potential", format!("need at least 3 grid points, got {m}")));
        }
        if dipole.len() != m {
            return Err(Error::invalid("model.dipole", format!("expected {m} samples, got {}", dipole.len())));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model.potential", "contains non-finite samples"));
        }
        if dipole.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model.dipole", "contains non-finite samples"));
        }
        let dx = (upper - lower) / (m - 1) as f64;
        check_dirichlet(&psi0, m, "model.psi0")?;
        let norm = weighted_norm(&psi0, dx);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("model.psi0", format!("must have unit dx-weighted norm, got {norm}")));
        }
        check_alpha(alpha)?;

        let observable_norm = match &observable {
            GridObservable::Projector(phi) => {
                check_dirichlet(phi, m, "model.observable.projector")?;
                let n = weighted_norm(phi, dx);
                n * n
            }
            GridObservable::Matrix(o) => {
                check_square(o.nrows(), o.ncols(), m, "model.observable.matrix")?;
                check_finite_c(o, "model.observable.matrix")?;
                let defect = hermitian_defect(o);
                if defect > 1e-12 {
                    return Err(Error::invalid(
                        "model.observable.matrix",
                        format!("not Hermitian (defect {defect:e})"),
                    ));
                }
                for k in 0..m {
                    for edge in [0, m - 1] {
                        if o[(edge, k)].norm() > 1e-12 || o[(k, edge)].norm() > 1e-12 {
                            return Err(Error::invalid(
                                "model.observable.matrix",
                                "boundary rows and columns must vanish (Dirichlet)",
                            ));
                        }
                    }
                }
                let (vals, _) = hermitian_eigen(o)?;
                let top = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                let bottom = vals.iter().copied().fold(f64::INFINITY, f64::min);
                if bottom < -1e-12 * top.max(1.0) {
                    return Err(Error::invalid(
                        "model.observable.matrix",
                        format!("must be positive semidefinite (min eigenvalue {bottom:e})"),
                    ));
                }
                top
            }
        };
        let mu_norm = dipole.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(Self {
            lower,
            upper,
            dx,
            potential,
            dipole,
            observable,
            psi0,
            alpha,
            grid,
            observable_norm,
            mu_norm,
        })
    }

    pub fn points(&self) -> usize {
        self.potential.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn positions(&self) -> Vec<f64> {
        positions(self.lower, self.upper, self.points())
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn dipole(&self) -> &[f64] {
        &self.dipole
    }

    /// Applies `H - eps mu` to a grid state (boundaries treated as zero).
    pub fn apply_hamiltonian(&self, eps: f64, x: &State) -> State {
        let m = self.points();
        let inv = 1.0 / (self.dx * self.dx);
        let mut out = State::zeros(m);
        for i in 1..m - 1 {
            let diag = 2.0 * inv + self.potential[i] - eps * self.dipole[i];
            out[i] = x[i] * diag - (x[i - 1] + x[i + 1]) * inv;
        }
        out
    }
}

pub fn positions(lower: f64, upper: f64, m: usize) -> Vec<f64> {
    let dx = (upper - lower) / (m - 1) as f64;
    (0..m).map(|i| if i == m - 1 { upper } else { lower + i as f64 * dx }).collect()
}

/// Gaussian wavepacket `exp(-(x-x0)^2/(2 w^2) + i k0 x)` on `m` points of `[lower, upper]`,
/// with zero boundary amplitudes and unit dx-weighted norm.
pub fn gaussian_packet(lower: f64, upper: f64, m: usize, center: f64, width: f64, k0: f64) -> State {
    let xs = positions(lower, upper, m);
    let dx = (upper - lower) / (m - 1) as f64;
    let mut psi = State::from_iterator(
        m,
        xs.iter().map(|&x| {
            let r = (x - center) / width;
            Complex64::from_polar((-0.5 * r * r).exp(), k0 * x)
        }),
    );
    psi[0] = Complex64::new(0.0, 0.0);
    psi[m - 1] = Complex64::new(0.0, 0.0);
    let n = weighted_norm(&psi, dx);
    psi.unscale_mut(n);
    psi
}

fn weighted_norm(x: &State, dx: f64) -> f64 {
    (dx * x.norm_squared()).sqrt()
}

fn check_dirichlet(x: &State, m: usize, field: &str) -> Result<()> {
    if x.len() != m {
        return Err(Error::invalid(field, format!("expected {m} amplitudes, got {}", x.len())));
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid(field, "contains non-finite entries"));
    }
    if x[0].norm() > 1e-12 || x[m - 1].norm() > 1e-12 {
        return Err(Error::invalid(field, "boundary amplitudes must vanish (Dirichlet)"));
    }
    Ok(())
}

/// Crank-Nicolson (Cayley) step over `dt/2` for the interior tridiagonal system.
///
/// Forward solves `(I + i a K) y = (I - i a K) x` with `a = dt/4`; the adjoint
/// swaps the signs, which is also the exact inverse.
#[derive(Debug, Clone)]
pub struct CrankNicolsonStep {
    /// Diagonal of `K` on interior points.
    diag: Vec<f64>,
    off: f64,
    a: f64,
    forward: Thomas,
    backward: Thomas,
}

#[derive(Debug, Clone)]
struct Thomas {
    /// Modified super-diagonal coefficients.
    upper: Vec<Complex64>,
    /// Reciprocal pivots.
    pivot: Vec<Complex64>,
    off: Complex64,
}

impl Thomas {
    /// Factors `I + s i a K` (tridiagonal, constant off-diagonal).
    fn new(diag: &[f64], off: f64, a: f64, s: f64) -> Self {
        let n = diag.len();
        let ia = Complex64::new(0.0, s * a);
        let lower = ia * off;
        let mut upper = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let d = Complex64::new(1.0, 0.0) + ia * diag[i];
            let denom = if i == 0 { d } else { d - lower * upper[i - 1] };
            pivot[i] = denom.inv();
            upper[i] = lower * pivot[i];
        }
        Self { upper, pivot, off: lower }
    }

    fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        rhs[0] *= self.pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

impl CrankNicolsonStep {
    fn apply(&self, x: &State, s: f64, solver: &Thomas) -> State {
        // rhs = (I - s i a K) x on interior nodes
        let n = self.diag.len();
        let m = n + 2;
        let ia = Complex64::new(0.0, -s * self.a);
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|k| {
                let i = k + 1;
                let kx = x[i] * self.diag[k] + (x[i - 1] + x[i + 1]) * self.off;
                x[i] + ia * kx
            })
            .collect();
        solver.solve(&mut rhs);
        let mut out = State::zeros(m);
        for (k, v) in rhs.into_iter().enumerate() {
            out[k + 1] = v;
        }
        out
    }
}

impl HalfStep for CrankNicolsonStep {
    fn forward(&self, x: &State) -> State {
        self.apply(x, 1.0, &self.forward)
    }

    fn adjoint(&self, x: &State) -> State {
        self.apply(x, -1.0, &self.backward)
    }
}

impl BilinearModel for Grid1DModel {
    type Step = CrankNicolsonStep;

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn dim(&self) -> usize {
        self.points()
    }

    fn initial_state(&self) -> &State {
        &self.psi0
    }

    fn half_step(&self, eps: f64) -> Result<CrankNicolsonStep> {
        if !eps.is_finite() {
            return Err(Error::NonFinite { what: "control", index: 0 });
        }
        let m = self.points();
        let inv = 1.0 / (self.dx * self.dx);
        let diag: Vec<f64> = (1..m - 1)
            .map(|i| 2.0 * inv + self.potential[i] - eps * self.dipole[i])
            .collect();
        let off = -inv;
        let a = 0.25 * self.grid.dt();
        Ok(CrankNicolsonStep {
            forward: Thomas::new(&diag, off, a, 1.0),
            backward: Thomas::new(&diag, off, a, -1.0),
            diag,
            off,
            a,
        })
    }

    fn apply_observable(&self, x: &State) -> State {
        match &self.observable {
            GridObservable::Projector(phi) => phi * self.inner(phi, x),
            GridObservable::Matrix(o) => o * x,
        }
    }

    fn apply_generator(&self, x: &State) -> State {
        let mut out = x.clone();
        let m = out.len();
        for (i, z) in out.iter_mut().enumerate() {
            *z = if i == 0 || i == m - 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.dipole[i]) * *z
            };
        }
        out
    }

    fn apply_generator_adjoint(&self, x: &State) -> State {
        -self.apply_generator(x)
    }

    fn inner(&self, a: &State, b: &State) -> Complex64 {
        a.dotc(b) * self.dx
    }

    fn coupling(&self, chi: &State, psi: &State) -> f64 {
        let m = psi.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..m - 1 {
            acc += chi[i].conj() * psi[i] * self.dipole[i];
        }
        (acc * self.dx).im
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
        "grid1d"
    }

    fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        Ok(Self { grid, ..self.clone() })
    }

    fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }
}

/// Dense matrix of `H - eps mu` on all `m` points (boundary rows zero); test and oracle use.
pub fn dense_hamiltonian(model: &Grid1DModel, eps: f64) -> CMatrix {
    let m = model.points();
    let mut out = CMatrix::zeros(m, m);
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = Complex64::new(1.0, 0.0);
        out.set_column(k, &model.apply_hamiltonian(eps, &e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mu_sup_norm;

    fn model(m: usize) -> Grid1DModel {
        let xs = positions(-5.0, 5.0, m);
        let v: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let mu: Vec<f64> = xs.clone();
        let psi0 = gaussian_packet(-5.0, 5.0, m, -1.0, 0.7, 0.0);
        let target = gaussian_packet(-5.0, 5.0, m, 1.0, 0.7, 0.0);
        Grid1DModel::new(
            -5.0,
            5.0,
            v,
            mu,
            GridObservable::Projector(target),
            psi0,
            1.0,
            TimeGrid::new(1.0, 50).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn dipole_sup_norm() {
        let psi0 = State::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let m = Grid1DModel::new(
            0.0,
            2.0,
            vec![0.0; 3],
            vec![0.5, -2.0, 1.0],
            GridObservable::Projector(psi0.clone()),
            psi0,
            1.0,
            TimeGrid::new(1.0, 4).unwrap(),
        )
        .unwrap();
        assert_eq!(mu_sup_norm(&m), 2.0);
    }

    #[test]
    fn hamiltonian_is_hermitian_under_weighted_product() {
        let m = model(33);
        let h = dense_hamiltonian(&m, 0.4);
        // boundary values are pinned, so only the interior block is an operator
        let inner = h.view((1, 1), (31, 31)).into_owned();
        assert!(hermitian_defect(&inner) < 1e-12);
    }

    #[test]
    fn cayley_step_is_unitary_and_keeps_boundaries() {
        let m = model(65);
        let s = m.half_step(0.8).unwrap();
        let psi = s.full_forward(m.initial_state());
        assert!((m.norm(&psi) - 1.0).abs() < 1e-13);
        assert_eq!(psi[0], Complex64::new(0.0, 0.0));
        assert_eq!(psi[64], Complex64::new(0.0, 0.0));
        let back = s.full_adjoint(&psi);
        assert!((back - m.initial_state()).norm() < 1e-12);
    }

    #[test]
    fn cayley_step_matches_dense_solve() {
        let m = model(17);
        let s = m.half_step(-0.3).unwrap();
        let k = dense_hamiltonian(&m, -0.3);
        let a = 0.25 * m.grid().dt();
        let n = m.points();
        let id = CMatrix::identity(n, n);
        let lhs = &id + k.map(|z| z * Complex64::new(0.0, a));
        let rhs = &id - k.map(|z| z * Complex64::new(0.0, a));
        // boundary rows of lhs are identity, so the dense solve keeps them at zero
        let oracle = lhs.lu().solve(&(rhs * m.initial_state())).unwrap();
        assert!((oracle - s.forward(m.initial_state())).norm() < 1e-12);
    }

    #[test]
    fn rejects_nonzero_boundary() {
        let mut psi0 = gaussian_packet(-5.0, 5.0, 9, 0.0, 1.0, 0.0);
        psi0[0] = Complex64::new(1e-3, 0.0);
        let err = Grid1DModel::new(
            -5.0,
            5.0,
            vec![0.0; 9],
            vec![1.0; 9],
            GridObservable::Projector(psi0.clone()),
            psi0,
            1.0,
            TimeGrid::new(1.0, 4).unwrap(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("Dirichlet"));
    }
}
