//! Seeded generators for random model instances and a few canonical models.
//!
//! All randomness goes through [`rng`], a ChaCha8 stream, so instances are
//! reproducible across platforms for a fixed seed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{
    gaussian_packet, CMatrix, ControlField, Grid1DModel, GridObservable, NLevelModel, RealOdeModel, State,
    TimeGrid,
};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

/// `|k><k|` in dimension `n`.
pub fn basis_projector(n: usize, k: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n, n);
    p[(k, k)] = c(1.0, 0.0);
    p
}

pub fn basis_state(n: usize, k: usize) -> State {
    let mut s = State::zeros(n);
    s[k] = c(1.0, 0.0);
    s
}

/// Hermitian matrix with entries of modulus at most about 1.
pub fn random_hermitian(rng: &mut Rng, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..n {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `A^dagger A / n` for a random `A`: positive semidefinite.
pub fn random_psd(rng: &mut Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let p = a.adjoint() * a / c(n as f64, 0.0);
    // symmetrize away roundoff
    (&p + p.adjoint()) * c(0.5, 0.0)
}

pub fn random_unit_state(rng: &mut Rng, n: usize) -> State {
    let v = State::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v.unscale(norm)
}

/// Smooth random control: a short random Fourier series of amplitude about `amplitude`.
pub fn random_smooth_control(rng: &mut Rng, grid: TimeGrid, amplitude: f64) -> ControlField {
    let modes = 4;
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let horizon = grid.horizon();
    let scale = amplitude / modes as f64;
    ControlField::from_fn(grid, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = std::f64::consts::PI * (k + 1) as f64 * t / horizon;
                scale * (a * w.cos() + b * w.sin())
            })
            .sum()
    })
    .expect("finite control")
}

/// Independent uniform value on each interval.
pub fn random_rough_control(rng: &mut Rng, grid: TimeGrid, amplitude: f64) -> ControlField {
    let values = (0..grid.intervals())
        .map(|_| amplitude * rng.random_range(-1.0..1.0))
        .collect();
    ControlField::new(grid, values).expect("finite control")
}

/// Unit-L2 random direction.
pub fn random_direction(rng: &mut Rng, grid: TimeGrid) -> ControlField {
    let d = random_smooth_control(rng, grid, 1.0);
    let n = d.norm_l2();
    d.scaled(1.0 / n)
}

/// Two-level system `H0 = diag(0, gap)`, `mu = Pauli-X`, start in |0>, target |1>.
pub fn two_level(gap: f64, alpha: f64, grid: TimeGrid) -> Result<NLevelModel> {
    let h0 = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(gap, 0.0)]));
    NLevelModel::new(h0, pauli_x(), basis_projector(2, 1), basis_state(2, 0), alpha, grid)
}

/// Random N-level instance: Hermitian `H0` and `mu`, PSD observable, random unit `psi0`.
pub fn random_nlevel(rng: &mut Rng, n: usize, alpha: f64, grid: TimeGrid) -> Result<NLevelModel> {
    let h0 = random_hermitian(rng, n);
    let mu = random_hermitian(rng, n);
    let o = random_psd(rng, n);
    let psi0 = random_unit_state(rng, n);
    NLevelModel::new(h0, mu, o, psi0, alpha, grid)
}

/// Ladder model: `H0 = diag(0, 1, ..., n-1)`, nearest-neighbour dipole, start in |0>, target |n-1>.
pub fn ladder(n: usize, alpha: f64, grid: TimeGrid) -> Result<NLevelModel> {
    let h0 = CMatrix::from_diagonal(&DVector::from_fn(n, |k, _| c(k as f64, 0.0)));
    let mut mu = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let w = ((k + 1) as f64).sqrt() / (n as f64).sqrt();
        mu[(k, k + 1)] = c(w, 0.0);
        mu[(k + 1, k)] = c(w, 0.0);
    }
    NLevelModel::new(h0, mu, basis_projector(n, n - 1), basis_state(n, 0), alpha, grid)
}

/// Harmonic well on `[-L, L]`, linear dipole, packet displaced from `-shift` to `+shift`.
pub fn harmonic_grid(m: usize, half_width: f64, shift: f64, alpha: f64, grid: TimeGrid) -> Result<Grid1DModel> {
    let xs = crate::model::grid1d_positions(-half_width, half_width, m);
    let potential = xs.iter().map(|x| 0.5 * x * x).collect();
    let dipole = xs.iter().map(|x| x / half_width).collect();
    let psi0 = gaussian_packet(-half_width, half_width, m, -shift, 1.0, 0.0);
    let target = gaussian_packet(-half_width, half_width, m, shift, 1.0, 0.0);
    Grid1DModel::new(
        -half_width,
        half_width,
        potential,
        dipole,
        GridObservable::Projector(target),
        psi0,
        alpha,
        grid,
    )
}

/// Random real ODE with a mildly damped drift and PSD payoff.
pub fn random_real_ode(rng: &mut Rng, n: usize, alpha: f64, grid: TimeGrid) -> Result<RealOdeModel> {
    let skew = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = (&skew - skew.transpose()) * 0.5 - DMatrix::identity(n, n) * 0.1;
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let cm = (g.transpose() * &g) / n as f64;
    let cm = (&cm + cm.transpose()) * 0.5;
    let y0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let y0 = &y0 / y0.norm();
    RealOdeModel::new(a, b, cm, y0, alpha, grid)
}
