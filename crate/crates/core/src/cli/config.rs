//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "type": "nlevel", "h0": [[[0,0],[0,0]],[[0,0],[1,0]]], "mu": ..., "observable": ..., "psi0": [[1,0],[0,0]] },
//!   "grid": { "T": 1.0, "N": 200 },
//!   "scheme": { "delta": 1.0, "eta": 1.0, "alpha": 2.0, "max_iter": 500, "tol_dj": 1e-10, "tol_de": 1e-8 },
//!   "init_control": { "constant": 0.5 },
//!   "seed": 7,
//!   "output": "runs/two_level"
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs; complex matrices are arrays of rows.
//! Real ODE models take plain nested number arrays. Grid models accept either
//! explicit samples or small generator specs (`harmonic`, `linear`, `gaussian`).

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances;
use crate::model::{
    gaussian_packet, grid1d_positions, AnyModel, CMatrix, ControlField, Grid1DModel, GridObservable, NLevelModel,
    RealOdeModel, State, TimeGrid,
};
use crate::scheme::{Resolution, SchemeParams};

pub type Complex = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub init_control: InitControl,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub eta: f64,
    pub alpha: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol_dj")]
    pub tol_dj: f64,
    #[serde(default = "default_tol_de")]
    pub tol_de: f64,
    #[serde(default)]
    pub resolution: Resolution,
}

fn one() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    SchemeParams::default().max_iter
}
fn default_tol_dj() -> f64 {
    SchemeParams::default().tol_dj
}
fn default_tol_de() -> f64 {
    SchemeParams::default().tol_de
}

impl SchemeConfig {
    pub fn params(&self) -> Result<SchemeParams> {
        let p = SchemeParams {
            delta: self.delta,
            eta: self.eta,
            max_iter: self.max_iter,
            tol_dj: self.tol_dj,
            tol_de: self.tol_de,
            resolution: self.resolution,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Nlevel {
        h0: Vec<Vec<Complex>>,
        mu: Vec<Vec<Complex>>,
        observable: Vec<Vec<Complex>>,
        psi0: Vec<Complex>,
    },
    RealOde {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        y0: Vec<f64>,
    },
    Grid1d {
        domain: [f64; 2],
        points: usize,
        potential: Samples,
        dipole: Samples,
        psi0: StateSpec,
        observable: GridObservableConfig,
    },
}

/// Real samples on the spatial grid, explicit or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Values(Vec<f64>),
    Generated(SampleSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSpec {
    /// `0.5 omega^2 (x - center)^2`
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    /// `scale * x`
    Linear { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Amplitudes(Vec<Complex>),
    Generated(PacketSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PacketSpec {
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        k0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridObservableConfig {
    Projector(StateSpec),
    Matrix(Vec<Vec<Complex>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitControl {
    Constant(f64),
    Values(Vec<f64>),
    /// Path to a CSV with an `eps` column (e.g. a previous `final_control.csv`), or a single column.
    Csv(PathBuf),
    /// Seeded smooth random field of the given amplitude.
    RandomSmooth { amplitude: f64 },
}

impl Default for InitControl {
    fn default() -> Self {
        InitControl::Constant(0.0)
    }
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub model: AnyModel,
    pub params: SchemeParams,
    pub eps0: ControlField,
    /// Directory of the config file; relative paths inside it resolve against this.
    pub base_dir: PathBuf,
}

/// Parses JSON, reporting the dotted path of the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            path: if path == "." { "config".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn prepare_file(path: &Path) -> Result<Prepared> {
    let config = load_config(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    prepare(config, &base)
}

/// Validates everything and builds the model, scheme parameters and initial control.
pub fn prepare(config: RunConfig, base_dir: &Path) -> Result<Prepared> {
    let grid = TimeGrid::new(config.grid.horizon, config.grid.intervals)?;
    let params = config.scheme.params()?;
    let model = build_model(&config.model, config.scheme.alpha, grid)?;
    let eps0 = build_control(&config.init_control, grid, config.seed, base_dir)?;
    Ok(Prepared {
        config,
        model,
        params,
        eps0,
        base_dir: base_dir.to_path_buf(),
    })
}

fn complex_matrix(rows: &[Vec<Complex>], field: &str) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid(field, "empty matrix"));
    }
    let m = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::invalid(format!("{field}[{i}]"), format!("expected {m} entries, got {}", r.len())));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

fn real_matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid(field, "empty matrix"));
    }
    let m = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::invalid(format!("{field}[{i}]"), format!("expected {m} entries, got {}", r.len())));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn complex_vector(v: &[Complex]) -> State {
    State::from_iterator(v.len(), v.iter().map(|z| Complex64::new(z[0], z[1])))
}

fn samples(s: &Samples, xs: &[f64]) -> Vec<f64> {
    match s {
        Samples::Values(v) => v.clone(),
        Samples::Generated(SampleSpec::Harmonic { omega, center }) => {
            xs.iter().map(|x| 0.5 * omega * omega * (x - center) * (x - center)).collect()
        }
        Samples::Generated(SampleSpec::Linear { scale }) => xs.iter().map(|x| scale * x).collect(),
    }
}

fn state(s: &StateSpec, lower: f64, upper: f64, m: usize) -> State {
    match s {
        StateSpec::Amplitudes(v) => complex_vector(v),
        StateSpec::Generated(PacketSpec::Gaussian { center, width, k0 }) => {
            gaussian_packet(lower, upper, m, *center, *width, *k0)
        }
    }
}

pub fn build_model(config: &ModelConfig, alpha: f64, grid: TimeGrid) -> Result<AnyModel> {
    Ok(match config {
        ModelConfig::Nlevel { h0, mu, observable, psi0 } => AnyModel::NLevel(NLevelModel::new(
            complex_matrix(h0, "model.h0")?,
            complex_matrix(mu, "model.mu")?,
            complex_matrix(observable, "model.observable")?,
            complex_vector(psi0),
            alpha,
            grid,
        )?),
        ModelConfig::RealOde { a, b, c, y0 } => AnyModel::RealOde(RealOdeModel::new(
            real_matrix(a, "model.a")?,
            real_matrix(b, "model.b")?,
            real_matrix(c, "model.c")?,
            DVector::from_column_slice(y0),
            alpha,
            grid,
        )?),
        ModelConfig::Grid1d {
            domain,
            points,
            potential,
            dipole,
            psi0,
            observable,
        } => {
            let [lower, upper] = *domain;
            let valid_domain = lower.is_finite() && upper.is_finite() && upper > lower;
            if *points < 3 || !valid_domain {
                return Err(Error::invalid("model.points", "need at least 3 points on a nonempty domain"));
            }
            let xs = grid1d_positions(lower, upper, *points);
            let obs = match observable {
                GridObservableConfig::Projector(s) => GridObservable::Projector(state(s, lower, upper, *points)),
                GridObservableConfig::Matrix(rows) => {
                    GridObservable::Matrix(complex_matrix(rows, "model.observable.matrix")?)
                }
            };
            AnyModel::Grid1D(Grid1DModel::new(
                lower,
                upper,
                samples(potential, &xs),
                samples(dipole, &xs),
                obs,
                state(psi0, lower, upper, *points),
                alpha,
                grid,
            )?)
        }
    })
}

pub fn build_control(init: &InitControl, grid: TimeGrid, seed: u64, base_dir: &Path) -> Result<ControlField> {
    match init {
        InitControl::Constant(v) => {
            if !v.is_finite() {
                return Err(Error::invalid("init_control.constant", "must be finite"));
            }
            Ok(ControlField::constant(grid, *v))
        }
        InitControl::Values(v) => ControlField::new(grid, v.clone()).map_err(|e| match e {
            Error::GridMismatch { expected, found, .. } => Error::invalid(
                "init_control.values",
                format!("expected {expected} values (one per interval), got {found}"),
            ),
            other => other,
        }),
        InitControl::Csv(p) => {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            let values = read_control_column(&path)?;
            ControlField::new(grid, values).map_err(|e| match e {
                Error::GridMismatch { expected, found, .. } => Error::invalid(
                    "init_control.csv",
                    format!("expected {expected} rows (one per interval), got {found}"),
                ),
                other => other,
            })
        }
        InitControl::RandomSmooth { amplitude } => {
            if !amplitude.is_finite() {
                return Err(Error::invalid("init_control.random_smooth.amplitude", "must be finite"));
            }
            let mut rng = instances::rng(seed);
            Ok(instances::random_smooth_control(&mut rng, grid, *amplitude))
        }
    }
}

/// Reads the `eps` column of a CSV with a header, or the only column if there is one.
pub fn read_control_column(path: &Path) -> Result<Vec<f64>> {
    let parse_err = |message: String| Error::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let col = match headers.iter().position(|h| h.trim() == "eps") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(parse_err("no `eps` column".into())),
    };
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let cell = row.get(col).unwrap_or("");
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("row {}: `{cell}` is not a number", line + 1)))?;
        out.push(v);
    }
    Ok(out)
}
