//! Convergence-rate and Lojasiewicz-exponent estimation from iteration logs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::scheme::IterationRecord;

/// Fits need at least this many records.
pub const MIN_RECORDS: usize = 30;
/// Increments or residuals below this are treated as roundoff.
pub const NOISE_FLOOR: f64 = 1e-13;
/// Fraction of the log discarded as transient.
pub const TRANSIENT_FRACTION: f64 = 0.2;
/// Tail sums within this factor of the last retained increment are truncation-biased and dropped.
const TRUNCATION_FACTOR: f64 = 100.0;
const MIN_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exponential,
    Algebraic,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub regime: Regime,
    /// Lojasiewicz exponent in `(0, 1/2]`.
    pub theta_hat: Option<f64>,
    /// `tau` in `Delta^k ~ c exp(-tau k)`.
    pub tau_hat: Option<f64>,
    /// `p` in `Delta^k ~ c k^{-p}`.
    pub power: Option<f64>,
    pub r_squared: f64,
    /// Inclusive iteration range `[first, last]` used by the fit.
    pub window: Option<(usize, usize)>,
    /// Fitted `ln Delta = intercept + slope * x` (x = k or ln k by regime).
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

impl RateFit {
    pub fn undetermined() -> Self {
        Self {
            regime: Regime::Undetermined,
            theta_hat: None,
            tau_hat: None,
            power: None,
            r_squared: 0.0,
            window: None,
            slope: None,
            intercept: None,
        }
    }

    pub fn is_determined(&self) -> bool {
        self.regime != Regime::Undetermined
    }

    /// Value of the fitted curve at iteration `k`.
    pub fn fitted(&self, k: usize) -> Option<f64> {
        let (s, b) = (self.slope?, self.intercept?);
        let x = match self.regime {
            Regime::Exponential => k as f64,
            Regime::Algebraic => (k as f64).ln(),
            Regime::Undetermined => return None,
        };
        Some((b + s * x).exp())
    }
}

/// `Delta^k = sum_{l >= k} (n_fwd(l) + n_bwd(l))`, a certified upper bound on
/// `||eps^{k'} - eps^{k-1}||` for every `k' >= k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSequence {
    ks: Vec<usize>,
    values: Vec<f64>,
    increments: Vec<f64>,
}

impl DeltaSequence {
    pub fn from_records(records: &[IterationRecord]) -> Self {
        let increments: Vec<f64> = records.iter().map(|r| r.n_fwd + r.n_bwd).collect();
        let mut values = vec![0.0; increments.len()];
        let mut acc = 0.0;
        for i in (0..increments.len()).rev() {
            acc += increments[i];
            values[i] = acc;
        }
        Self {
            ks: records.iter().map(|r| r.k).collect(),
            values,
            increments,
        }
    }

    /// Builds the sequence from given tail sums; increments are their differences.
    pub fn from_values(ks: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(ks.len(), values.len(), "one value per iteration");
        let increments = (0..values.len())
            .map(|i| values[i] - values.get(i + 1).copied().unwrap_or(0.0))
            .collect();
        Self { ks, values, increments }
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of the fit window: transient dropped, noise-floor tail dropped,
    /// and (optionally) tail sums too close to the truncation point dropped.
    fn window(&self, truncation_filter: bool) -> Vec<usize> {
        let n = self.len();
        let start = (TRANSIENT_FRACTION * n as f64).ceil() as usize;
        let Some(last) = (0..n).rev().find(|&i| self.increments[i] > NOISE_FLOOR) else {
            return Vec::new();
        };
        let cutoff = if truncation_filter {
            TRUNCATION_FACTOR * self.increments[last]
        } else {
            0.0
        };
        (start..=last)
            .filter(|&i| self.values[i] > NOISE_FLOOR && self.values[i] >= cutoff)
            .collect()
    }
}

/// Least squares `y = a + b x`; returns `(b, a, r^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        // all y equal: a perfect (flat) fit
        1.0
    };
    (slope, my - slope * mx, r2)
}

/// Classifies the decay of `Delta^k` from a run log.
pub fn fit_rate(records: &[IterationRecord]) -> RateFit {
    if records.len() < MIN_RECORDS {
        return RateFit::undetermined();
    }
    fit_delta(&DeltaSequence::from_records(records), true)
}

/// Fits `ln Delta^k` against `k` (exponential) and `ln k` (algebraic) and keeps the better one.
pub fn fit_delta(delta: &DeltaSequence, truncation_filter: bool) -> RateFit {
    if delta.len() < MIN_RECORDS {
        return RateFit::undetermined();
    }
    let idx = delta.window(truncation_filter);
    if idx.len() < MIN_WINDOW {
        return RateFit::undetermined();
    }
    let ks: Vec<f64> = idx.iter().map(|&i| delta.ks[i] as f64).collect();
    let log_k: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let log_d: Vec<f64> = idx.iter().map(|&i| delta.values[i].ln()).collect();
    let window = Some((delta.ks[idx[0]], delta.ks[idx[idx.len() - 1]]));

    let (se, ie, re) = linear_fit(&ks, &log_d);
    let (sa, ia, ra) = linear_fit(&log_k, &log_d);
    let exp_ok = se < 0.0;
    let alg_ok = sa < 0.0;
    if exp_ok && (!alg_ok || re >= ra) {
        RateFit {
            regime: Regime::Exponential,
            theta_hat: Some(0.5),
            tau_hat: Some(-se),
            power: None,
            r_squared: re,
            window,
            slope: Some(se),
            intercept: Some(ie),
        }
    } else if alg_ok {
        let p = -sa;
        RateFit {
            regime: Regime::Algebraic,
            theta_hat: Some(p / (1.0 + 2.0 * p)),
            tau_hat: None,
            power: Some(p),
            r_squared: ra,
            window,
            slope: Some(sa),
            intercept: Some(ia),
        }
    } else {
        RateFit {
            window,
            ..RateFit::undetermined()
        }
    }
}

/// Estimates the Lojasiewicz exponent from `||grad J_k|| ~ |J_limit - J_k|^{1 - theta}`.
pub fn fit_lojasiewicz(records: &[IterationRecord], j_limit: f64) -> RateFit {
    if records.len() < MIN_RECORDS {
        return RateFit::undetermined();
    }
    let n = records.len();
    let start = (TRANSIENT_FRACTION * n as f64).ceil() as usize;
    let gaps: Vec<f64> = records.iter().map(|r| (j_limit - r.j).abs()).collect();
    let floor = NOISE_FLOOR * (1.0 + j_limit.abs());
    let Some(last) = (start..n).rev().find(|&i| gaps[i] > floor && records[i].grad_residual > NOISE_FLOOR) else {
        return RateFit::undetermined();
    };
    // the limit is only known to within the last gap
    let cutoff = TRUNCATION_FACTOR * gaps[last];
    let idx: Vec<usize> = (start..=last)
        .filter(|&i| gaps[i] > floor && gaps[i] >= cutoff && records[i].grad_residual > NOISE_FLOOR)
        .collect();
    if idx.len() < MIN_WINDOW {
        return RateFit::undetermined();
    }
    let xs: Vec<f64> = idx.iter().map(|&i| gaps[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| records[i].grad_residual.ln()).collect();
    let (s, b, r2) = linear_fit(&xs, &ys);
    let theta = (1.0 - s).clamp(f64::MIN_POSITIVE, 0.5);
    let regime = if theta >= 0.45 {
        Regime::Exponential
    } else {
        Regime::Algebraic
    };
    RateFit {
        regime,
        theta_hat: Some(theta),
        tau_hat: None,
        power: None,
        r_squared: r2,
        window: Some((records[idx[0]].k, records[idx[idx.len() - 1]].k)),
        slope: Some(s),
        intercept: Some(b),
    }
}

/// Plot-ready `k,delta,fitted`; `fitted` is empty outside a determined fit.
pub fn write_rate_csv<W: Write>(delta: &DeltaSequence, fit: &RateFit, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,delta,fitted")?;
    for (k, d) in delta.ks.iter().zip(&delta.values) {
        match fit.fitted(*k) {
            Some(f) => writeln!(out, "{k},{d},{f}")?,
            None => writeln!(out, "{k},{d},")?,
        }
    }
    Ok(())
}
