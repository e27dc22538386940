//! Trending pair systems, OLS trend fits and the IV trend-ratio estimator.
//!
//! Every series is indexed by `t = 1..T`. Calendar labels (years, months)
//! live in the pipeline layer and never enter the estimators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible series length: two trend parameters plus two degrees
/// of freedom.
pub const MIN_LEN: usize = 4;

/// Relative threshold below which a denominator cross-product sum is
/// treated as degenerate.
const DEGENERATE_DENOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    label: String,
    values: Vec<f64>,
}

impl TrendSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        validate_values(&label, &values)?;
        Ok(Self { label, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns a copy with every value mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.label.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

fn validate_values(label: &str, values: &[f64]) -> Result<()> {
    if values.len() < MIN_LEN {
        return Err(Error::invalid(format!(
            "series `{label}` has {} observations, need at least {MIN_LEN}",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "series `{label}` has a non-finite value at t = {}",
            i + 1
        )));
    }
    Ok(())
}

/// A numerator series and the denominator series whose trend it is compared
/// against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPair {
    pub numerator: TrendSeries,
    pub denominator: TrendSeries,
}

impl TrendPair {
    pub fn new(numerator: TrendSeries, denominator: TrendSeries) -> Result<Self> {
        if numerator.len() != denominator.len() {
            return Err(Error::invalid(format!(
                "pair ({}, {}) has mismatched lengths {} and {}",
                numerator.label(),
                denominator.label(),
                numerator.len(),
                denominator.len()
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn len(&self) -> usize {
        self.numerator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerator.is_empty()
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.numerator.label(), self.denominator.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSystem {
    pairs: Vec<TrendPair>,
}

impl PairSystem {
    pub fn new(pairs: Vec<TrendPair>) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::invalid("a pair system needs at least one pair"))?;
        let len = first.len();
        if let Some(p) = pairs.iter().find(|p| p.len() != len) {
            return Err(Error::invalid(format!(
                "pair {} has length {}, expected {len}",
                p.label(),
                p.len()
            )));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[TrendPair] {
        &self.pairs
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn series_len(&self) -> usize {
        self.pairs[0].len()
    }
}

/// `Σ (t - t̄)²` for `t = 1..T`, i.e. `T(T² - 1)/12`.
pub fn trend_sum_squares(len: usize) -> Result<f64> {
    if len < 2 {
        return Err(Error::invalid(format!(
            "trend sum of squares needs T >= 2, got {len}"
        )));
    }
    Ok(sum_sq_unchecked(len))
}

pub(crate) fn sum_sq_unchecked(len: usize) -> f64 {
    let t = len as f64;
    t * (t * t - 1.0) / 12.0
}

/// `t - t̄` for `t = 1..T`.
pub fn centered_time(len: usize) -> Vec<f64> {
    let mid = (len as f64 + 1.0) / 2.0;
    (1..=len).map(|t| t as f64 - mid).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `Σ (t - t̄)(y_t - ȳ)` given the centered time vector.
fn centered_cross(tc: &[f64], values: &[f64]) -> f64 {
    let m = mean(values);
    tc.iter().zip(values).map(|(a, y)| a * (y - m)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub intercept: f64,
    /// Slope per time step.
    pub slope: f64,
    pub residuals: Vec<f64>,
}

impl TrendFit {
    /// OLS fit of `y_t = μ + β t + u_t` on raw values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        validate_values("<values>", values)?;
        Ok(fit_unchecked(values))
    }
}

pub(crate) fn fit_unchecked(values: &[f64]) -> TrendFit {
    let len = values.len();
    let tc = centered_time(len);
    let ybar = mean(values);
    let slope = centered_cross(&tc, values) / sum_sq_unchecked(len);
    let tbar = (len as f64 + 1.0) / 2.0;
    let intercept = ybar - slope * tbar;
    // Built from centered quantities so the residuals sum to zero up to
    // rounding, independent of the intercept's magnitude.
    let residuals = values
        .iter()
        .zip(&tc)
        .map(|(y, a)| (y - ybar) - slope * a)
        .collect();
    TrendFit {
        intercept,
        slope,
        residuals,
    }
}

pub fn ols_trend(series: &TrendSeries) -> TrendFit {
    fit_unchecked(series.values())
}

/// OLS slope estimates of the two series in a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSlopes {
    pub numerator: f64,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioFit {
    pub theta_hat: Vec<f64>,
    /// `Σ (t - t̄)(y₂ₜ - ȳ₂)` per pair; the diagonal of `D̂₂`.
    pub denom_sums: Vec<f64>,
    /// `Σ (t - t̄)(y₁ₜ - ȳ₁)` per pair.
    pub numer_sums: Vec<f64>,
    /// `T × n` matrix of IV residuals `ε̂ₜ`.
    pub iv_residuals: DMatrix<f64>,
    pub slopes: Vec<PairSlopes>,
    /// Pairs whose denominator sum is zero relative to its scale.
    pub degenerate: Vec<bool>,
    /// Per-pair magnitude of the centered data, used to decide when
    /// residuals are numerically zero.
    pub(crate) residual_scale: Vec<f64>,
}

impl RatioFit {
    pub fn n_pairs(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn series_len(&self) -> usize {
        self.iv_residuals.nrows()
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// IV estimator of the trend ratio of every pair, using time as the
/// instrument for the denominator series.
pub fn iv_system(system: &PairSystem) -> RatioFit {
    let len = system.series_len();
    let n = system.n_pairs();
    let tc = centered_time(len);
    let ssq = sum_sq_unchecked(len);

    let mut fit = RatioFit {
        theta_hat: Vec::with_capacity(n),
        denom_sums: Vec::with_capacity(n),
        numer_sums: Vec::with_capacity(n),
        iv_residuals: DMatrix::zeros(len, n),
        slopes: Vec::with_capacity(n),
        degenerate: Vec::with_capacity(n),
        residual_scale: Vec::with_capacity(n),
    };

    for (i, pair) in system.pairs().iter().enumerate() {
        let y1 = pair.numerator.values();
        let y2 = pair.denominator.values();
        let num = centered_cross(&tc, y1);
        let den = centered_cross(&tc, y2);
        let theta = num / den;
        let degenerate = den.abs() <= DEGENERATE_DENOM_TOL * ssq * std_dev(y2);

        let (m1, m2) = (mean(y1), mean(y2));
        let mut scale = 0.0_f64;
        for t in 0..len {
            let (c1, c2) = (y1[t] - m1, y2[t] - m2);
            fit.iv_residuals[(t, i)] = c1 - theta * c2;
            scale = scale.max(c1.abs() + (theta * c2).abs());
        }

        fit.theta_hat.push(theta);
        fit.denom_sums.push(den);
        fit.numer_sums.push(num);
        fit.slopes.push(PairSlopes {
            numerator: num / ssq,
            denominator: den / ssq,
        });
        fit.degenerate.push(degenerate);
        fit.residual_scale.push(scale);
    }
    fit
}
