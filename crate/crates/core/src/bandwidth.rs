//! Bandwidth rules: fixed fractions of the sample size and the AR(1)
//! plug-in rule.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Autoregressive coefficients are clamped to this magnitude before the
/// plug-in formula is evaluated.
pub const RHO_CLAMP: f64 = 0.97;

/// Shortest sample for which the AR(1) plug-in is attempted.
pub const PLUG_IN_MIN_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule {
    /// `M = b T` with `b ∈ (0, 1]`.
    FixedFraction(f64),
    /// Data-dependent AR(1) plug-in bandwidth.
    #[default]
    AndrewsAr1,
}

/// A realized bandwidth. `lag = b_ratio · T` exactly, so re-running with
/// `FixedFraction(b_ratio)` reproduces the same weights bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub lag: f64,
    pub b_ratio: f64,
}

impl Bandwidth {
    pub fn from_fraction(b: f64, len: usize) -> Self {
        Self {
            lag: b * len as f64,
            b_ratio: b,
        }
    }
}

impl BandwidthRule {
    pub fn fixed(b: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::invalid(format!(
                "bandwidth fraction must lie in (0, 1], got {b}"
            )));
        }
        Ok(BandwidthRule::FixedFraction(b))
    }

    /// Resolves the rule against the residuals whose long-run variance
    /// will be estimated.
    pub fn resolve(&self, residuals: &DMatrix<f64>, kernel: Kernel) -> Result<Bandwidth> {
        let len = residuals.nrows();
        match *self {
            BandwidthRule::FixedFraction(b) => {
                Self::fixed(b)?;
                Ok(Bandwidth::from_fraction(b, len))
            }
            BandwidthRule::AndrewsAr1 => {
                let lag = andrews_bandwidth(residuals, kernel)?;
                Ok(Bandwidth::from_fraction(lag / len as f64, len))
            }
        }
    }
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::FixedFraction(b) => write!(f, "{b}"),
            BandwidthRule::AndrewsAr1 => f.write_str("a91"),
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("a91") || s.eq_ignore_ascii_case("andrews") {
            return Ok(BandwidthRule::AndrewsAr1);
        }
        let b: f64 = s
            .parse()
            .map_err(|_| Error::invalid(format!("bandwidth must be `a91` or a fraction, got `{s}`")))?;
        Self::fixed(b)
    }
}

impl Serialize for BandwidthRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BandwidthRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(b) => BandwidthRule::fixed(b),
            Repr::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Least-squares AR(1) fit without intercept: `(ρ̂, σ̂²)`. `None` when the
/// series has no variation to fit.
pub fn ar1_fit(x: &[f64]) -> Option<(f64, f64)> {
    let (lagged, lead) = (&x[..x.len() - 1], &x[1..]);
    let sxx: f64 = lagged.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lagged.iter().zip(lead).map(|(a, b)| a * b).sum();
    let rho = sxy / sxx;
    let sigma2 = lagged
        .iter()
        .zip(lead)
        .map(|(a, b)| (b - rho * a).powi(2))
        .sum::<f64>()
        / lead.len() as f64;
    Some((rho, sigma2))
}

/// AR(1) plug-in bandwidth `M` with unit weights across columns, floored at
/// 1 and capped at `T`.
pub fn andrews_bandwidth(residuals: &DMatrix<f64>, kernel: Kernel) -> Result<f64> {
    let len = residuals.nrows();
    if len < PLUG_IN_MIN_LEN {
        return Err(Error::invalid(format!(
            "plug-in bandwidth needs T >= {PLUG_IN_MIN_LEN}, got {len}"
        )));
    }
    let q = kernel.characteristic_exponent();
    let (mut num, mut den) = (0.0, 0.0);
    for col in residuals.column_iter() {
        let Some((rho, s2)) = ar1_fit(col.as_slice()) else {
            continue;
        };
        let rho = rho.clamp(-RHO_CLAMP, RHO_CLAMP);
        let s4 = s2 * s2;
        num += match q {
            1 => 4.0 * rho * rho * s4 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2)),
            _ => 4.0 * rho * rho * s4 / (1.0 - rho).powi(8),
        };
        den += s4 / (1.0 - rho).powi(4);
    }
    let alpha = if den > 0.0 { num / den } else { 0.0 };
    let t = len as f64;
    let lag = kernel.plug_in_constant() * (alpha * t).powf(1.0 / (2 * q + 1) as f64);
    Ok(lag.clamp(1.0, t))
}
