//! Fixed-b critical values.
//!
//! Two-sided 5% tests with the Daniell kernel use a published response
//! surface in `b`. Everything else is simulated from the null limit
//! `Z* / √P_b(W̃*)` (or its Wald form) and can be cached on disk.

mod cache;
mod functional;
mod simulate;

use serde::{Deserialize, Serialize};

pub use cache::{CvCache, CvKey, CvResolver, CACHE_HEADER};
pub use functional::{pb_functional, PathGrid, PbOperator, MIN_STEPS};
pub use simulate::{
    replication_rng, simulate_null_cv, simulate_null_draws, upper_quantile, NullDraw, SimConfig,
};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Coefficients of the Daniell two-sided 5% response surface, constant
/// term first.
pub const DANIELL_0025_COEFS: [f64; 6] = [1.9659, 4.0603, 11.6626, 34.8269, -13.9506, 3.2669];

/// Upper 2.5% fixed-b critical value of the trend-ratio `t` statistic with
/// the Daniell kernel.
pub fn cv_daniell_0025(b: f64) -> Result<f64> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::invalid(format!("b must lie in (0, 1], got {b}")));
    }
    Ok(DANIELL_0025_COEFS
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * b + c))
}

/// Which statistic a critical value applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatForm {
    /// `|t|` for a single restriction.
    AbsT,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CvSource {
    Polynomial,
    Simulated {
        replications: usize,
        step_count: usize,
        seed: u64,
    },
    /// Level 1: every nonzero statistic rejects.
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    /// Two-sided size for `|t|`, upper-tail size for Wald.
    pub level: f64,
    pub b: f64,
    pub kernel: Kernel,
    pub q: usize,
    pub form: StatForm,
    pub source: CvSource,
}

impl CriticalValue {
    /// The same critical value expressed for the Wald statistic. For a
    /// single restriction `Wald = t²`.
    pub fn as_wald(&self) -> CriticalValue {
        match self.form {
            StatForm::Wald => *self,
            StatForm::AbsT => CriticalValue {
                value: self.value * self.value,
                form: StatForm::Wald,
                ..*self
            },
        }
    }

    /// Critical value for `|t|`. Only meaningful for `q = 1`.
    pub fn as_abs_t(&self) -> CriticalValue {
        match self.form {
            StatForm::AbsT => *self,
            StatForm::Wald => CriticalValue {
                value: self.value.sqrt(),
                form: StatForm::AbsT,
                ..*self
            },
        }
    }

    /// Ties do not reject.
    pub fn rejects(&self, statistic: f64) -> bool {
        match self.form {
            StatForm::AbsT => statistic.abs() > self.value,
            StatForm::Wald => statistic > self.value,
        }
    }
}
