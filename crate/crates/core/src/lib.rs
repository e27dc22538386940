//! Estimation and inference for ratios of linear trend slopes.
//!
//! Pairs of trending series `y₁ₜ = μ₁ + β₁t + u₁ₜ`, `y₂ₜ = μ₂ + β₂t + u₂ₜ`
//! define trend ratios `θ = β₁/β₂`. The crate estimates `θ` by IV with time
//! as the instrument, tests linear restrictions across pairs with
//! serial-correlation-robust statistics and fixed-b critical values, and
//! provides the equal-ratio product test, Fieller confidence sets, a Monte
//! Carlo engine for size and power, and a CSV reporting pipeline.

pub mod bandwidth;
pub mod error;
pub mod fixedb;
pub mod inference;
pub mod kernel;
pub mod lrv;
pub mod model;
pub mod montecarlo;
pub mod pipeline;

pub use bandwidth::{Bandwidth, BandwidthRule};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use lrv::{lrv, Autocovariances, LrvEstimate};
pub use model::{iv_system, ols_trend, PairSystem, RatioFit, TrendFit, TrendPair, TrendSeries};
pub use inference::{
    ConfidenceSet, FiellerSet, Inference, LinearHypothesis, ProductStat, RatioDiffReport,
    SlopeInterval, TestKind, TestResult,
};
