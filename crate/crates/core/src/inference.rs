//! Tests and confidence sets: `Wald_IV` and `t_IV` for linear restrictions
//! on the ratios, the product-form `t_prod` for equal ratios, Fieller sets
//! for a single ratio, and slope intervals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bandwidth::{Bandwidth, BandwidthRule};
use crate::error::{Error, Result};
use crate::fixedb::{CriticalValue, CvResolver};
use crate::kernel::Kernel;
use crate::lrv::{Autocovariances, LrvEstimate};
use crate::model::{
    fit_unchecked, iv_system, sum_sq_unchecked, PairSystem, RatioFit, TrendFit, TrendPair,
    TrendSeries,
};

/// Residual columns whose largest entry is below this fraction of the data
/// scale are treated as exactly zero.
pub const RESIDUAL_SNAP: f64 = 1e-9;

/// Relative singular-value tolerance for the rank of `R`.
pub const RANK_TOL: f64 = 1e-10;

/// Relative eigenvalue tolerance below which `R V̂ R'` counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// `H₀: Rθ = r` with `R` of full row rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    r_mat: DMatrix<f64>,
    r_vec: DVector<f64>,
}

impl LinearHypothesis {
    pub fn new(r_mat: DMatrix<f64>, r_vec: DVector<f64>) -> Result<Self> {
        let (q, n) = r_mat.shape();
        if q == 0 || n == 0 {
            return Err(Error::invalid("restriction matrix is empty"));
        }
        if r_vec.len() != q {
            return Err(Error::invalid(format!(
                "R has {q} rows but r has {} entries",
                r_vec.len()
            )));
        }
        if q > n {
            return Err(Error::invalid(format!(
                "{q} restrictions on {n} ratios cannot have full row rank"
            )));
        }
        if r_mat.iter().chain(r_vec.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("hypothesis contains non-finite values"));
        }
        let sv = r_mat.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if smax == 0.0 || rank < q {
            return Err(Error::invalid(format!(
                "R must have full row rank {q}, numerical rank is {rank}"
            )));
        }
        Ok(Self { r_mat, r_vec })
    }

    /// `θᵢ - θⱼ = 0` in a system of `n` pairs.
    pub fn equal_ratios(n: usize, i: usize, j: usize) -> Result<Self> {
        if i >= n || j >= n || i == j {
            return Err(Error::invalid(format!(
                "equal-ratio hypothesis needs two distinct pairs below {n}, got {i} and {j}"
            )));
        }
        let mut r = DMatrix::zeros(1, n);
        r[(0, i)] = 1.0;
        r[(0, j)] = -1.0;
        Self::new(r, DVector::zeros(1))
    }

    /// `θᵢ = value`.
    pub fn single(n: usize, i: usize, value: f64) -> Result<Self> {
        if i >= n {
            return Err(Error::invalid(format!("pair index {i} out of range for {n} pairs")));
        }
        let mut r = DMatrix::zeros(1, n);
        r[(0, i)] = 1.0;
        Self::new(r, DVector::from_element(1, value))
    }

    pub fn restrictions(&self) -> usize {
        self.r_mat.nrows()
    }

    pub fn n_ratios(&self) -> usize {
        self.r_mat.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r_mat
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.r_vec
    }

    fn touches(&self, pair: usize) -> bool {
        self.r_mat.column(pair).iter().any(|&v| v != 0.0)
    }
}

/// A confidence set for a scalar. Half-lines are `Rays` with one infinite
/// end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ConfidenceSet {
    Interval { lower: f64, upper: f64 },
    /// `(-∞, below] ∪ [above, ∞)`.
    Rays { below: f64, above: f64 },
    WholeLine,
    Empty,
}

impl ConfidenceSet {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            ConfidenceSet::Interval { lower, upper } => lower <= x && x <= upper,
            ConfidenceSet::Rays { below, above } => x <= below || x >= above,
            ConfidenceSet::WholeLine => true,
            ConfidenceSet::Empty => false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, ConfidenceSet::Interval { .. } | ConfidenceSet::Empty)
    }

    /// Endpoints of a bounded interval.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ConfidenceSet::Interval { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }

    /// Multiplies the set by a positive constant.
    pub fn scaled(&self, factor: f64) -> ConfidenceSet {
        debug_assert!(factor > 0.0);
        match *self {
            ConfidenceSet::Interval { lower, upper } => ConfidenceSet::Interval {
                lower: lower * factor,
                upper: upper * factor,
            },
            ConfidenceSet::Rays { below, above } => ConfidenceSet::Rays {
                below: below * factor,
                above: above * factor,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    WaldIv,
    TIv,
    TProd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    /// Signed for the `t` forms.
    pub statistic: f64,
    /// Expressed in the same form as `statistic`.
    pub critical_value: CriticalValue,
    pub reject: bool,
    /// `Rθ̂` for the IV tests, `g` for the product test.
    pub estimate: Vec<f64>,
    /// `r` for the IV tests, 0 for the product test.
    pub null_value: Vec<f64>,
    /// Standard error of a scalar estimate.
    pub std_error: Option<f64>,
    /// Inverted interval for a scalar estimate.
    pub confidence_set: Option<ConfidenceSet>,
    pub variance_used: LrvEstimate,
    /// Pairs touched by the hypothesis whose denominator trend is zero
    /// relative to its scale.
    pub degenerate_pairs: Vec<usize>,
    /// The estimated variance of the tested quantity is exactly zero.
    pub zero_variance: bool,
}

/// Ingredients of the product test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductStat {
    pub g_hat: f64,
    /// `[β̂₂⁽²⁾, -β̂₂⁽¹⁾, -β̂₁⁽²⁾, β̂₁⁽¹⁾]`.
    pub r_beta_hat: [f64; 4],
    pub lambda_g_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiellerSet {
    pub theta_hat: f64,
    pub set: ConfidenceSet,
    pub critical_value: CriticalValue,
    /// 2×2 long-run variance of the two trend residual series.
    pub variance_used: LrvEstimate,
    /// `t` statistic of the denominator slope against zero.
    pub denominator_t: f64,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeInterval {
    /// Presentation factor applied to `estimate`, `lower`, `upper` and
    /// `std_error`.
    pub scale: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
    pub critical_value: CriticalValue,
    pub variance_used: LrvEstimate,
    pub zero_variance: bool,
}

impl SlopeInterval {
    pub fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDiffReport {
    pub theta_hat: [f64; 2],
    /// `t_IV` for `θ⁽¹⁾ - θ⁽²⁾ = 0`.
    pub iv: TestResult,
    pub product: TestResult,
    pub product_stat: ProductStat,
}

impl RatioDiffReport {
    pub fn delta_theta(&self) -> f64 {
        self.iv.estimate[0]
    }

    pub fn g_hat(&self) -> f64 {
        self.product_stat.g_hat
    }
}

/// Kernel, bandwidth rule, level and critical value source shared by all
/// tests.
#[derive(Debug, Clone)]
pub struct Inference {
    kernel: Kernel,
    bandwidth: BandwidthRule,
    level: f64,
    resolver: Arc<CvResolver>,
}

impl Inference {
    /// `level` is the two-sided size of the `t` tests and the upper-tail
    /// size of Wald tests.
    pub fn new(kernel: Kernel, bandwidth: BandwidthRule, level: f64) -> Result<Self> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::invalid(format!("level must lie in (0, 1], got {level}")));
        }
        if let BandwidthRule::FixedFraction(b) = bandwidth {
            BandwidthRule::fixed(b)?;
        }
        Ok(Self {
            kernel,
            bandwidth,
            level,
            resolver: Arc::new(CvResolver::default()),
        })
    }

    pub fn with_resolver(mut self, resolver: Arc<CvResolver>) -> Self {
        self.resolver = resolver;
        self
    }

    pub fn with_bandwidth(&self, bandwidth: BandwidthRule) -> Self {
        Self {
            bandwidth,
            ..self.clone()
        }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> BandwidthRule {
        self.bandwidth
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn resolver(&self) -> &CvResolver {
        &self.resolver
    }

    fn critical_value(&self, b: f64, q: usize) -> Result<CriticalValue> {
        self.resolver.resolve(self.kernel, b.min(1.0), self.level, q)
    }

    fn lrv_with(&self, resid: &DMatrix<f64>, bw: Bandwidth) -> Result<LrvEstimate> {
        Autocovariances::new(resid)?.lrv(self.kernel, bw.lag)
    }

    /// `Wald_IV = (Rθ̂ - r)'[R V̂ R']⁻¹(Rθ̂ - r)` with
    /// `V̂ = (Σ(t - t̄)²) D̂₂⁻¹ Ω̂_ε D̂₂⁻¹`.
    pub fn wald_iv(&self, fit: &RatioFit, hyp: &LinearHypothesis) -> Result<TestResult> {
        let core = self.iv_core(fit, hyp)?;
        let q = hyp.restrictions();
        let cv = self.critical_value(core.lrv.b_ratio, q)?.as_wald();
        let (statistic, zero_variance) = match core.inverse_quadratic()? {
            Some(w) => (w, false),
            None => (if core.diff.iter().all(|&d| d == 0.0) { 0.0 } else { f64::INFINITY }, true),
        };
        Ok(TestResult {
            kind: TestKind::WaldIv,
            statistic,
            reject: cv.rejects(statistic),
            critical_value: cv,
            estimate: core.estimate.as_slice().to_vec(),
            null_value: hyp.rhs().as_slice().to_vec(),
            std_error: (q == 1).then(|| core.rvr[(0, 0)].sqrt()),
            confidence_set: None,
            variance_used: core.lrv,
            degenerate_pairs: core.degenerate_pairs,
            zero_variance,
        })
    }

    /// `t_IV = (Rθ̂ - r)/√(R V̂ R')` for a single restriction, with the
    /// interval `Rθ̂ ± cv·√(R V̂ R')`.
    pub fn t_iv(&self, fit: &RatioFit, hyp: &LinearHypothesis) -> Result<TestResult> {
        if hyp.restrictions() != 1 {
            return Err(Error::invalid(format!(
                "t test needs a single restriction, got {}",
                hyp.restrictions()
            )));
        }
        let core = self.iv_core(fit, hyp)?;
        let cv = self.critical_value(core.lrv.b_ratio, 1)?.as_abs_t();
        let var = core.rvr[(0, 0)];
        if var < 0.0 {
            return Err(Error::Numerical(format!("negative variance {var} for R V R'")));
        }
        let se = var.sqrt();
        let (statistic, zero_variance) = ratio_stat(core.diff[0], se);
        let est = core.estimate[0];
        Ok(TestResult {
            kind: TestKind::TIv,
            statistic,
            reject: cv.rejects(statistic),
            confidence_set: Some(ConfidenceSet::Interval {
                lower: est - cv.value * se,
                upper: est + cv.value * se,
            }),
            critical_value: cv,
            estimate: vec![est],
            null_value: vec![hyp.rhs()[0]],
            std_error: Some(se),
            variance_used: core.lrv,
            degenerate_pairs: core.degenerate_pairs,
            zero_variance,
        })
    }

    fn iv_core(&self, fit: &RatioFit, hyp: &LinearHypothesis) -> Result<IvCore> {
        let n = fit.n_pairs();
        if hyp.n_ratios() != n {
            return Err(Error::invalid(format!(
                "hypothesis is on {} ratios but the fit has {n} pairs",
                hyp.n_ratios()
            )));
        }
        let mut degenerate_pairs = Vec::new();
        for i in (0..n).filter(|&i| hyp.touches(i)) {
            if !fit.theta_hat[i].is_finite() {
                return Err(Error::Numerical(format!(
                    "pair {i} has no denominator trend; its ratio is undefined"
                )));
            }
            if fit.degenerate[i] {
                degenerate_pairs.push(i);
            }
        }
        let len = fit.series_len();
        let mut resid = fit.iv_residuals.clone();
        snap_columns(&mut resid, &fit.residual_scale);
        let bw = self.bandwidth.resolve(&resid, self.kernel)?;
        let lrv = self.lrv_with(&resid, bw)?;

        let ssq = sum_sq_unchecked(len);
        let dinv = DVector::from_iterator(n, fit.denom_sums.iter().map(|d| 1.0 / d));
        let v = DMatrix::from_fn(n, n, |a, c| ssq * dinv[a] * lrv.omega[(a, c)] * dinv[c]);
        let r = hyp.matrix();
        let rvr = r * v * r.transpose();
        let rvr = (&rvr + rvr.transpose()) * 0.5;
        let estimate = r * DVector::from_column_slice(&fit.theta_hat);
        let diff = &estimate - hyp.rhs();
        Ok(IvCore {
            estimate,
            diff,
            rvr,
            lrv,
            degenerate_pairs,
        })
    }

    /// Slopes, `g` and `λ̂²_g` of the product test.
    pub fn product_stat(&self, pair1: &TrendPair, pair2: &TrendPair) -> Result<(ProductStat, LrvEstimate)> {
        if pair1.len() != pair2.len() {
            return Err(Error::invalid(format!(
                "pairs have different lengths {} and {}",
                pair1.len(),
                pair2.len()
            )));
        }
        let fits = [
            fit_unchecked(pair1.numerator.values()),
            fit_unchecked(pair2.numerator.values()),
            fit_unchecked(pair1.denominator.values()),
            fit_unchecked(pair2.denominator.values()),
        ];
        let scales = [
            &pair1.numerator,
            &pair2.numerator,
            &pair1.denominator,
            &pair2.denominator,
        ]
        .map(series_scale);
        let len = pair1.len();
        let mut u = DMatrix::from_fn(len, 4, |t, c| fits[c].residuals[t]);
        snap_columns(&mut u, &scales);

        let (b11, b12, b21, b22) = (fits[0].slope, fits[1].slope, fits[2].slope, fits[3].slope);
        let r_beta_hat = [b22, -b21, -b12, b11];
        let g_hat = b22 * b11 - b21 * b12;

        // The plug-in rule is fitted to the scalar series R_β̂ Û_t, whose
        // long-run variance is λ̂²_g.
        let bw = match self.bandwidth {
            BandwidthRule::AndrewsAr1 => {
                let v = &u * DVector::from_column_slice(&r_beta_hat);
                BandwidthRule::AndrewsAr1.resolve(&DMatrix::from_column_slice(len, 1, v.as_slice()), self.kernel)?
            }
            rule => rule.resolve(&u, self.kernel)?,
        };
        let lrv = self.lrv_with(&u, bw)?;
        let lambda_g_sq = lrv.quadratic_form(&r_beta_hat);
        Ok((
            ProductStat {
                g_hat,
                r_beta_hat,
                lambda_g_sq,
            },
            lrv,
        ))
    }

    /// `t_prod = g / √(λ̂²_g / Σ(t - t̄)²)` for `θ⁽¹⁾ = θ⁽²⁾` restated as
    /// `g = β₂⁽²⁾β₁⁽¹⁾ - β₂⁽¹⁾β₁⁽²⁾ = 0`.
    pub fn t_prod(&self, pair1: &TrendPair, pair2: &TrendPair) -> Result<TestResult> {
        Ok(self.t_prod_full(pair1, pair2)?.0)
    }

    fn t_prod_full(&self, pair1: &TrendPair, pair2: &TrendPair) -> Result<(TestResult, ProductStat)> {
        let (ps, lrv) = self.product_stat(pair1, pair2)?;
        if ps.lambda_g_sq < 0.0 {
            // Only a non-PSD kernel could produce this; none is offered.
            let scale = lrv.omega.amax() * ps.r_beta_hat.iter().map(|v| v * v).sum::<f64>();
            if ps.lambda_g_sq < -1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "negative product-test variance {}",
                    ps.lambda_g_sq
                )));
            }
        }
        let ssq = sum_sq_unchecked(pair1.len());
        let se = (ps.lambda_g_sq.max(0.0) / ssq).sqrt();
        let cv = self.critical_value(lrv.b_ratio, 1)?.as_abs_t();
        let (statistic, zero_variance) = ratio_stat(ps.g_hat, se);
        let result = TestResult {
            kind: TestKind::TProd,
            statistic,
            reject: cv.rejects(statistic),
            confidence_set: Some(ConfidenceSet::Interval {
                lower: ps.g_hat - cv.value * se,
                upper: ps.g_hat + cv.value * se,
            }),
            critical_value: cv,
            estimate: vec![ps.g_hat],
            null_value: vec![0.0],
            std_error: Some(se),
            variance_used: lrv,
            degenerate_pairs: Vec::new(),
            zero_variance,
        };
        Ok((result, ps))
    }

    /// Fieller confidence set for `θ = β₁/β₂`: all `θ₀` with
    /// `|β̂₁ - θ₀β̂₂| ≤ cv·√(v(θ₀)/Σ(t - t̄)²)`, where
    /// `v(θ₀) = [1, -θ₀] Ω̂ [1, -θ₀]'`.
    pub fn fieller_ci(&self, pair: &TrendPair) -> Result<FiellerSet> {
        let len = pair.len();
        if len < 8 {
            return Err(Error::invalid(format!("Fieller sets need T >= 8, got {len}")));
        }
        let f1 = fit_unchecked(pair.numerator.values());
        let f2 = fit_unchecked(pair.denominator.values());
        let mut u = DMatrix::from_fn(len, 2, |t, c| if c == 0 { f1.residuals[t] } else { f2.residuals[t] });
        snap_columns(&mut u, &[series_scale(&pair.numerator), series_scale(&pair.denominator)]);
        let bw = self.bandwidth.resolve(&u, self.kernel)?;
        let lrv = self.lrv_with(&u, bw)?;
        let cv = self.critical_value(lrv.b_ratio, 1)?.as_abs_t();
        let ssq = sum_sq_unchecked(len);
        let (w11, w12, w22) = (lrv.omega[(0, 0)], lrv.omega[(0, 1)], lrv.omega[(1, 1)]);
        let c = cv.value * cv.value / ssq;
        let (b1, b2) = (f1.slope, f2.slope);
        // (b/2)² - ac expanded by hand: the β̂ terms cancel exactly, which
        // keeps tight sets accurate when the noise is tiny.
        let det = (w11 * w22 - w12 * w12).max(0.0);
        let quarter_disc = c * (w11 * b2 * b2 - 2.0 * w12 * b1 * b2 + w22 * b1 * b1) - c * c * det;
        let set = quadratic_set_with_disc(
            b2 * b2 - c * w22,
            -2.0 * (b1 * b2 - c * w12),
            b1 * b1 - c * w11,
            4.0 * quarter_disc,
        );
        let (denominator_t, _) = ratio_stat(b2, (w22 / ssq).sqrt());
        Ok(FiellerSet {
            theta_hat: b1 / b2,
            set,
            critical_value: cv,
            zero_variance: w11 == 0.0 && w22 == 0.0,
            denominator_t,
            variance_used: lrv,
        })
    }

    /// `β̂ ± cv·√(Ω̂_u / Σ(t - t̄)²)`, multiplied by `scale` for reporting.
    pub fn slope_ci(&self, series: &TrendSeries, scale: f64) -> Result<SlopeInterval> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        let fit: TrendFit = fit_unchecked(series.values());
        let len = series.len();
        let mut u = DMatrix::from_column_slice(len, 1, &fit.residuals);
        snap_columns(&mut u, &[series_scale(series)]);
        let bw = self.bandwidth.resolve(&u, self.kernel)?;
        let lrv = self.lrv_with(&u, bw)?;
        let cv = self.critical_value(lrv.b_ratio, 1)?.as_abs_t();
        let se = (lrv.omega[(0, 0)].max(0.0) / sum_sq_unchecked(len)).sqrt();
        Ok(SlopeInterval {
            scale,
            estimate: fit.slope * scale,
            lower: (fit.slope - cv.value * se) * scale,
            upper: (fit.slope + cv.value * se) * scale,
            std_error: se * scale,
            critical_value: cv,
            zero_variance: se == 0.0,
            variance_used: lrv,
        })
    }

    /// `t_IV` for `θ⁽¹⁾ - θ⁽²⁾ = 0` and `t_prod` for the same two pairs.
    pub fn ratio_diff_report(&self, pair1: &TrendPair, pair2: &TrendPair) -> Result<RatioDiffReport> {
        let system = PairSystem::new(vec![pair1.clone(), pair2.clone()])?;
        let fit = iv_system(&system);
        let iv = self.t_iv(&fit, &LinearHypothesis::equal_ratios(2, 0, 1)?)?;
        let (product, product_stat) = self.t_prod_full(pair1, pair2)?;
        Ok(RatioDiffReport {
            theta_hat: [fit.theta_hat[0], fit.theta_hat[1]],
            iv,
            product,
            product_stat,
        })
    }
}

struct IvCore {
    estimate: DVector<f64>,
    diff: DVector<f64>,
    rvr: DMatrix<f64>,
    lrv: LrvEstimate,
    degenerate_pairs: Vec<usize>,
}

impl IvCore {
    /// `d'(RVR')⁻¹d`, or `None` when `RVR'` is exactly zero.
    fn inverse_quadratic(&self) -> Result<Option<f64>> {
        if self.rvr.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        if self.rvr.nrows() == 1 {
            let d = self.diff[0];
            return Ok(Some(d * d / self.rvr[(0, 0)]));
        }
        let eig = SymmetricEigen::new(self.rvr.clone());
        let lmax = eig.eigenvalues.max();
        let (imin, lmin) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one restriction");
        if !(lmin > SINGULAR_TOL * lmax) {
            let v = eig.eigenvectors.column(imin);
            let restriction = v.iamax();
            return Err(Error::Singular {
                restriction,
                detail: format!("smallest eigenvalue of R V R' is {lmin:e} against {lmax:e}"),
            });
        }
        let proj = eig.eigenvectors.transpose() * &self.diff;
        Ok(Some(
            proj.iter()
                .zip(eig.eigenvalues.iter())
                .map(|(p, l)| p * p / l)
                .sum(),
        ))
    }
}

/// `x / se`, with `0/0 = 0` and `x/0 = ±∞`; the flag marks zero `se`.
fn ratio_stat(x: f64, se: f64) -> (f64, bool) {
    if se > 0.0 {
        (x / se, false)
    } else if x == 0.0 {
        (0.0, true)
    } else {
        (x.signum() * f64::INFINITY, true)
    }
}

fn series_scale(series: &TrendSeries) -> f64 {
    let v = series.values();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|y| (y - m).abs()).fold(0.0, f64::max)
}

fn snap_columns(resid: &mut DMatrix<f64>, scales: &[f64]) {
    for (mut col, &scale) in resid.column_iter_mut().zip(scales) {
        if col.amax() <= RESIDUAL_SNAP * scale {
            col.fill(0.0);
        }
    }
}

/// `{x : a x² + b x + c ≤ 0}`.
pub fn solve_quadratic_set(a: f64, b: f64, c: f64) -> ConfidenceSet {
    if a == 0.0 {
        return if b > 0.0 {
            ConfidenceSet::Rays {
                below: -c / b,
                above: f64::INFINITY,
            }
        } else if b < 0.0 {
            ConfidenceSet::Rays {
                below: f64::NEG_INFINITY,
                above: -c / b,
            }
        } else if c <= 0.0 {
            ConfidenceSet::WholeLine
        } else {
            ConfidenceSet::Empty
        };
    }
    quadratic_set_with_disc(a, b, c, b * b - 4.0 * a * c)
}

/// As [`solve_quadratic_set`] with a discriminant computed by the caller.
fn quadratic_set_with_disc(a: f64, b: f64, c: f64, disc: f64) -> ConfidenceSet {
    if a == 0.0 {
        return solve_quadratic_set(a, b, c);
    }
    if a > 0.0 {
        if disc < 0.0 {
            return ConfidenceSet::Empty;
        }
        let (r1, r2) = roots(a, b, c, disc);
        ConfidenceSet::Interval {
            lower: r1,
            upper: r2,
        }
    } else if disc <= 0.0 {
        ConfidenceSet::WholeLine
    } else {
        let (r1, r2) = roots(a, b, c, disc);
        ConfidenceSet::Rays {
            below: r1,
            above: r2,
        }
    }
}

/// Ordered real roots, avoiding cancellation.
fn roots(a: f64, b: f64, c: f64, disc: f64) -> (f64, f64) {
    let s = disc.sqrt();
    let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
    let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    (x1.min(x2), x1.max(x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrendSeries;
    use approx::assert_relative_eq;

    fn series(label: &str, f: impl Fn(f64) -> f64, len: usize) -> TrendSeries {
        TrendSeries::new(label, (1..=len).map(|t| f(t as f64)).collect()).unwrap()
    }

    fn wiggle(t: f64) -> f64 {
        (t * 1.7).sin() + 0.5 * (t * 0.31).cos()
    }

    fn noisy_pair(theta: f64, beta2: f64, len: usize, phase: f64) -> TrendPair {
        TrendPair::new(
            series("a", |t| theta * beta2 * t + wiggle(t + phase), len),
            series("b", |t| beta2 * t + 0.7 * wiggle(2.0 * t + phase), len),
        )
        .unwrap()
    }

    fn inference(b: f64) -> Inference {
        Inference::new(Kernel::Daniell, BandwidthRule::fixed(b).unwrap(), 0.05).unwrap()
    }

    #[test]
    fn hypothesis_rank() {
        let r = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 2.0, -2.0, 0.0]);
        assert!(LinearHypothesis::new(r, DVector::zeros(2)).is_err());
        let r = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(LinearHypothesis::new(r, DVector::zeros(2)).is_err());
        assert!(LinearHypothesis::equal_ratios(2, 0, 0).is_err());
        assert!(LinearHypothesis::equal_ratios(3, 0, 2).is_ok());
    }

    #[test]
    fn null_at_point_estimate() {
        let sys = PairSystem::new(vec![noisy_pair(1.5, 0.2, 40, 0.0), noisy_pair(0.8, 0.1, 40, 3.0)]).unwrap();
        let fit = iv_system(&sys);
        let hyp = LinearHypothesis::new(DMatrix::identity(2, 2), DVector::from_column_slice(&fit.theta_hat)).unwrap();
        let res = inference(0.3).wald_iv(&fit, &hyp).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert!(!res.reject);
    }

    #[test]
    fn noiseless_equal_ratios() {
        let p1 = TrendPair::new(series("a", |t| 2.0 * t, 30), series("b", |t| t + 4.0, 30)).unwrap();
        let p2 = TrendPair::new(series("c", |t| 0.6 * t - 1.0, 30), series("d", |t| 0.3 * t, 30)).unwrap();
        let inf = inference(0.5);
        let fit = iv_system(&PairSystem::new(vec![p1.clone(), p2.clone()]).unwrap());
        let hyp = LinearHypothesis::equal_ratios(2, 0, 1).unwrap();
        let w = inf.wald_iv(&fit, &hyp).unwrap();
        assert_eq!(w.statistic, 0.0);
        assert!(w.zero_variance);
        let p = inf.t_prod(&p1, &p2).unwrap();
        assert!(p.statistic.abs() < 1e-12 || p.zero_variance);
    }

    #[test]
    fn identical_pairs_give_zero_g() {
        let p = noisy_pair(1.2, 0.05, 50, 1.0);
        let inf = inference(0.25);
        let (ps, _) = inf.product_stat(&p, &p).unwrap();
        assert_eq!(ps.g_hat, 0.0);
        let rep = inf.ratio_diff_report(&p, &p).unwrap();
        assert_eq!(rep.product.statistic, 0.0);
        assert_eq!(rep.iv.statistic, 0.0);
        assert!(!rep.iv.reject && !rep.product.reject);
    }

    #[test]
    fn wald_is_t_squared() {
        let sys = PairSystem::new(vec![noisy_pair(1.5, 0.05, 60, 0.0), noisy_pair(0.8, 0.04, 60, 3.0)]).unwrap();
        let fit = iv_system(&sys);
        let hyp = LinearHypothesis::equal_ratios(2, 0, 1).unwrap();
        for inf in [inference(0.2), Inference::new(Kernel::Daniell, BandwidthRule::AndrewsAr1, 0.05).unwrap()] {
            let t = inf.t_iv(&fit, &hyp).unwrap();
            let w = inf.wald_iv(&fit, &hyp).unwrap();
            assert_relative_eq!(w.statistic, t.statistic * t.statistic, max_relative = 1e-10);
            assert_eq!(w.reject, t.reject);
        }
    }

    #[test]
    fn singular_restrictions_are_reported() {
        let p = noisy_pair(1.0, 0.1, 30, 0.0);
        // Two identical pairs make V̂ rank one.
        let fit = iv_system(&PairSystem::new(vec![p.clone(), p]).unwrap());
        let hyp = LinearHypothesis::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let err = inference(0.3).wald_iv(&fit, &hyp).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn quadratic_shapes() {
        assert_eq!(
            solve_quadratic_set(1.0, -3.0, 2.0),
            ConfidenceSet::Interval { lower: 1.0, upper: 2.0 }
        );
        assert_eq!(
            solve_quadratic_set(-1.0, 3.0, -2.0),
            ConfidenceSet::Rays { below: 1.0, above: 2.0 }
        );
        assert_eq!(solve_quadratic_set(-1.0, 0.0, -1.0), ConfidenceSet::WholeLine);
        assert_eq!(solve_quadratic_set(1.0, 0.0, 1.0), ConfidenceSet::Empty);
        assert_eq!(
            solve_quadratic_set(0.0, 2.0, -4.0),
            ConfidenceSet::Rays { below: 2.0, above: f64::INFINITY }
        );
    }

    #[test]
    fn fieller_tight_with_tiny_noise() {
        let pair = TrendPair::new(
            series("a", |t| 3.0 * t + 1e-4 * wiggle(t), 60),
            series("b", |t| t + 1e-4 * wiggle(3.0 * t), 60),
        )
        .unwrap();
        let fs = inference(0.25).fieller_ci(&pair).unwrap();
        let (lo, hi) = fs.set.bounds().unwrap();
        assert!(lo < 3.0 && 3.0 < hi && hi - lo < 1e-3);
    }

    #[test]
    fn fieller_unbounded_for_flat_denominator() {
        let pair = TrendPair::new(
            series("a", |t| 0.1 * t + wiggle(t), 40),
            series("b", |t| 1e-4 * t + wiggle(2.0 * t + 1.0), 40),
        )
        .unwrap();
        let fs = inference(0.25).fieller_ci(&pair).unwrap();
        assert!(!fs.set.is_bounded());
        assert!(fs.denominator_t.abs() < fs.critical_value.value);
    }

    #[test]
    fn slope_ci_noiseless() {
        let s = series("y", |t| 2.0 * t, 20);
        let ci = inference(0.3).slope_ci(&s, 10.0).unwrap();
        assert!(ci.zero_variance);
        assert_relative_eq!(ci.estimate, 20.0, epsilon = 1e-12);
        assert_eq!(ci.lower, ci.upper);
    }
}
