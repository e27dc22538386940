//! Slope, ratio and comparison reports with a JSON audit of every tuning
//! choice.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::{split_pair, Dataset};
use crate::bandwidth::BandwidthRule;
use crate::error::{Error, Result};
use crate::fixedb::{CriticalValue, CvResolver, CvSource, SimConfig};
use crate::inference::{ConfidenceSet, Inference, TestResult};
use crate::kernel::Kernel;
use crate::lrv::LrvEstimate;

/// Display factor for `g` in comparison tables.
pub const G_DISPLAY_SCALE: f64 = 1e4;

/// Which ratios are compared with each other.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    #[default]
    None,
    /// Every pair of listed ratios.
    All,
    /// Ratios whose labels agree once the `SOURCE:` prefix is removed from
    /// both series, e.g. `A:850/A:SFC` with `B:850/B:SFC`.
    ByLevel,
    Pairs(Vec<[String; 2]>),
}

fn default_level() -> f64 {
    0.05
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Presentation factor for slopes, e.g. 10 for per-decade trends of
    /// annual data.
    #[serde(default = "one")]
    pub scale_per: f64,
    /// Critical value simulation settings, used when no closed form applies.
    #[serde(default)]
    pub simulation: SimConfig,
    /// Series for the slope table; every series when empty and no ratios
    /// are requested.
    #[serde(default)]
    pub slopes: Vec<String>,
    /// `numerator/denominator` labels.
    #[serde(default)]
    pub ratios: Vec<String>,
    #[serde(default)]
    pub compare: CompareMode,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            bandwidth: BandwidthRule::default(),
            level: 0.05,
            scale_per: 1.0,
            simulation: SimConfig::default(),
            slopes: Vec::new(),
            ratios: Vec::new(),
            compare: CompareMode::None,
        }
    }
}

impl ReportSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn inference(&self) -> Result<Inference> {
        self.inference_with(Arc::new(CvResolver::new(self.simulation)))
    }

    pub fn inference_with(&self, resolver: Arc<CvResolver>) -> Result<Inference> {
        Ok(Inference::new(self.kernel, self.bandwidth, self.level)?.with_resolver(resolver))
    }
}

/// The tuning behind one reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub kernel: Kernel,
    /// `M / T`.
    pub b: f64,
    /// `M`.
    pub bandwidth: f64,
    pub cv: f64,
    pub cv_b: f64,
    pub cv_source: CvSource,
}

impl Tuning {
    fn new(lrv: &LrvEstimate, cv: &CriticalValue) -> Self {
        Self {
            kernel: lrv.kernel,
            b: lrv.b_ratio,
            bandwidth: lrv.bandwidth,
            cv: cv.value,
            cv_b: cv.b,
            cv_source: cv.source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub series: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
    pub star: bool,
    pub zero_variance: bool,
    pub tuning: Tuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub ratio: String,
    pub theta_hat: f64,
    pub set: ConfidenceSet,
    pub denominator_t: f64,
    pub zero_variance: bool,
    pub tuning: Tuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub first: String,
    pub second: String,
    pub delta_theta: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub t_iv: f64,
    pub delta_star: bool,
    pub iv_tuning: Tuning,
    /// `g` multiplied by `g_scale`.
    pub g: f64,
    pub g_lower: f64,
    pub g_upper: f64,
    pub g_scale: f64,
    pub t_prod: f64,
    pub g_star: bool,
    pub prod_tuning: Tuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub source: String,
    pub series_len: usize,
    pub time_start: f64,
    pub time_step: f64,
    pub dropped_series: Vec<String>,
    pub spec: ReportSpec,
    pub slopes: Vec<SlopeRow>,
    pub ratios: Vec<RatioRow>,
    pub comparisons: Vec<CompareRow>,
}

fn interval(res: &TestResult) -> (f64, f64) {
    match res.confidence_set {
        Some(ConfidenceSet::Interval { lower, upper }) => (lower, upper),
        _ => (f64::NAN, f64::NAN),
    }
}

fn strip_source(label: &str) -> &str {
    label.split_once(':').map_or(label, |(_, rest)| rest)
}

fn level_key(ratio: &str) -> Result<String> {
    let (n, d) = split_pair(ratio)?;
    Ok(format!("{}/{}", strip_source(n), strip_source(d)))
}

fn comparisons(spec: &ReportSpec) -> Result<Vec<[String; 2]>> {
    let r = &spec.ratios;
    let mut out = Vec::new();
    match &spec.compare {
        CompareMode::None => {}
        CompareMode::All => {
            for i in 0..r.len() {
                for j in i + 1..r.len() {
                    out.push([r[i].clone(), r[j].clone()]);
                }
            }
        }
        CompareMode::ByLevel => {
            for i in 0..r.len() {
                for j in i + 1..r.len() {
                    if level_key(&r[i])? == level_key(&r[j])? {
                        out.push([r[i].clone(), r[j].clone()]);
                    }
                }
            }
        }
        CompareMode::Pairs(p) => out.clone_from(p),
    }
    Ok(out)
}

/// Runs the slope, ratio and comparison analyses requested by `spec`.
pub fn run_report(dataset: &Dataset, spec: &ReportSpec) -> Result<Report> {
    run_report_with(dataset, spec, &spec.inference()?)
}

/// As [`run_report`] with a caller-supplied inference setup (for a shared
/// critical value cache).
pub fn run_report_with(dataset: &Dataset, spec: &ReportSpec, inf: &Inference) -> Result<Report> {
    if !(spec.scale_per > 0.0 && spec.scale_per.is_finite()) {
        return Err(Error::invalid(format!("scale_per must be positive, got {}", spec.scale_per)));
    }
    let slope_labels: Vec<String> = if spec.slopes.is_empty() && spec.ratios.is_empty() {
        dataset.labels().map(str::to_string).collect()
    } else {
        spec.slopes.clone()
    };

    let mut slopes = Vec::new();
    for label in &slope_labels {
        let ci = inf.slope_ci(dataset.get(label)?, spec.scale_per)?;
        slopes.push(SlopeRow {
            series: label.clone(),
            estimate: ci.estimate,
            lower: ci.lower,
            upper: ci.upper,
            std_error: ci.std_error,
            star: ci.excludes_zero(),
            zero_variance: ci.zero_variance,
            tuning: Tuning::new(&ci.variance_used, &ci.critical_value),
        });
    }

    let mut ratios = Vec::new();
    for label in &spec.ratios {
        let fs = inf.fieller_ci(&dataset.pair(label)?)?;
        ratios.push(RatioRow {
            ratio: label.clone(),
            theta_hat: fs.theta_hat,
            set: fs.set,
            denominator_t: fs.denominator_t,
            zero_variance: fs.zero_variance,
            tuning: Tuning::new(&fs.variance_used, &fs.critical_value),
        });
    }

    let mut rows = Vec::new();
    for [a, b] in comparisons(spec)? {
        let rep = inf.ratio_diff_report(&dataset.pair(&a)?, &dataset.pair(&b)?)?;
        let (dl, du) = interval(&rep.iv);
        let (gl, gu) = interval(&rep.product);
        rows.push(CompareRow {
            first: a,
            second: b,
            delta_theta: rep.delta_theta(),
            delta_lower: dl,
            delta_upper: du,
            t_iv: rep.iv.statistic,
            delta_star: rep.iv.reject,
            iv_tuning: Tuning::new(&rep.iv.variance_used, &rep.iv.critical_value),
            g: rep.g_hat() * G_DISPLAY_SCALE,
            g_lower: gl * G_DISPLAY_SCALE,
            g_upper: gu * G_DISPLAY_SCALE,
            g_scale: G_DISPLAY_SCALE,
            t_prod: rep.product.statistic,
            g_star: rep.product.reject,
            prod_tuning: Tuning::new(&rep.product.variance_used, &rep.product.critical_value),
        });
    }

    Ok(Report {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        source: dataset.source.clone(),
        series_len: dataset.len(),
        time_start: dataset.start(),
        time_step: dataset.step(),
        dropped_series: dataset.dropped.clone(),
        spec: spec.clone(),
        slopes,
        ratios,
        comparisons: rows,
    })
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<String> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn set_columns(set: &ConfidenceSet) -> (&'static str, f64, f64) {
    match *set {
        ConfidenceSet::Interval { lower, upper } => ("interval", lower, upper),
        ConfidenceSet::Rays { below, above } => ("rays", below, above),
        ConfidenceSet::WholeLine => ("whole_line", f64::NEG_INFINITY, f64::INFINITY),
        ConfidenceSet::Empty => ("empty", f64::NAN, f64::NAN),
    }
}

fn star(s: bool) -> &'static str {
    if s {
        "*"
    } else {
        ""
    }
}

impl Report {
    pub fn slopes_csv(&self) -> Result<String> {
        csv_string(
            self.slopes.iter().map(|r| {
                (
                    &r.series,
                    r.estimate,
                    r.lower,
                    r.upper,
                    r.std_error,
                    star(r.star),
                    r.tuning.b,
                    r.tuning.cv,
                    r.zero_variance,
                )
            }),
            &["series", "estimate", "lower", "upper", "std_error", "star", "b", "cv", "zero_variance"],
        )
    }

    pub fn ratios_csv(&self) -> Result<String> {
        csv_string(
            self.ratios.iter().map(|r| {
                let (shape, lo, hi) = set_columns(&r.set);
                (&r.ratio, r.theta_hat, shape, lo, hi, r.denominator_t, r.tuning.b, r.tuning.cv)
            }),
            &["ratio", "theta_hat", "shape", "lower", "upper", "denominator_t", "b", "cv"],
        )
    }

    pub fn compare_csv(&self) -> Result<String> {
        csv_string(
            self.comparisons.iter().map(|r| {
                (
                    (&r.first, &r.second, r.delta_theta, r.delta_lower, r.delta_upper, star(r.delta_star)),
                    (r.t_iv, r.iv_tuning.b, r.iv_tuning.cv),
                    (r.g, r.g_lower, r.g_upper, star(r.g_star), r.t_prod, r.prod_tuning.b, r.prod_tuning.cv),
                )
            }),
            &[
                "first", "second", "delta_theta", "delta_lower", "delta_upper", "delta_star", "t_iv",
                "b_iv", "cv_iv", "g_x1e4", "g_lower", "g_upper", "g_star", "t_prod", "b_prod", "cv_prod",
            ],
        )
    }

    pub fn audit_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the non-empty tables as CSV and/or the audit as JSON into
    /// `dir`, returning the paths written.
    pub fn write(&self, dir: &Path, csv: bool, json: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        if csv {
            if !self.slopes.is_empty() {
                put("slopes.csv", self.slopes_csv()?)?;
            }
            if !self.ratios.is_empty() {
                put("ratios.csv", self.ratios_csv()?)?;
            }
            if !self.comparisons.is_empty() {
                put("compare.csv", self.compare_csv()?)?;
            }
        }
        if json {
            put("audit.json", self.audit_json()?)?;
        }
        Ok(written)
    }
}
