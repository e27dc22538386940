//! Simulation of two trending pairs with AR(1) noise, and size and power
//! experiments for the equal-ratio tests.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthRule;
use crate::error::{Error, Result};
use crate::fixedb::replication_rng;
use crate::inference::{Inference, LinearHypothesis};
use crate::kernel::Kernel;
use crate::model::{iv_system, PairSystem, TrendPair, TrendSeries};

/// Noise of the four series, ordered `u₁⁽¹⁾, u₂⁽¹⁾, u₁⁽²⁾, u₂⁽²⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ar_coeffs: [f64; 4],
    /// Correlation of the two innovations within a pair.
    pub within_pair_corr: f64,
}

impl NoiseSpec {
    pub fn iid() -> Self {
        Self {
            ar_coeffs: [0.0; 4],
            within_pair_corr: 0.0,
        }
    }

    /// The serially correlated design: `φ = (.3, .7, .5, .9)` and within-pair
    /// correlation `.5`.
    pub fn serial() -> Self {
        Self {
            ar_coeffs: [0.3, 0.7, 0.5, 0.9],
            within_pair_corr: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(phi) = self.ar_coeffs.iter().find(|p| !(p.abs() < 1.0)) {
            return Err(Error::invalid(format!("AR coefficient {phi} is not in (-1, 1)")));
        }
        if !(self.within_pair_corr.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "within-pair correlation {} is not in (-1, 1)",
                self.within_pair_corr
            )));
        }
        Ok(())
    }
}

/// `y_{kt}⁽ⁱ⁾ = β_k⁽ⁱ⁾ t + u_{kt}⁽ⁱ⁾`, `t = 1..T`, with zero intercepts and
/// `u₀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub len: usize,
    pub noise: NoiseSpec,
    /// `β₁⁽¹⁾, β₂⁽¹⁾, β₁⁽²⁾, β₂⁽²⁾`.
    pub slopes: [f64; 4],
}

impl DgpSpec {
    /// Slopes from denominators and ratios, `β₁⁽ⁱ⁾ = θ⁽ⁱ⁾β₂⁽ⁱ⁾`.
    pub fn from_ratios(len: usize, noise: NoiseSpec, beta2: [f64; 2], theta: [f64; 2]) -> Self {
        Self {
            len,
            noise,
            slopes: [theta[0] * beta2[0], beta2[0], theta[1] * beta2[1], beta2[1]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len < 8 {
            return Err(Error::invalid(format!("simulated series need T >= 8, got {}", self.len)));
        }
        if self.slopes.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("slopes must be finite"));
        }
        self.noise.validate()
    }
}

/// Draws one pair system from `rng`. Innovations are drawn four per period
/// in the order `z₁⁽¹⁾, z₂⁽¹⁾, z₁⁽²⁾, z₂⁽²⁾`.
pub fn simulate_with<R: Rng + ?Sized>(dgp: &DgpSpec, rng: &mut R) -> Result<PairSystem> {
    dgp.validate()?;
    let phi = dgp.noise.ar_coeffs;
    let rho = dgp.noise.within_pair_corr;
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut cols: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(dgp.len));
    let mut u = [0.0; 4];
    for t in 1..=dgp.len {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let eps = [z[0], rho * z[0] + rho_c * z[1], z[2], rho * z[2] + rho_c * z[3]];
        for k in 0..4 {
            u[k] = phi[k] * u[k] + eps[k];
            cols[k].push(dgp.slopes[k] * t as f64 + u[k]);
        }
    }
    let [y11, y21, y12, y22] = cols;
    PairSystem::new(vec![
        TrendPair::new(TrendSeries::new("y1_1", y11)?, TrendSeries::new("y2_1", y21)?)?,
        TrendPair::new(TrendSeries::new("y1_2", y12)?, TrendSeries::new("y2_2", y22)?)?,
    ])
}

/// One draw with its own RNG stream.
pub fn simulate_system(dgp: &DgpSpec, seed: u64) -> Result<PairSystem> {
    simulate_with(dgp, &mut replication_rng(seed, 0))
}

/// A design point: sample size, denominator slopes and ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub len: usize,
    pub beta2: [f64; 2],
    #[serde(default = "unit_ratios")]
    pub theta: [f64; 2],
}

fn unit_ratios() -> [f64; 2] {
    [1.0, 1.0]
}

/// `θ⁽¹⁾` fixed while `θ⁽²⁾` runs over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBlock {
    pub len: usize,
    pub beta2: [f64; 2],
    #[serde(default = "one")]
    pub theta1: f64,
    pub theta2: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_kernel() -> Kernel {
    Kernel::Daniell
}

fn default_level() -> f64 {
    0.05
}

fn default_bandwidths() -> Vec<BandwidthRule> {
    vec![
        BandwidthRule::AndrewsAr1,
        BandwidthRule::FixedFraction(0.25),
        BandwidthRule::FixedFraction(0.5),
        BandwidthRule::FixedFraction(1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    #[serde(default = "default_level")]
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_bandwidths")]
    pub bandwidths: Vec<BandwidthRule>,
    pub noise: NoiseSpec,
    /// Null (or arbitrary) design points for [`rejection_table`].
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    /// Grids for [`power_curve`].
    #[serde(default)]
    pub power: Vec<PowerBlock>,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be positive"));
        }
        if self.replications < 1000 {
            log::warn!(
                "{} replications: frequencies have standard errors above .007",
                self.replications
            );
        }
        if self.bandwidths.is_empty() {
            return Err(Error::invalid("no bandwidth rules given"));
        }
        Inference::new(self.kernel, self.bandwidths[0], self.level)?;
        self.noise.validate()
    }

    /// The null design of the size table: `β₂ ∈ {10, 2, .2, .05, .025, .005, 0}`
    /// for each sample size, `θ = 1`.
    pub fn size_grid(noise: NoiseSpec, lens: &[usize], replications: usize, seed: u64) -> Self {
        let slopes = [10.0, 2.0, 0.2, 0.05, 0.025, 0.005, 0.0];
        let cells = lens
            .iter()
            .flat_map(|&len| {
                slopes.iter().map(move |&b| CellSpec {
                    len,
                    beta2: [b, b],
                    theta: [1.0, 1.0],
                })
            })
            .collect();
        Self {
            name: "size".into(),
            kernel: Kernel::Daniell,
            level: 0.05,
            replications,
            seed,
            bandwidths: default_bandwidths(),
            noise,
            cells,
            power: Vec::new(),
        }
    }

    /// The power design at `T = 100`: for each slope size, `θ⁽²⁾ = 1 + k·h`
    /// with `k = -3..3`, the step `h` growing as the slopes shrink.
    pub fn power_grid(noise: NoiseSpec, replications: usize, seed: u64) -> Self {
        let block = |b: f64, step: f64| PowerBlock {
            len: 100,
            beta2: [b, b],
            theta1: 1.0,
            theta2: (-3..=3).map(|k| 1.0 + k as f64 * step).collect(),
        };
        Self {
            name: "power".into(),
            kernel: Kernel::Daniell,
            level: 0.05,
            replications,
            seed,
            bandwidths: default_bandwidths(),
            noise,
            cells: Vec::new(),
            power: vec![
                block(10.0, 0.0025),
                block(2.0, 0.04 / 3.0),
                block(0.2, 0.4 / 3.0),
                block(0.05, 2.0 / 3.0),
                block(0.025, 5.0),
                block(0.005, 50.0 / 3.0),
            ],
        }
    }

    fn power_cells(&self) -> Vec<CellSpec> {
        self.power
            .iter()
            .flat_map(|blk| {
                blk.theta2.iter().map(move |&t2| CellSpec {
                    len: blk.len,
                    beta2: blk.beta2,
                    theta: [blk.theta1, t2],
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Frequency {
    pub rejections: u64,
    pub replications: u64,
}

impl Frequency {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }

    /// Binomial standard error `√(p(1 - p)/n)`.
    pub fn std_error(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthOutcome {
    pub bandwidth: BandwidthRule,
    pub t_iv: Frequency,
    pub t_prod: Frequency,
    /// Replications in which a test could not be computed; counted as
    /// non-rejections.
    pub failures: u64,
    /// Average realized `b` of the IV test.
    pub mean_b_iv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellSpec,
    pub outcomes: Vec<BandwidthOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub name: String,
    pub kernel: Kernel,
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub rows: Vec<CellResult>,
}

#[derive(Clone, Copy, Default)]
struct Tally {
    iv: u64,
    prod: u64,
    failures: u64,
    b_sum: f64,
}

/// Rejection frequencies of `t_IV` and `t_prod` for `θ⁽¹⁾ = θ⁽²⁾` over the
/// spec's cells.
pub fn rejection_table(spec: &ExperimentSpec) -> Result<RejectionTable> {
    run_cells(spec, &spec.cells)
}

/// As [`rejection_table`], over the spec's `θ⁽²⁾` grids.
pub fn power_curve(spec: &ExperimentSpec) -> Result<RejectionTable> {
    run_cells(spec, &spec.power_cells())
}

fn run_cells(spec: &ExperimentSpec, cells: &[CellSpec]) -> Result<RejectionTable> {
    spec.validate()?;
    let tests: Vec<Inference> = spec
        .bandwidths
        .iter()
        .map(|&bw| Inference::new(spec.kernel, bw, spec.level))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let dgp = DgpSpec::from_ratios(cell.len, spec.noise, cell.beta2, cell.theta);
        dgp.validate()?;
        log::info!("cell T={} beta2={:?} theta={:?}", cell.len, cell.beta2, cell.theta);
        // Collected in replication order and summed sequentially, so the
        // float sum of realized b does not depend on the thread schedule.
        let per_rep: Vec<Vec<Tally>> = (0..spec.replications as u64)
            .into_par_iter()
            .map(|rep| one_replication(&dgp, &tests, spec.seed, rep))
            .collect::<Result<_>>()?;
        let mut tallies = vec![Tally::default(); tests.len()];
        for rep in &per_rep {
            for (a, b) in tallies.iter_mut().zip(rep) {
                a.iv += b.iv;
                a.prod += b.prod;
                a.failures += b.failures;
                a.b_sum += b.b_sum;
            }
        }
        let n = spec.replications as u64;
        let outcomes = spec
            .bandwidths
            .iter()
            .zip(tallies)
            .map(|(&bandwidth, t)| BandwidthOutcome {
                bandwidth,
                t_iv: Frequency {
                    rejections: t.iv,
                    replications: n,
                },
                t_prod: Frequency {
                    rejections: t.prod,
                    replications: n,
                },
                failures: t.failures,
                mean_b_iv: t.b_sum / n as f64,
            })
            .collect();
        rows.push(CellResult {
            cell: *cell,
            outcomes,
        });
    }
    Ok(RejectionTable {
        name: spec.name.clone(),
        kernel: spec.kernel,
        level: spec.level,
        replications: spec.replications,
        seed: spec.seed,
        noise: spec.noise,
        rows,
    })
}

fn one_replication(dgp: &DgpSpec, tests: &[Inference], seed: u64, rep: u64) -> Result<Vec<Tally>> {
    let system = simulate_with(dgp, &mut replication_rng(seed, rep))?;
    let fit = iv_system(&system);
    let hyp = LinearHypothesis::equal_ratios(2, 0, 1)?;
    let (p1, p2) = (&system.pairs()[0], &system.pairs()[1]);
    Ok(tests
        .iter()
        .map(|inf| {
            let mut t = Tally::default();
            match inf.t_iv(&fit, &hyp) {
                Ok(r) => {
                    t.iv = r.reject as u64;
                    t.b_sum = r.variance_used.b_ratio;
                }
                Err(e) => {
                    log::debug!("replication {rep}: t_IV failed: {e}");
                    t.failures += 1;
                }
            }
            match inf.t_prod(p1, p2) {
                Ok(r) => t.prod = r.reject as u64,
                Err(e) => {
                    log::debug!("replication {rep}: t_prod failed: {e}");
                    t.failures += 1;
                }
            }
            t
        })
        .collect())
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl RejectionTable {
    /// One row per cell and one `t_iv`/`t_prod` column pair per bandwidth,
    /// as in the printed tables.
    pub fn to_wide_csv(&self) -> String {
        let mut out = String::from("T,beta2_1,theta_1,beta2_2,theta_2");
        if let Some(first) = self.rows.first() {
            for o in &first.outcomes {
                let _ = write!(out, ",t_iv_b={0},t_prod_b={0}", o.bandwidth);
            }
        }
        out.push('\n');
        for row in &self.rows {
            let c = row.cell;
            let theta = |i: usize| {
                if c.beta2[i] == 0.0 {
                    "na".to_string()
                } else {
                    fmt_num(c.theta[i])
                }
            };
            let _ = write!(
                out,
                "{},{},{},{},{}",
                c.len,
                fmt_num(c.beta2[0]),
                theta(0),
                fmt_num(c.beta2[1]),
                theta(1)
            );
            for o in &row.outcomes {
                let _ = write!(out, ",{:.3},{:.3}", o.t_iv.rate(), o.t_prod.rate());
            }
            out.push('\n');
        }
        out
    }

    /// One row per (cell, bandwidth, statistic) with counts and standard
    /// errors.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from(
            "T,beta2_1,theta_1,beta2_2,theta_2,bandwidth,statistic,rejections,replications,rate,std_error,mean_b\n",
        );
        for row in &self.rows {
            let c = row.cell;
            for o in &row.outcomes {
                for (name, f) in [("t_iv", o.t_iv), ("t_prod", o.t_prod)] {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                        c.len,
                        fmt_num(c.beta2[0]),
                        fmt_num(c.theta[0]),
                        fmt_num(c.beta2[1]),
                        fmt_num(c.theta[1]),
                        o.bandwidth,
                        name,
                        f.rejections,
                        f.replications,
                        f.rate(),
                        f.std_error(),
                        o.mean_b_iv
                    );
                }
            }
        }
        out
    }
}
