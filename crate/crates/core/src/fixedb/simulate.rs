//! Monte Carlo simulation of the fixed-b null limit of the IV and product
//! statistics.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::PbOperator;
use super::{CriticalValue, CvSource, StatForm};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_count: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step_count: 1_000,
            replications: 50_000,
            seed: 0x5eed_cafe,
        }
    }
}

/// One replication of the limit: `Z*`, `P_b(W̃*)` and the resulting `|t|`
/// (for `q = 1`) or Wald value.
#[derive(Debug, Clone)]
pub struct NullDraw {
    pub z: Vec<f64>,
    pub pb: DMatrix<f64>,
    pub statistic: f64,
}

/// RNG for replication `index` of a run seeded by `seed`. Streams are
/// independent, so results do not depend on how replications are
/// scheduled.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the `q`-dimensional detrended bridge `W̃*` and `Z*` on the grid.
///
/// With `s_i = (i - ½)/N`, `Σ (s_i - ½)/N` over the first `i` steps equals
/// `L(i/N)` exactly, which keeps `Z*` orthogonal to `W̃*` on the grid.
fn draw_bridge(rng: &mut ChaCha8Rng, steps: usize, q: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = steps as f64;
    let scale = n.sqrt().recip();
    let mut bridge = DMatrix::zeros(steps, q);
    let mut z = Vec::with_capacity(q);
    let mut incr = vec![0.0; steps];
    for c in 0..q {
        for v in incr.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *v = e * scale;
        }
        let mut integral = 0.0;
        for (i, dw) in incr.iter().enumerate() {
            integral += ((i as f64 + 0.5) / n - 0.5) * dw;
        }
        let w1: f64 = incr.iter().sum();
        let mut w = 0.0;
        for (i, dw) in incr.iter().enumerate() {
            w += dw;
            let r = (i + 1) as f64 / n;
            let l = 0.5 * (r * r - r);
            bridge[(i, c)] = w - r * w1 - 12.0 * l * integral;
        }
        z.push(12f64.sqrt() * integral);
    }
    (z, bridge)
}

fn statistic(z: &[f64], pb: &DMatrix<f64>) -> f64 {
    if z.len() == 1 {
        return z[0].abs() / pb[(0, 0)].sqrt();
    }
    let zv = nalgebra::DVector::from_column_slice(z);
    match pb.clone().cholesky() {
        Some(ch) => zv.dot(&ch.solve(&zv)),
        None => f64::INFINITY,
    }
}

/// Simulates `reps` draws from the null limit for the given kernel, `b` and
/// number of restrictions.
pub fn simulate_null_draws(kernel: Kernel, b: f64, q: usize, cfg: &SimConfig) -> Result<Vec<NullDraw>> {
    if q == 0 {
        return Err(Error::invalid("number of restrictions must be at least 1"));
    }
    if cfg.replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let op = PbOperator::new(kernel, b, cfg.step_count)?;
    let draws = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(cfg.seed, rep);
            let (z, bridge) = draw_bridge(&mut rng, cfg.step_count, q);
            let pb = op.apply(&bridge);
            let statistic = statistic(&z, &pb);
            NullDraw { z, pb, statistic }
        })
        .collect();
    Ok(draws)
}

/// Empirical upper quantile: the smallest draw `x` with at least a
/// `1 - level` share of draws at or below it.
pub fn upper_quantile(values: &mut [f64], level: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let idx = ((1.0 - level) * n as f64).ceil() as usize;
    values[idx.clamp(1, n) - 1]
}

/// Simulated fixed-b critical value. For `q = 1` this is the upper `level`
/// quantile of `|t|` (so `level` is the two-sided size); for `q > 1` it is
/// the upper quantile of the Wald statistic.
pub fn simulate_null_cv(
    kernel: Kernel,
    b: f64,
    level: f64,
    q: usize,
    cfg: &SimConfig,
) -> Result<CriticalValue> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "simulated critical values need a level in (0, 1), got {level}"
        )));
    }
    let mut stats: Vec<f64> = simulate_null_draws(kernel, b, q, cfg)?
        .into_iter()
        .map(|d| d.statistic)
        .collect();
    let value = upper_quantile(&mut stats, level);
    Ok(CriticalValue {
        value,
        level,
        b,
        kernel,
        q,
        form: if q == 1 { StatForm::AbsT } else { StatForm::Wald },
        source: CvSource::Simulated {
            replications: cfg.replications,
            step_count: cfg.step_count,
            seed: cfg.seed,
        },
    })
}
