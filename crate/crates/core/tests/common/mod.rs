#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trendratio::{Kernel, TrendPair, TrendSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn ar1(rng: &mut impl Rng, len: usize, phi: f64) -> Vec<f64> {
    let mut prev = 0.0;
    (0..len)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            prev = phi * prev + e;
            prev
        })
        .collect()
}

/// `μ + β t + σ u_t` with `t = 1..T`.
pub fn trend_series(label: &str, intercept: f64, slope: f64, noise: &[f64], sigma: f64) -> TrendSeries {
    let values = noise
        .iter()
        .enumerate()
        .map(|(i, u)| intercept + slope * (i + 1) as f64 + sigma * u)
        .collect();
    TrendSeries::new(label, values).unwrap()
}

pub fn random_pair(rng: &mut impl Rng, len: usize, beta1: f64, beta2: f64, phi: f64) -> TrendPair {
    let u1 = ar1(rng, len, phi);
    let u2 = ar1(rng, len, phi);
    let mu1 = rng.random_range(-5.0..5.0);
    let mu2 = rng.random_range(-5.0..5.0);
    TrendPair::new(
        trend_series("num", mu1, beta1, &u1, 1.0),
        trend_series("den", mu2, beta2, &u2, 1.0),
    )
    .unwrap()
}

/// Definitional `T⁻¹ Σ_s Σ_t k(|s - t|/M) x_s x_t'`.
pub fn double_sum_lrv(x: &DMatrix<f64>, kernel: Kernel, bandwidth: f64) -> DMatrix<f64> {
    let (len, m) = x.shape();
    let mut out = DMatrix::zeros(m, m);
    for s in 0..len {
        for t in 0..len {
            let w = kernel.weight((s as f64 - t as f64).abs() / bandwidth);
            for a in 0..m {
                for c in 0..m {
                    out[(a, c)] += w * x[(s, a)] * x[(t, c)];
                }
            }
        }
    }
    out / len as f64
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
