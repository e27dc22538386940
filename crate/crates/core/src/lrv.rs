//! Kernel (HAC) estimation of multivariate long-run variance matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// `Ω̂ = Γ̂₀ + Σ_{j=1}^{T-1} k(j/M) (Γ̂ⱼ + Γ̂ⱼ')` together with the tuning that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub omega: DMatrix<f64>,
    pub bandwidth: f64,
    /// `M / T`.
    pub b_ratio: f64,
    pub kernel: Kernel,
}

impl LrvEstimate {
    /// `a' Ω̂ a`.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let m = self.omega.nrows();
        debug_assert_eq!(a.len(), m);
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += a[i] * self.omega[(i, j)] * a[j];
            }
        }
        acc
    }
}

fn check_finite(residuals: &DMatrix<f64>) -> Result<()> {
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("residual matrix contains non-finite values"));
    }
    if residuals.nrows() == 0 || residuals.ncols() == 0 {
        return Err(Error::invalid("residual matrix is empty"));
    }
    Ok(())
}

/// `Γ̂ⱼ = T⁻¹ Σ_{t=j+1}^{T} x_t x_{t-j}'` for a `T × m` matrix of residuals.
pub fn autocovariance(residuals: &DMatrix<f64>, lag: usize) -> Result<DMatrix<f64>> {
    let len = residuals.nrows();
    if lag >= len {
        return Err(Error::invalid(format!(
            "lag {lag} out of range for T = {len}"
        )));
    }
    Ok(gamma(residuals, lag))
}

fn gamma(x: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    let (len, m) = x.shape();
    let inv = 1.0 / len as f64;
    DMatrix::from_fn(m, m, |a, c| {
        let (ca, cc) = (x.column(a), x.column(c));
        let lead = &ca.as_slice()[lag..];
        let back = &cc.as_slice()[..len - lag];
        lead.iter().zip(back).map(|(u, v)| u * v).sum::<f64>() * inv
    })
}

/// All sample autocovariances of a residual matrix, so that several
/// kernels or bandwidths can be applied without recomputing them.
#[derive(Debug, Clone)]
pub struct Autocovariances {
    len: usize,
    gammas: Vec<DMatrix<f64>>,
}

impl Autocovariances {
    pub fn new(residuals: &DMatrix<f64>) -> Result<Self> {
        check_finite(residuals)?;
        let len = residuals.nrows();
        let gammas = (0..len).map(|j| gamma(residuals, j)).collect();
        Ok(Self { len, gammas })
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn lag(&self, j: usize) -> &DMatrix<f64> {
        &self.gammas[j]
    }

    pub fn lrv(&self, kernel: Kernel, bandwidth: f64) -> Result<LrvEstimate> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        let mut omega = self.gammas[0].clone();
        for (j, g) in self.gammas.iter().enumerate().skip(1) {
            let w = kernel.weight(j as f64 / bandwidth);
            if w == 0.0 {
                continue;
            }
            omega += (g + g.transpose()) * w;
        }
        // Symmetric by construction; average away rounding asymmetry.
        let omega = (&omega + omega.transpose()) * 0.5;
        Ok(LrvEstimate {
            omega,
            bandwidth,
            b_ratio: bandwidth / self.len as f64,
            kernel,
        })
    }
}

/// Kernel long-run variance of a `T × m` residual matrix with bandwidth `M`.
pub fn lrv(residuals: &DMatrix<f64>, kernel: Kernel, bandwidth: f64) -> Result<LrvEstimate> {
    Autocovariances::new(residuals)?.lrv(kernel, bandwidth)
}
