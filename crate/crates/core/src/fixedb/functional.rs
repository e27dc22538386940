//! Discretized `P_b` functional of a path on `[0, 1]`.
//!
//! Paths are stored at `r_i = i/N`, `i = 1..N`, and integrals are
//! right-endpoint Riemann sums on that grid.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::{FixedbClass, Kernel};

/// Smallest grid accepted by [`PathGrid::new`].
pub const MIN_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    paths: DMatrix<f64>,
}

impl PathGrid {
    /// `paths` is `N × m`, row `i` holding `Q(i/N)` for `i = 1..N`.
    pub fn new(paths: DMatrix<f64>) -> Result<Self> {
        if paths.nrows() < MIN_STEPS {
            return Err(Error::invalid(format!(
                "path grid needs at least {MIN_STEPS} steps, got {}",
                paths.nrows()
            )));
        }
        Ok(Self { paths })
    }

    /// Samples a deterministic path `r ↦ Q(r)` on the grid.
    pub fn from_fn(step_count: usize, dim: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let n = step_count as f64;
        Self::new(DMatrix::from_fn(step_count, dim, |i, c| f((i + 1) as f64 / n, c)))
    }

    pub fn step_count(&self) -> usize {
        self.paths.nrows()
    }

    pub fn dim(&self) -> usize {
        self.paths.ncols()
    }

    pub fn paths(&self) -> &DMatrix<f64> {
        &self.paths
    }
}

/// Precomputed evaluator of `P_b` for one kernel, `b` and grid size. Cheap
/// to share across threads.
#[derive(Clone)]
pub struct PbOperator {
    kernel: Kernel,
    b: f64,
    steps: usize,
    /// Grid lag corresponding to `b`.
    lag: usize,
    boundary_coef: f64,
    toeplitz: Option<ToeplitzFft>,
}

#[derive(Clone)]
struct ToeplitzFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Spectrum of the circulant embedding, already divided by the FFT
    /// length.
    spectrum: Vec<Complex<f64>>,
}

impl PbOperator {
    pub fn new(kernel: Kernel, b: f64, steps: usize) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::invalid(format!("b must lie in (0, 1], got {b}")));
        }
        if steps < 2 {
            return Err(Error::invalid("grid needs at least two steps"));
        }
        let n = steps as f64;
        let lag = ((b * n).round() as usize).min(steps);
        let class = kernel.fixedb_class();
        let toeplitz = match class {
            FixedbClass::Bartlett => None,
            FixedbClass::Type1 | FixedbClass::Type2 => {
                let weights: Vec<f64> = (0..steps)
                    .map(|d| {
                        let r = d as f64 / n;
                        if class == FixedbClass::Type2 && r >= b {
                            0.0
                        } else {
                            -kernel.second_derivative(r / b) / (b * b * n * n)
                        }
                    })
                    .collect();
                Some(ToeplitzFft::new(&weights))
            }
        };
        let boundary_coef = match class {
            FixedbClass::Type2 => kernel.left_derivative_at_one() / b,
            FixedbClass::Bartlett => -1.0 / b,
            FixedbClass::Type1 => 0.0,
        };
        Ok(Self {
            kernel,
            b,
            steps,
            lag,
            boundary_coef,
            toeplitz,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `P_b(Q)` for an `N × m` path matrix.
    pub fn apply(&self, paths: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(paths.nrows(), self.steps, "path length does not match the operator grid");
        let m = paths.ncols();
        let n = self.steps as f64;
        let mut out = DMatrix::zeros(m, m);

        if let Some(tf) = &self.toeplitz {
            let smoothed = tf.apply(paths);
            for a in 0..m {
                for c in 0..m {
                    out[(a, c)] = paths.column(a).dot(&smoothed.column(c));
                }
            }
        } else {
            // Bartlett: (2/b) ∫ Q Q'.
            for a in 0..m {
                for c in 0..m {
                    out[(a, c)] = 2.0 / self.b * paths.column(a).dot(&paths.column(c)) / n;
                }
            }
        }

        if self.boundary_coef != 0.0 && self.lag < self.steps {
            let h = self.lag;
            let len = self.steps - h;
            for a in 0..m {
                for c in 0..m {
                    let pa = paths.column(a);
                    let pc = paths.column(c);
                    let mut s = 0.0;
                    for i in 0..len {
                        s += pa[i + h] * pc[i] + pa[i] * pc[i + h];
                    }
                    out[(a, c)] += self.boundary_coef * s / n;
                }
            }
        }
        (&out + out.transpose()) * 0.5
    }
}

impl ToeplitzFft {
    fn new(weights: &[f64]) -> Self {
        let steps = weights.len();
        let size = (2 * steps).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        spectrum[0].re = weights[0];
        for d in 1..steps {
            spectrum[d].re = weights[d];
            spectrum[size - d].re = weights[d];
        }
        forward.process(&mut spectrum);
        let scale = 1.0 / size as f64;
        for s in &mut spectrum {
            *s *= scale;
        }
        Self {
            forward,
            inverse,
            spectrum,
        }
    }

    /// `K Q` column by column. The kernel matrix is real and symmetric, so
    /// two real columns travel through each complex transform.
    fn apply(&self, paths: &DMatrix<f64>) -> DMatrix<f64> {
        let (steps, m) = paths.shape();
        let size = self.spectrum.len();
        let mut out = DMatrix::zeros(steps, m);
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        let mut col = 0;
        while col < m {
            let paired = col + 1 < m;
            buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            for i in 0..steps {
                buf[i].re = paths[(i, col)];
                if paired {
                    buf[i].im = paths[(i, col + 1)];
                }
            }
            self.forward.process(&mut buf);
            for (z, s) in buf.iter_mut().zip(&self.spectrum) {
                *z *= *s;
            }
            self.inverse.process(&mut buf);
            for i in 0..steps {
                out[(i, col)] = buf[i].re;
                if paired {
                    out[(i, col + 1)] = buf[i].im;
                }
            }
            col += 2;
        }
        out
    }
}

/// `P_b(Q)` for a sampled path, using the branch implied by the kernel's
/// fixed-b class.
pub fn pb_functional(path: &PathGrid, kernel: Kernel, b: f64) -> Result<DMatrix<f64>> {
    Ok(PbOperator::new(kernel, b, path.step_count())?.apply(path.paths()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bartlett_linear_path() {
        let grid = PathGrid::from_fn(4000, 1, |r, _| r).unwrap();
        let full = pb_functional(&grid, Kernel::Bartlett, 1.0).unwrap();
        assert_relative_eq!(full[(0, 0)], 2.0 / 3.0, epsilon = 1e-3);
        let half = pb_functional(&grid, Kernel::Bartlett, 0.5).unwrap();
        // 4/3 - (1/b)∫₀^½ 2r(r + ½) dr = 4/3 - 5/12.
        assert_relative_eq!(half[(0, 0)], 11.0 / 12.0, epsilon = 1e-3);
    }

    #[test]
    fn zero_path_gives_zero() {
        let grid = PathGrid::new(DMatrix::zeros(200, 2)).unwrap();
        for k in Kernel::ALL {
            assert_eq!(pb_functional(&grid, k, 0.3).unwrap(), DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn short_grid_rejected() {
        assert!(PathGrid::new(DMatrix::zeros(50, 1)).is_err());
        let grid = PathGrid::new(DMatrix::zeros(200, 1)).unwrap();
        assert!(pb_functional(&grid, Kernel::Daniell, 0.0).is_err());
        assert!(pb_functional(&grid, Kernel::Daniell, 1.5).is_err());
    }

    #[test]
    fn odd_column_count_matches_single_columns() {
        let grid = PathGrid::from_fn(300, 3, |r, c| (r * (c + 1) as f64 * 3.0).sin()).unwrap();
        let joint = pb_functional(&grid, Kernel::QuadraticSpectral, 0.4).unwrap();
        for c in 0..3 {
            let single = PathGrid::new(grid.paths().columns(c, 1).into_owned()).unwrap();
            let v = pb_functional(&single, Kernel::QuadraticSpectral, 0.4).unwrap()[(0, 0)];
            assert_relative_eq!(joint[(c, c)], v, max_relative = 1e-12);
        }
    }
}
