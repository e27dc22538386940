//! Kernel weighting functions used by the long-run variance estimator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Bartlett,
    Parzen,
    #[serde(rename = "qs")]
    QuadraticSpectral,
    #[default]
    Daniell,
}

/// Shape class that selects the form of the fixed-b limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedbClass {
    /// Twice continuously differentiable everywhere.
    Type1,
    /// Zero outside `|x| < 1`, smooth except at `|x| = 1`.
    Type2,
    Bartlett,
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [
        Kernel::Bartlett,
        Kernel::Parzen,
        Kernel::QuadraticSpectral,
        Kernel::Daniell,
    ];

    pub fn fixedb_class(self) -> FixedbClass {
        match self {
            Kernel::Bartlett => FixedbClass::Bartlett,
            Kernel::Parzen => FixedbClass::Type2,
            Kernel::QuadraticSpectral | Kernel::Daniell => FixedbClass::Type1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Bartlett => "bartlett",
            Kernel::Parzen => "parzen",
            Kernel::QuadraticSpectral => "qs",
            Kernel::Daniell => "daniell",
        }
    }

    /// `k(x)`. Kernels are even, so only `|x|` matters.
    pub fn weight(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Bartlett => (1.0 - a).max(0.0),
            Kernel::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else if a <= 1.0 {
                    2.0 * (1.0 - a).powi(3)
                } else {
                    0.0
                }
            }
            Kernel::QuadraticSpectral => qs_shape(6.0 * PI * a / 5.0),
            Kernel::Daniell => sinc(PI * a),
        }
    }

    /// `k''(x)` in closed form. For the Bartlett kernel this is the
    /// almost-everywhere value 0; its fixed-b limit does not use it.
    pub fn second_derivative(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Kernel::Bartlett => 0.0,
            Kernel::Parzen => {
                if a <= 0.5 {
                    -12.0 + 36.0 * a
                } else if a <= 1.0 {
                    12.0 * (1.0 - a)
                } else {
                    0.0
                }
            }
            Kernel::QuadraticSpectral => {
                let c = 6.0 * PI / 5.0;
                c * c * qs_shape_d2(c * a)
            }
            Kernel::Daniell => PI * PI * sinc_d2(PI * a),
        }
    }

    /// Left derivative at `x = 1`, the boundary term for Type 2 kernels.
    pub fn left_derivative_at_one(self) -> f64 {
        match self {
            Kernel::Bartlett => -1.0,
            // 2(1-x)^3 has derivative -6(1-x)^2, which vanishes at 1.
            Kernel::Parzen => 0.0,
            Kernel::QuadraticSpectral => {
                let c = 6.0 * PI / 5.0;
                c * qs_shape_d1(c)
            }
            Kernel::Daniell => PI * sinc_d1(PI),
        }
    }

    /// Characteristic exponent `q` used by the plug-in bandwidth.
    pub fn characteristic_exponent(self) -> u32 {
        match self {
            Kernel::Bartlett => 1,
            _ => 2,
        }
    }

    /// `k_q = lim_{x→0} (1 - k(x)) / |x|^q`.
    pub fn characteristic_constant(self) -> f64 {
        match self {
            Kernel::Bartlett => 1.0,
            Kernel::Parzen => 6.0,
            Kernel::QuadraticSpectral => 18.0 * PI * PI / 125.0,
            Kernel::Daniell => PI * PI / 6.0,
        }
    }

    /// `∫ k(x)² dx` over the real line.
    pub fn squared_integral(self) -> f64 {
        match self {
            Kernel::Bartlett => 2.0 / 3.0,
            Kernel::Parzen => 151.0 / 280.0,
            Kernel::QuadraticSpectral | Kernel::Daniell => 1.0,
        }
    }

    /// Constant `c` in the plug-in rule `M = c (α T)^{1/(2q+1)}`.
    pub fn plug_in_constant(self) -> f64 {
        let q = self.characteristic_exponent() as f64;
        let kq = self.characteristic_constant();
        (q * kq * kq / self.squared_integral()).powf(1.0 / (2.0 * q + 1.0))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bartlett" | "bt" => Ok(Kernel::Bartlett),
            "parzen" | "pr" => Ok(Kernel::Parzen),
            "qs" | "quadratic-spectral" | "quadraticspectral" => Ok(Kernel::QuadraticSpectral),
            "daniell" | "dn" => Ok(Kernel::Daniell),
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

// Below this argument the closed forms lose digits to cancellation and the
// Taylor series are used instead.
const SERIES_CUTOFF: f64 = 0.5;

/// `sin z / z`.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn sinc_d1(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        // Σ_{m≥1} (-1)^m 2m z^{2m-1} / (2m+1)!
        series(z, |m| 2.0 * m as f64, 1)
    } else {
        z.cos() / z - z.sin() / (z * z)
    }
}

fn sinc_d2(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        // Σ_{m≥1} (-1)^m 2m(2m-1) z^{2m-2} / (2m+1)!
        series(z, |m| (2 * m * (2 * m - 1)) as f64, 2)
    } else {
        let (s, c) = z.sin_cos();
        -s / z - 2.0 * c / (z * z) + 2.0 * s / (z * z * z)
    }
}

/// Evaluates `Σ_{m≥1} (-1)^m coef(m) z^{2m-drop} / (2m+1)!` for small `z`.
fn series(z: f64, coef: impl Fn(u32) -> f64, drop: i32) -> f64 {
    let mut fact = 1.0; // (2m+1)!
    let mut total = 0.0;
    for m in 1..12u32 {
        fact *= (2 * m) as f64 * (2 * m + 1) as f64;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * coef(m) * z.powi(2 * m as i32 - drop) / fact;
    }
    total
}

/// `3 (sin z - z cos z) / z³`, the quadratic spectral kernel in `z = 6πx/5`.
fn qs_shape(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        qs_series(z, 0)
    } else {
        3.0 * (z.sin() - z * z.cos()) / (z * z * z)
    }
}

fn qs_shape_d1(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        qs_series(z, 1)
    } else {
        let g = z.sin() - z * z.cos();
        let g1 = z * z.sin();
        3.0 * (g1 / z.powi(3) - 3.0 * g / z.powi(4))
    }
}

fn qs_shape_d2(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        qs_series(z, 2)
    } else {
        let (s, c) = z.sin_cos();
        let g = s - z * c;
        let g1 = z * s;
        let g2 = s + z * c;
        3.0 * (g2 / z.powi(3) - 6.0 * g1 / z.powi(4) + 12.0 * g / z.powi(5))
    }
}

/// `d^order/dz^order` of `Σ_{m≥0} (-1)^m 6(m+1) z^{2m} / (2m+3)!`.
fn qs_series(z: f64, order: u32) -> f64 {
    let mut fact = 6.0; // (2m+3)! at m = 0
    let mut total = 0.0;
    for m in 0..12u32 {
        if m > 0 {
            fact *= (2 * m + 2) as f64 * (2 * m + 3) as f64;
        }
        let power = 2 * m;
        if power < order {
            continue;
        }
        let falling: f64 = (0..order).map(|k| (power - k) as f64).product();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * 6.0 * (m + 1) as f64 * falling * z.powi((power - order) as i32) / fact;
    }
    total
}
