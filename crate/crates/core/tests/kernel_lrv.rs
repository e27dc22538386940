mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use trendratio::bandwidth::andrews_bandwidth;
use trendratio::lrv::autocovariance;
use trendratio::{lrv, Kernel};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn squared_integral_by_quadrature(k: Kernel) -> f64 {
    let f = |x: f64| k.weight(x).powi(2);
    match k {
        Kernel::Bartlett => 2.0 * simpson(f, 0.0, 1.0, 2_000),
        Kernel::Parzen => 2.0 * (simpson(f, 0.0, 0.5, 2_000) + simpson(f, 0.5, 1.0, 2_000)),
        Kernel::Daniell => {
            // Tail of sin²(πx)/(πx)² beyond an integer L averages to 1/(2π²L).
            let l = 2_000.0;
            2.0 * (simpson(f, 0.0, l, 400_000) + 1.0 / (2.0 * PI * PI * l))
        }
        Kernel::QuadraticSpectral => 2.0 * simpson(f, 0.0, 400.0, 400_000),
    }
}

fn characteristic_constant_by_limit(k: Kernel) -> f64 {
    let q = k.characteristic_exponent() as i32;
    let f = |h: f64| (1.0 - k.weight(h)) / h.powi(q);
    let h = 1e-2;
    // f(h) = k_q + a h + c h² + ...; two Richardson steps remove both terms.
    let g1 = 2.0 * f(h / 2.0) - f(h);
    let g2 = 2.0 * f(h / 4.0) - f(h / 2.0);
    (4.0 * g2 - g1) / 3.0
}

#[test]
fn kernel_constants_match_quadrature() {
    for k in Kernel::ALL {
        let sq = squared_integral_by_quadrature(k);
        assert!((sq - k.squared_integral()).abs() < 1e-6, "{k}: ∫k² {sq} vs {}", k.squared_integral());
        let kq = characteristic_constant_by_limit(k);
        assert!(
            (kq - k.characteristic_constant()).abs() < 1e-6 * kq,
            "{k}: k_q {kq} vs {}",
            k.characteristic_constant()
        );
        let q = k.characteristic_exponent() as f64;
        let c = (q * kq * kq / sq).powf(1.0 / (2.0 * q + 1.0));
        assert!((c - k.plug_in_constant()).abs() < 1e-6, "{k}: c {c}");
    }
    // Familiar published values of the plug-in constants.
    assert!((Kernel::Bartlett.plug_in_constant() - 1.1447).abs() < 1e-4);
    assert!((Kernel::Parzen.plug_in_constant() - 2.6614).abs() < 1e-4);
    assert!((Kernel::QuadraticSpectral.plug_in_constant() - 1.3221).abs() < 1e-4);
}

#[test]
fn daniell_zero_at_one_matches_series() {
    // sin(πx)/(πx) around x = 1: -(x - 1) + (x - 1)² - ... with the first
    // term dominating.
    assert!(Kernel::Daniell.weight(1.0).abs() < 1e-16);
    for k in Kernel::ALL {
        assert_eq!(k.weight(0.0), 1.0);
    }
    assert_eq!(Kernel::Bartlett.weight(0.25), 0.75);
}

#[test]
fn autocovariance_matches_naive_loop() {
    let mut r = rng(11);
    let x = normal_matrix(&mut r, 20, 3);
    let j = 4;
    let g = autocovariance(&x, j).unwrap();
    for a in 0..3 {
        for c in 0..3 {
            let mut acc = 0.0;
            for t in j..20 {
                acc += x[(t, a)] * x[(t - j, c)];
            }
            assert!((g[(a, c)] - acc / 20.0).abs() < 1e-15);
        }
    }
    let two = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
    assert_eq!(autocovariance(&two, 1).unwrap()[(0, 0)], -0.5);
}

#[test]
fn spec_style_daniell_instance() {
    let mut r = rng(12);
    let x = normal_matrix(&mut r, 30, 4);
    let est = lrv(&x, Kernel::Daniell, 7.5).unwrap();
    let oracle = double_sum_lrv(&x, Kernel::Daniell, 7.5);
    assert!(max_abs(&(&est.omega - &oracle)) <= 1e-12 * max_abs(&oracle));
}

#[test]
fn alternating_series_bartlett_two() {
    let len = 31;
    let vals: Vec<f64> = (0..len).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let x = DMatrix::from_column_slice(len, 1, &vals);
    let est = lrv(&x, Kernel::Bartlett, 2.0).unwrap();
    let oracle = double_sum_lrv(&x, Kernel::Bartlett, 2.0);
    assert!((est.omega[(0, 0)] - oracle[(0, 0)]).abs() < 1e-14);
    assert!((est.omega[(0, 0)] - 1.0 / len as f64).abs() < 1e-14);
}

fn a91_oracle(x: &DMatrix<f64>, kernel: Kernel) -> f64 {
    let t = x.nrows() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for col in x.column_iter() {
        let v: Vec<f64> = col.iter().copied().collect();
        let sxy: f64 = v.windows(2).map(|w| w[0] * w[1]).sum();
        let sxx: f64 = v[..v.len() - 1].iter().map(|a| a * a).sum();
        let rho = (sxy / sxx).clamp(-0.97, 0.97);
        let s2 = v.windows(2).map(|w| (w[1] - rho * w[0]).powi(2)).sum::<f64>() / (t - 1.0);
        if kernel == Kernel::Bartlett {
            num += 4.0 * rho * rho * s2 * s2 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2));
        } else {
            num += 4.0 * rho * rho * s2 * s2 / (1.0 - rho).powi(8);
        }
        den += s2 * s2 / (1.0 - rho).powi(4);
    }
    let p = if kernel == Kernel::Bartlett { 1.0 / 3.0 } else { 0.2 };
    (kernel.plug_in_constant() * (num / den * t).powf(p)).clamp(1.0, t)
}

#[test]
fn plug_in_bandwidth() {
    let mut r = rng(13);
    let white = normal_matrix(&mut r, 200, 2);
    let m = andrews_bandwidth(&white, Kernel::Daniell).unwrap();
    assert!(m / 200.0 < 0.1, "white noise b = {}", m / 200.0);
    for k in Kernel::ALL {
        let m = andrews_bandwidth(&white, k).unwrap();
        assert!((m - a91_oracle(&white, k)).abs() < 1e-10 * m, "{k}");
    }

    let len = 2_000;
    let cols: Vec<f64> = (0..3).flat_map(|_| ar1(&mut r, len, 0.3)).collect();
    let lo = DMatrix::from_column_slice(len, 3, &cols);
    let cols: Vec<f64> = (0..3).flat_map(|_| ar1(&mut r, len, 0.9)).collect();
    let hi = DMatrix::from_column_slice(len, 3, &cols);
    let (m_lo, m_hi) = (
        andrews_bandwidth(&lo, Kernel::Daniell).unwrap(),
        andrews_bandwidth(&hi, Kernel::Daniell).unwrap(),
    );
    assert!(m_hi > 2.0 * m_lo, "{m_hi} vs {m_lo}");
    assert!(m_hi <= len as f64 && m_lo >= 1.0);
}

fn kernel_at(i: usize) -> Kernel {
    Kernel::ALL[i % 4]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lrv_equals_double_sum(seed in any::<u64>(), len in 2usize..=50, m in 1usize..=4,
                             ki in 0usize..4, bw in 0.2f64..60.0) {
        let x = normal_matrix(&mut rng(seed), len, m);
        let k = kernel_at(ki);
        let est = lrv(&x, k, bw).unwrap();
        let oracle = double_sum_lrv(&x, k, bw);
        let scale = max_abs(&oracle).max(max_abs(&autocovariance(&x, 0).unwrap()));
        prop_assert!(max_abs(&(&est.omega - &oracle)) <= 1e-12 * scale);
        prop_assert_eq!(est.b_ratio, bw / len as f64);
    }

    #[test]
    fn lrv_is_symmetric_psd(seed in any::<u64>(), len in 4usize..=80, m in 1usize..=5,
                            ki in 0usize..4, b in 0.01f64..1.0, phi in -0.9f64..0.95) {
        let mut r = rng(seed);
        let cols: Vec<f64> = (0..m).flat_map(|_| ar1(&mut r, len, phi)).collect();
        let x = DMatrix::from_column_slice(len, m, &cols);
        let est = lrv(&x, kernel_at(ki), b * len as f64).unwrap();
        let om = &est.omega;
        prop_assert!(max_abs(&(om - om.transpose())) <= 1e-12 * max_abs(om));
        let min_eig = om.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * om.trace(), "min eigenvalue {}", min_eig);
    }

    #[test]
    fn lrv_scales_quadratically(seed in any::<u64>(), len in 2usize..=40, m in 1usize..=3,
                                ki in 0usize..4, c in 0.01f64..100.0) {
        let x = normal_matrix(&mut rng(seed), len, m);
        let k = kernel_at(ki);
        let base = lrv(&x, k, 3.0).unwrap().omega;
        let scaled = lrv(&(&x * c), k, 3.0).unwrap().omega;
        prop_assert!(max_abs(&(scaled - base * (c * c))) <= 1e-12 * c * c * max_abs(&autocovariance(&x, 0).unwrap()));
    }

    #[test]
    fn lrv_permutes_with_columns(seed in any::<u64>(), len in 2usize..=40, ki in 0usize..4) {
        let x = normal_matrix(&mut rng(seed), len, 4);
        let perm = [2usize, 0, 3, 1];
        let px = DMatrix::from_fn(len, 4, |t, c| x[(t, perm[c])]);
        let k = kernel_at(ki);
        let om = lrv(&x, k, 5.0).unwrap().omega;
        let pom = lrv(&px, k, 5.0).unwrap().omega;
        for a in 0..4 {
            for c in 0..4 {
                prop_assert_eq!(pom[(a, c)], om[(perm[a], perm[c])]);
            }
        }
    }
}
