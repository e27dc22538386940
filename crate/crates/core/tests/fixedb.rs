mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use trendratio::fixedb::{
    cv_daniell_0025, pb_functional, simulate_null_cv, simulate_null_draws, CvResolver, CvSource, PathGrid,
    PbOperator, SimConfig,
};
use trendratio::kernel::FixedbClass;
use trendratio::{lrv, Kernel};

/// Demeaned residuals and their scaled partial sums `S_t/√T`.
fn residuals_and_sums(seed: u64, len: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut x = normal_matrix(&mut rng(seed), len, m);
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let mut q = DMatrix::zeros(len, m);
    for c in 0..m {
        let mut acc = 0.0;
        for t in 0..len {
            acc += x[(t, c)];
            q[(t, c)] = acc / (len as f64).sqrt();
        }
    }
    (x, q)
}

/// Grid double sum of `P_b` straight from the branch formulas.
fn pb_brute(q: &DMatrix<f64>, kernel: Kernel, b: f64) -> DMatrix<f64> {
    let (n, m) = q.shape();
    let nf = n as f64;
    let class = kernel.fixedb_class();
    let mut out = DMatrix::zeros(m, m);
    if class != FixedbClass::Bartlett {
        for i in 0..n {
            for j in 0..n {
                let d = (i as f64 - j as f64).abs() / nf;
                if class == FixedbClass::Type2 && d >= b {
                    continue;
                }
                let w = -kernel.second_derivative(d / b) / (b * b) / (nf * nf);
                for a in 0..m {
                    for c in 0..m {
                        out[(a, c)] += w * q[(i, a)] * q[(j, c)];
                    }
                }
            }
        }
    } else {
        out += q.transpose() * q * (2.0 / b / nf);
    }
    let coef = match class {
        FixedbClass::Type1 => 0.0,
        FixedbClass::Type2 => kernel.left_derivative_at_one() / b,
        FixedbClass::Bartlett => -1.0 / b,
    };
    let h = (b * nf).round() as usize;
    if coef != 0.0 {
        for i in 0..n.saturating_sub(h) {
            for a in 0..m {
                for c in 0..m {
                    out[(a, c)] += coef * (q[(i + h, a)] * q[(i, c)] + q[(i, a)] * q[(i + h, c)]) / nf;
                }
            }
        }
    }
    out
}

#[test]
fn bartlett_pb_equals_lrv_of_residuals() {
    for (seed, len, m, lag) in [(1, 120, 1, 30), (2, 200, 3, 50), (3, 150, 2, 150), (4, 101, 4, 7)] {
        let (x, q) = residuals_and_sums(seed, len, m);
        let b = lag as f64 / len as f64;
        let pb = PbOperator::new(Kernel::Bartlett, b, len).unwrap().apply(&q);
        let om = lrv(&x, Kernel::Bartlett, lag as f64).unwrap().omega;
        assert!(max_abs(&(&pb - &om)) < 1e-12 * max_abs(&om), "T={len} M={lag}");
    }
}

#[test]
fn smooth_kernel_pb_approximates_lrv() {
    for kernel in [Kernel::Parzen, Kernel::QuadraticSpectral, Kernel::Daniell] {
        for b in [0.1, 0.3, 1.0] {
            let (x, q) = residuals_and_sums(7, 1_000, 2);
            let pb = PbOperator::new(kernel, b, 1_000).unwrap().apply(&q);
            let om = lrv(&x, kernel, b * 1_000.0).unwrap().omega;
            let err = max_abs(&(&pb - &om)) / max_abs(&om);
            assert!(err < 2e-3, "{kernel} b={b}: relative gap {err}");
        }
    }
}

#[test]
fn fft_matches_brute_force() {
    let q = normal_matrix(&mut rng(21), 300, 3);
    for kernel in Kernel::ALL {
        for b in [0.05, 0.37, 0.5, 1.0] {
            let fast = PbOperator::new(kernel, b, 300).unwrap().apply(&q);
            let slow = pb_brute(&q, kernel, b);
            let slow = (&slow + slow.transpose()) * 0.5;
            assert!(max_abs(&(&fast - &slow)) < 1e-10 * max_abs(&slow), "{kernel} b={b}");
        }
    }
}

#[test]
fn parzen_at_full_bandwidth_is_type1_form() {
    // At b = 1 the support restriction |r - s| < 1 never binds and the
    // boundary term vanishes, so the Type 1 double integral applies as is.
    let n = 400;
    let q = normal_matrix(&mut rng(22), n, 2);
    let pb = PbOperator::new(Kernel::Parzen, 1.0, n).unwrap().apply(&q);
    let mut type1 = DMatrix::zeros(2, 2);
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64).abs() / n as f64;
            let w = -Kernel::Parzen.second_derivative(d) / (n * n) as f64;
            type1 += q.row(i).transpose() * q.row(j) * w;
        }
    }
    assert!(max_abs(&(&pb - &type1)) < 1e-10 * max_abs(&type1));
    assert_eq!(Kernel::Parzen.left_derivative_at_one(), 0.0);
}

#[test]
fn deterministic_paths() {
    let zero = PathGrid::from_fn(200, 2, |_, _| 0.0).unwrap();
    let line = PathGrid::from_fn(4_000, 1, |r, _| r).unwrap();
    for k in Kernel::ALL {
        assert_eq!(pb_functional(&zero, k, 0.4).unwrap(), DMatrix::zeros(2, 2));
    }
    let one = pb_functional(&line, Kernel::Bartlett, 1.0).unwrap()[(0, 0)];
    assert!((one - 2.0 / 3.0).abs() < 1e-3);
    // 4/3 - 2 ∫₀^½ 2 r (r + ½) dr.
    let half = pb_functional(&line, Kernel::Bartlett, 0.5).unwrap()[(0, 0)];
    assert!((half - 11.0 / 12.0).abs() < 1e-3, "{half}");
}

#[test]
fn polynomial_spot_values() {
    let horner = |b: f64| {
        1.9659 + 4.0603 * b + 11.6626 * b.powi(2) + 34.8269 * b.powi(3) - 13.9506 * b.powi(4)
            + 3.2669 * b.powi(5)
    };
    for b in [1e-6, 0.05, 0.25, 0.5, 1.0] {
        assert!((cv_daniell_0025(b).unwrap() - horner(b)).abs() < 1e-12);
    }
    assert!((cv_daniell_0025(0.25).unwrap() - 4.2028).abs() < 5e-5);
    assert!((cv_daniell_0025(1.0).unwrap() - 41.8320).abs() < 5e-5);
    assert!(cv_daniell_0025(0.0).is_err() && cv_daniell_0025(1.01).is_err());
}

fn cfg(steps: usize, reps: usize, seed: u64) -> SimConfig {
    SimConfig {
        step_count: steps,
        replications: reps,
        seed,
    }
}

#[test]
fn z_star_is_standard_normal_and_independent_of_pb() {
    let reps = 20_000;
    let draws = simulate_null_draws(Kernel::Daniell, 0.25, 1, &cfg(500, reps, 99)).unwrap();
    let n = reps as f64;
    let z: Vec<f64> = draws.iter().map(|d| d.z[0]).collect();
    let p: Vec<f64> = draws.iter().map(|d| d.pb[(0, 0)]).collect();
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "variance {var}");

    let corr = |a: &[f64], b: &[f64]| {
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        sab / (saa * sbb).sqrt()
    };
    // Two-sided 1% test of zero correlation.
    let crit = 2.5758 / n.sqrt();
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    assert!(corr(&z, &p).abs() < crit, "corr(Z, P) = {}", corr(&z, &p));
    assert!(corr(&z2, &p).abs() < crit, "corr(Z², P) = {}", corr(&z2, &p));
}

#[test]
fn critical_values_grow_with_b() {
    for kernel in [Kernel::Bartlett, Kernel::Daniell] {
        let cvs: Vec<f64> = [0.05, 0.25, 0.5, 1.0]
            .iter()
            .map(|&b| simulate_null_cv(kernel, b, 0.05, 1, &cfg(500, 10_000, 3)).unwrap().value)
            .collect();
        assert!(cvs.windows(2).all(|w| w[1] >= w[0]), "{kernel}: {cvs:?}");
    }
}

#[test]
fn small_b_approaches_normal_quantile() {
    let cv = simulate_null_cv(Kernel::Daniell, 0.005, 0.05, 1, &cfg(2_000, 20_000, 5)).unwrap();
    assert!((cv.value - 1.96).abs() < 0.07, "{}", cv.value);
}

#[test]
fn simulation_tracks_polynomial_at_quarter() {
    let sim = simulate_null_cv(Kernel::Daniell, 0.25, 0.05, 1, &cfg(1_000, 20_000, 8)).unwrap();
    let poly = cv_daniell_0025(0.25).unwrap();
    assert!((sim.value / poly - 1.0).abs() < 0.03, "{} vs {poly}", sim.value);
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_null_draws(Kernel::Parzen, 0.3, 2, &cfg(150, 300, 17)).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.z, y.z);
        assert_eq!(x.statistic, y.statistic);
    }
}

#[test]
fn resolver_prefers_polynomial_then_caches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cv.csv");
    let sim = cfg(200, 2_000, 1);
    let res = CvResolver::with_cache_file(sim, &path).unwrap();
    let poly = res.resolve(Kernel::Daniell, 0.25, 0.05, 1).unwrap();
    assert_eq!(poly.source, CvSource::Polynomial);
    let first = res.resolve(Kernel::Bartlett, 0.25, 0.05, 1).unwrap();
    assert!(matches!(first.source, CvSource::Simulated { .. }));
    assert_eq!(res.cached(), 1);

    let reloaded = CvResolver::with_cache_file(sim, &path).unwrap();
    assert_eq!(reloaded.cached(), 1);
    assert_eq!(reloaded.resolve(Kernel::Bartlett, 0.25, 0.05, 1).unwrap().value, first.value);
    assert_eq!(res.resolve(Kernel::Daniell, 0.25, 1.0, 1).unwrap().value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pb_is_symmetric_and_psd_for_bridges(seed in any::<u64>(), ki in 0usize..4, b in 0.02f64..1.0) {
        let kernel = Kernel::ALL[ki];
        let (_, q) = residuals_and_sums(seed, 200, 3);
        let pb = PbOperator::new(kernel, b, 200).unwrap().apply(&q);
        prop_assert!(max_abs(&(&pb - pb.transpose())) == 0.0);
        let min_eig = pb.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-3 * pb.trace(), "{} {}", min_eig, pb.trace());
    }
}
