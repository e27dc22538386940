//! Long run variance of AR(1) noise under each kernel, with the data
//! dependent bandwidth and a fixed fraction of the sample.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trendratio::{lrv, BandwidthRule, Kernel};

fn main() -> trendratio::Result<()> {
    let (len, phi) = (200, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut prev = 0.0;
    let x: Vec<f64> = (0..len)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            prev = phi * prev + e;
            prev
        })
        .collect();
    let mean = x.iter().sum::<f64>() / len as f64;
    let u = DMatrix::from_iterator(len, 1, x.iter().map(|v| v - mean));

    println!("true long run variance {:.3}", 1.0 / (1.0 - phi).powi(2));
    for kernel in Kernel::ALL {
        for rule in [BandwidthRule::AndrewsAr1, BandwidthRule::FixedFraction(0.25)] {
            let bw = rule.resolve(&u, kernel)?;
            let est = lrv(&u, kernel, bw.lag)?;
            println!("{kernel:>8} {rule:>5}: M = {:6.2}, b = {:.3}, omega = {:.3}", est.bandwidth, est.b_ratio, est.omega[(0, 0)]);
        }
    }
    Ok(())
}
