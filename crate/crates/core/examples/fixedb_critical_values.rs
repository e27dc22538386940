//! Fixed-b critical values: the Daniell polynomial against simulation, and
//! simulated values for the other kernels.

use trendratio::fixedb::{cv_daniell_0025, simulate_null_cv, SimConfig};
use trendratio::Kernel;

fn main() -> trendratio::Result<()> {
    let cfg = SimConfig {
        step_count: 500,
        replications: 10_000,
        seed: 1,
    };
    println!("{:>5} {:>10} {:>8} {:>8} {:>8} {:>8}", "b", "polynomial", "daniell", "bartlett", "parzen", "qs");
    for b in [0.05, 0.1, 0.25, 0.5, 1.0] {
        let sim = |k| simulate_null_cv(k, b, 0.05, 1, &cfg).map(|cv| cv.value);
        println!(
            "{b:>5} {:>10.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            cv_daniell_0025(b)?,
            sim(Kernel::Daniell)?,
            sim(Kernel::Bartlett)?,
            sim(Kernel::Parzen)?,
            sim(Kernel::QuadraticSpectral)?
        );
    }
    Ok(())
}
