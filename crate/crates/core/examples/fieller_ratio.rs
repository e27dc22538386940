//! Fieller confidence sets for a trend ratio as the denominator trend fades.
//! The interval widens and becomes unbounded once the denominator trend is
//! no longer significant.

use trendratio::montecarlo::{simulate_system, DgpSpec, NoiseSpec};
use trendratio::{BandwidthRule, Inference, Kernel};

fn main() -> trendratio::Result<()> {
    let inf = Inference::new(Kernel::Daniell, BandwidthRule::AndrewsAr1, 0.05)?;
    for beta2 in [0.1, 0.02, 0.005, 0.001] {
        let dgp = DgpSpec::from_ratios(100, NoiseSpec::iid(), [beta2, beta2], [1.5, 1.5]);
        let pair = simulate_system(&dgp, 21)?.pairs()[0].clone();
        let fs = inf.fieller_ci(&pair)?;
        println!(
            "β₂ = {beta2:<6} θ̂ = {:>8.3}  denominator t = {:>6.2}  set = {:?}",
            fs.theta_hat, fs.denominator_t, fs.set
        );
    }
    Ok(())
}
