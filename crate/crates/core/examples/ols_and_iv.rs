//! Trend slopes by OLS and their ratio by the IV estimator.

use trendratio::montecarlo::{simulate_system, DgpSpec, NoiseSpec};
use trendratio::{iv_system, ols_trend};

fn main() -> trendratio::Result<()> {
    let dgp = DgpSpec::from_ratios(100, NoiseSpec::serial(), [0.2, 0.2], [0.8, 1.2]);
    let system = simulate_system(&dgp, 11)?;
    let fit = iv_system(&system);
    for (i, pair) in system.pairs().iter().enumerate() {
        let num = ols_trend(&pair.numerator).slope;
        let den = ols_trend(&pair.denominator).slope;
        println!(
            "pair {i}: slopes {num:.4} / {den:.4} = {:.4}, IV ratio {:.4}",
            num / den,
            fit.theta_hat[i]
        );
    }
    Ok(())
}
