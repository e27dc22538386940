//! Power of both tests as the second ratio moves away from the first, for
//! small trend slopes where t_IV loses power far from the null.

use trendratio::montecarlo::{power_curve, ExperimentSpec, NoiseSpec};
use trendratio::BandwidthRule;

fn main() -> trendratio::Result<()> {
    let mut spec = ExperimentSpec::power_grid(NoiseSpec::serial(), 2_000, 1);
    spec.power.retain(|blk| blk.beta2[0] == 0.025);
    spec.bandwidths = vec![BandwidthRule::AndrewsAr1, BandwidthRule::FixedFraction(0.5)];
    let table = power_curve(&spec)?;
    print!("{}", table.to_wide_csv());
    Ok(())
}
