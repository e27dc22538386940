//! Null rejection frequencies at T = 100 with serially correlated noise.

use trendratio::montecarlo::{rejection_table, ExperimentSpec, NoiseSpec};

fn main() -> trendratio::Result<()> {
    let mut spec = ExperimentSpec::size_grid(NoiseSpec::serial(), &[100], 2_000, 1);
    spec.cells.retain(|c| [10.0, 0.05, 0.005].contains(&c.beta2[0]));
    let table = rejection_table(&spec)?;
    print!("{}", table.to_wide_csv());
    Ok(())
}
