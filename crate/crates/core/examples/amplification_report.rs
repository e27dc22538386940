//! Slope, ratio and comparison tables for two synthetic sources with a
//! surface series and an upper level series each.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trendratio::pipeline::{parse_csv, run_report, CompareMode, IngestOptions, ReportSpec};

fn main() -> trendratio::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.12).unwrap();
    let trends = [("A:SFC", 0.015), ("A:850", 0.018), ("B:SFC", 0.014), ("B:850", 0.011)];
    let mut text = String::from("year");
    for (name, _) in trends {
        text += &format!(",{name}");
    }
    text.push('\n');
    for (t, year) in (1958..=2024).enumerate() {
        text += &year.to_string();
        for (_, slope) in trends {
            text += &format!(",{:.4}", slope * t as f64 + noise.sample(&mut rng));
        }
        text.push('\n');
    }
    let dataset = parse_csv(&text, "synthetic", &IngestOptions::default())?;

    let spec = ReportSpec {
        scale_per: 10.0,
        slopes: trends.iter().map(|(n, _)| n.to_string()).collect(),
        ratios: vec!["A:850/A:SFC".into(), "B:850/B:SFC".into()],
        compare: CompareMode::ByLevel,
        ..ReportSpec::default()
    };
    let report = run_report(&dataset, &spec)?;
    print!("{}", report.slopes_csv()?);
    print!("{}", report.ratios_csv()?);
    print!("{}", report.compare_csv()?);
    Ok(())
}
