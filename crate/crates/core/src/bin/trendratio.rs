use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trendratio::fixedb::{CvResolver, SimConfig, StatForm};
use trendratio::montecarlo::{power_curve, rejection_table, ExperimentSpec, NoiseSpec, RejectionTable};
use trendratio::pipeline::{ingest_csv, run_report_with, CompareMode, IngestOptions, Report, ReportSpec};
use trendratio::{BandwidthRule, ConfidenceSet, Error, Kernel, Result};

#[derive(Parser)]
#[command(name = "trendratio", version, about = "Inference on ratios of linear trend slopes")]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trend slope estimates with fixed-b confidence intervals
    Trend {
        #[command(flatten)]
        data: DataArgs,
        /// Series to report (default: all)
        #[arg(long, value_delimiter = ',')]
        series: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Trend ratios with Fieller confidence sets
    Ratio {
        #[command(flatten)]
        data: DataArgs,
        /// Ratio as NUMERATOR/DENOMINATOR; repeatable
        #[arg(long = "pair", required = true)]
        pairs: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Pairwise equal-ratio tests (t_IV and t_prod)
    Compare {
        #[command(flatten)]
        data: DataArgs,
        /// Ratio as NUMERATOR/DENOMINATOR; at least two
        #[arg(long = "pair", required = true, num_args = 1)]
        pairs: Vec<String>,
        /// Only compare ratios with the same levels once `SOURCE:` prefixes are removed
        #[arg(long)]
        by_level: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Full report from a TOML spec
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo size and power experiments
    Simulate {
        #[command(subcommand)]
        which: SimulateKind,
    },
    /// Fixed-b critical value
    Cv {
        /// Bandwidth to sample size ratio
        #[arg(long)]
        b: f64,
        /// Number of restrictions
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = SimConfig::default().replications)]
        replications: usize,
        #[arg(long, default_value_t = SimConfig::default().step_count)]
        steps: usize,
        /// Simulate even when a closed form exists
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum SimulateKind {
    /// Null rejection frequencies
    Null(SimArgs),
    /// Power over a grid of second-pair ratios
    Power(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Experiment spec (TOML); overrides the built-in design
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Serial)]
    noise: NoiseArg,
    /// Sample sizes of the null design
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    len: Vec<usize>,
    /// Keep only cells with these denominator slopes
    #[arg(long, value_delimiter = ',')]
    beta2: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    replications: usize,
    /// Bandwidth rules to tabulate (default: a91,0.25,0.5,1)
    #[arg(long = "bandwidths", value_delimiter = ',')]
    bandwidths: Vec<BandwidthRule>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Iid,
    Serial,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV: a time column followed by one column per series
    #[arg(long)]
    data: PathBuf,
    /// Name of the time column (default: first column)
    #[arg(long)]
    time_column: Option<String>,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "daniell")]
    kernel: Kernel,
    /// `a91` or a fraction of the sample size in (0, 1]
    #[arg(long, default_value = "a91")]
    bandwidth: BandwidthRule,
    /// Two-sided size of the t tests
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Seed for simulated critical values and Monte Carlo draws
    #[arg(long, default_value_t = SimConfig::default().seed)]
    seed: u64,
    /// Directory for output files (default: print to stdout)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Multiply slopes by this factor for display (10 = per decade for annual data)
    #[arg(long, default_value_t = 1.0)]
    scale_per: f64,
    /// File caching simulated critical values
    #[arg(long)]
    cv_cache: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }

    fn json(self) -> bool {
        self != Format::Csv
    }
}

impl Common {
    fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            ..SimConfig::default()
        }
    }

    fn resolver(&self, sim: SimConfig) -> Result<Arc<CvResolver>> {
        Ok(Arc::new(match &self.cv_cache {
            Some(path) => CvResolver::with_cache_file(sim, path)?,
            None => CvResolver::new(sim),
        }))
    }

    fn report_spec(&self) -> ReportSpec {
        ReportSpec {
            kernel: self.kernel,
            bandwidth: self.bandwidth,
            level: self.level,
            scale_per: self.scale_per,
            simulation: self.sim_config(),
            ..ReportSpec::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Trend { data, series, common } => {
            let spec = ReportSpec {
                slopes: series,
                ..common.report_spec()
            };
            report(&data, spec, &common)
        }
        Command::Ratio { data, pairs, common } => {
            let spec = ReportSpec {
                ratios: pairs,
                ..common.report_spec()
            };
            report(&data, spec, &common)
        }
        Command::Compare {
            data,
            pairs,
            by_level,
            common,
        } => {
            if pairs.len() < 2 {
                return Err(Error::InvalidInput("compare needs at least two --pair ratios".into()));
            }
            let spec = ReportSpec {
                compare: if by_level { CompareMode::ByLevel } else { CompareMode::All },
                ratios: pairs,
                ..common.report_spec()
            };
            report(&data, spec, &common)
        }
        Command::Report { data, config, common } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let spec = ReportSpec::from_toml_str(&text)?;
            report(&data, spec, &common)
        }
        Command::Simulate { which } => simulate(which),
        Command::Cv {
            b,
            q,
            replications,
            steps,
            simulate,
            common,
        } => {
            let sim = SimConfig {
                step_count: steps,
                replications,
                seed: common.seed,
            };
            let cv = if simulate {
                trendratio::fixedb::simulate_null_cv(common.kernel, b, common.level, q, &sim)?
            } else {
                common.resolver(sim)?.resolve(common.kernel, b, common.level, q)?
            };
            if common.format.json() {
                println!("{}", serde_json::to_string_pretty(&cv)?);
            }
            if common.format.csv() {
                println!("kernel,b,level,q,form,cv");
                let form = match cv.form {
                    StatForm::AbsT => "abs_t",
                    StatForm::Wald => "wald",
                };
                println!("{},{},{},{},{form},{}", cv.kernel, cv.b, cv.level, cv.q, cv.value);
            }
            Ok(())
        }
    }
}

fn report(data: &DataArgs, spec: ReportSpec, common: &Common) -> Result<()> {
    let dataset = ingest_csv(
        &data.data,
        &IngestOptions {
            time_column: data.time_column.clone(),
            source: None,
        },
    )?;
    let inf = spec.inference_with(common.resolver(spec.simulation)?)?;
    let rep = run_report_with(&dataset, &spec, &inf)?;
    match &common.out_dir {
        Some(dir) => {
            for path in rep.write(dir, common.format.csv(), common.format.json())? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print_report(&rep, common.format)?,
    }
    Ok(())
}

fn fmt_set(set: &ConfidenceSet) -> String {
    match *set {
        ConfidenceSet::Interval { lower, upper } => format!("({lower:.3}, {upper:.3})"),
        ConfidenceSet::Rays { below, above } => format!("(-inf, {below:.3}] U [{above:.3}, inf)"),
        ConfidenceSet::WholeLine => "(-inf, inf)".into(),
        ConfidenceSet::Empty => "{}".into(),
    }
}

fn print_report(rep: &Report, format: Format) -> Result<()> {
    if format.json() {
        println!("{}", rep.audit_json()?);
    }
    if !format.csv() {
        return Ok(());
    }
    if !rep.slopes.is_empty() {
        println!("{:<16} {:>9} {:>22} {:>7}", "series", "slope", "CI", "b");
        for r in &rep.slopes {
            println!(
                "{:<16} {:>9.3} {:>22} {:>7.3}",
                r.series,
                r.estimate,
                fmt_set(&ConfidenceSet::Interval {
                    lower: r.lower,
                    upper: r.upper
                }),
                r.tuning.b
            );
        }
    }
    if !rep.ratios.is_empty() {
        println!("{:<24} {:>9} {:>30} {:>7}", "ratio", "theta", "Fieller set", "b");
        for r in &rep.ratios {
            println!("{:<24} {:>9.3} {:>30} {:>7.3}", r.ratio, r.theta_hat, fmt_set(&r.set), r.tuning.b);
        }
    }
    if !rep.comparisons.is_empty() {
        println!(
            "{:<24} {:<24} {:>8} {:>20} {:>8} {:>20}",
            "first", "second", "delta", "CI", "g*1e4", "CI"
        );
        for r in &rep.comparisons {
            let mark = |s: bool| if s { "*" } else { " " };
            println!(
                "{:<24} {:<24} {:>7.3}{} {:>20} {:>7.3}{} {:>20}",
                r.first,
                r.second,
                r.delta_theta,
                mark(r.delta_star),
                fmt_set(&ConfidenceSet::Interval {
                    lower: r.delta_lower,
                    upper: r.delta_upper
                }),
                r.g,
                mark(r.g_star),
                fmt_set(&ConfidenceSet::Interval {
                    lower: r.g_lower,
                    upper: r.g_upper
                }),
            );
        }
    }
    Ok(())
}

fn simulate(which: SimulateKind) -> Result<()> {
    let (args, power) = match which {
        SimulateKind::Null(a) => (a, false),
        SimulateKind::Power(a) => (a, true),
    };
    let c = &args.common;
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => {
            let noise = match args.noise {
                NoiseArg::Iid => NoiseSpec::iid(),
                NoiseArg::Serial => NoiseSpec::serial(),
            };
            let mut spec = if power {
                ExperimentSpec::power_grid(noise, args.replications, c.seed)
            } else {
                ExperimentSpec::size_grid(noise, &args.len, args.replications, c.seed)
            };
            spec.kernel = c.kernel;
            spec.level = c.level;
            if !args.bandwidths.is_empty() {
                spec.bandwidths = args.bandwidths.clone();
            }
            spec
        }
    };
    if !args.beta2.is_empty() {
        let keep = |b: &[f64; 2]| args.beta2.iter().any(|x| (x - b[0]).abs() < 1e-12);
        spec.cells.retain(|cell| keep(&cell.beta2));
        spec.power.retain(|blk| keep(&blk.beta2));
    }
    let table = if power { power_curve(&spec)? } else { rejection_table(&spec)? };
    emit_table(&table, c.out_dir.as_deref(), c.format, if power { "power" } else { "null" })
}

fn emit_table(table: &RejectionTable, dir: Option<&Path>, format: Format, stem: &str) -> Result<()> {
    let Some(dir) = dir else {
        if format.csv() {
            print!("{}", table.to_wide_csv());
        }
        if format.json() {
            println!("{}", serde_json::to_string_pretty(table)?);
        }
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files = Vec::new();
    if format.csv() {
        files.push((format!("{stem}.csv"), table.to_wide_csv()));
        files.push((format!("{stem}_long.csv"), table.to_long_csv()));
    }
    if format.json() {
        files.push((format!("{stem}.json"), serde_json::to_string_pretty(table)?));
    }
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
