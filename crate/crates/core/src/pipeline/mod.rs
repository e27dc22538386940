//! Data ingestion and report generation.

mod dataset;
mod report;

pub use dataset::{ingest_csv, parse_csv, split_pair, Dataset, IngestOptions, MISSING_MARKERS};
pub use report::{
    run_report, run_report_with, CompareMode, CompareRow, RatioRow, Report, ReportSpec, SlopeRow,
    Tuning, G_DISPLAY_SCALE,
};
