//! CSV datasets: one time column and one column per series.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TrendPair, TrendSeries};

/// Cells that count as missing besides the empty string.
pub const MISSING_MARKERS: [&str; 3] = ["NA", "NaN", "."];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Name of the time column; the first column when `None`.
    pub time_column: Option<String>,
    /// Source name recorded in the dataset; the file stem when `None`.
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub source: String,
    pub time_label: String,
    pub time: Vec<f64>,
    /// Complete series in column order.
    pub series: Vec<TrendSeries>,
    /// Labels of series dropped for missing cells.
    pub dropped: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.time[0]
    }

    /// Spacing of the time column, taken from its first two entries.
    pub fn step(&self) -> f64 {
        if self.time.len() > 1 {
            self.time[1] - self.time[0]
        } else {
            1.0
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|s| s.label())
    }

    pub fn get(&self, label: &str) -> Result<&TrendSeries> {
        self.series
            .iter()
            .find(|s| s.label() == label)
            .ok_or_else(|| Error::MissingSeries(label.to_string()))
    }

    /// A pair from a `"numerator/denominator"` label.
    pub fn pair(&self, spec: &str) -> Result<TrendPair> {
        let (num, den) = split_pair(spec)?;
        TrendPair::new(self.get(num)?.clone(), self.get(den)?.clone())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.time_label.clone()];
        header.extend(self.series.iter().map(|s| s.label().to_string()));
        wtr.write_record(&header)?;
        for (t, time) in self.time.iter().enumerate() {
            let mut row = vec![time.to_string()];
            row.extend(self.series.iter().map(|s| s.values()[t].to_string()));
            wtr.write_record(&row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

/// Splits `"a/b"` into its two labels.
pub fn split_pair(spec: &str) -> Result<(&str, &str)> {
    match spec.split_once('/') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim(), b.trim())),
        _ => Err(Error::invalid(format!(
            "pair must be written `numerator/denominator`, got `{spec}`"
        ))),
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || MISSING_MARKERS.iter().any(|m| cell.eq_ignore_ascii_case(m))
}

/// Reads a dataset. Series with any missing cell are dropped with a warning
/// and listed in [`Dataset::dropped`].
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = opts.source.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    parse_csv(&text, &source, opts)
}

/// As [`ingest_csv`], from CSV text.
pub fn parse_csv(text: &str, source: &str, opts: &IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::invalid("dataset needs a time column and at least one series"));
    }
    let time_idx = match &opts.time_column {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("time column `{name}` not found")))?,
        None => 0,
    };
    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(Error::invalid("empty column label"));
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::invalid(format!("duplicate column label `{h}`")));
        }
    }

    let ncol = header.len();
    let mut time = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ncol];
    let mut missing = vec![false; ncol];
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row_no + 2;
        for (c, cell) in rec.iter().enumerate() {
            if is_missing(cell) {
                if c == time_idx {
                    return Err(Error::invalid(format!("line {line}: missing time value")));
                }
                missing[c] = true;
                cols[c].push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::invalid(format!("line {line}, column `{}`: `{cell}` is not a number", header[c]))
            })?;
            if c == time_idx {
                time.push(v);
            } else {
                cols[c].push(v);
            }
        }
    }
    if time.is_empty() {
        return Err(Error::invalid("dataset has no rows"));
    }
    if time.windows(3).any(|w| ((w[2] - w[1]) - (w[1] - w[0])).abs() > 1e-9 * w[1].abs().max(1.0)) {
        log::warn!("time column `{}` is not evenly spaced", header[time_idx]);
    }

    let mut series = Vec::new();
    let mut dropped = Vec::new();
    for (c, values) in cols.into_iter().enumerate() {
        if c == time_idx {
            continue;
        }
        if missing[c] {
            log::warn!("dropping series `{}`: it has missing values", header[c]);
            dropped.push(header[c].clone());
            continue;
        }
        series.push(TrendSeries::new(header[c].clone(), values)?);
    }
    Ok(Dataset {
        source: source.to_string(),
        time_label: header[time_idx].clone(),
        time,
        series,
        dropped,
    })
}
