//! Critical value lookup with an on-disk cache of simulated values.
//!
//! The cache is a CSV file whose first line is [`CACHE_HEADER`], followed by
//! a header row `kernel,b,level,q,step_count,reps,seed,cv`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{cv_daniell_0025, simulate_null_cv, CriticalValue, CvSource, SimConfig, StatForm};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

pub const CACHE_HEADER: &str = "# trendratio fixed-b cv cache v1";

/// `b` is stored in units of 1e-4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CvKey {
    pub kernel: Kernel,
    pub b_e4: u32,
    pub level_bits: u64,
    pub q: usize,
    pub step_count: usize,
    pub replications: usize,
    pub seed: u64,
}

impl CvKey {
    pub fn new(kernel: Kernel, b: f64, level: f64, q: usize, cfg: &SimConfig) -> Self {
        Self {
            kernel,
            b_e4: round_b(b),
            level_bits: level.to_bits(),
            q,
            step_count: cfg.step_count,
            replications: cfg.replications,
            seed: cfg.seed,
        }
    }

    pub fn b(&self) -> f64 {
        self.b_e4 as f64 / 1e4
    }
}

fn round_b(b: f64) -> u32 {
    ((b * 1e4).round() as u32).max(1)
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    kernel: Kernel,
    b: f64,
    level: f64,
    q: usize,
    step_count: usize,
    reps: usize,
    seed: u64,
    cv: f64,
}

#[derive(Debug, Default, Clone)]
pub struct CvCache {
    entries: BTreeMap<CvKey, f64>,
}

impl CvCache {
    pub fn get(&self, key: &CvKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn insert(&mut self, key: CvKey, cv: f64) {
        self.entries.insert(key, cv);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Missing files yield an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut lines = text.splitn(2, '\n');
        let first = lines.next().unwrap_or_default().trim_end();
        if first != CACHE_HEADER {
            return Err(Error::invalid(format!(
                "{}: not a cv cache (expected first line `{CACHE_HEADER}`)",
                path.display()
            )));
        }
        let body = lines.next().unwrap_or_default();
        let mut cache = Self::default();
        for row in csv::Reader::from_reader(body.as_bytes()).deserialize() {
            let row: Row = row?;
            let cfg = SimConfig {
                step_count: row.step_count,
                replications: row.reps,
                seed: row.seed,
            };
            cache.insert(CvKey::new(row.kernel, row.b, row.level, row.q, &cfg), row.cv);
        }
        Ok(cache)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for (key, cv) in &self.entries {
            wtr.serialize(Row {
                kernel: key.kernel,
                b: key.b(),
                level: f64::from_bits(key.level_bits),
                q: key.q,
                step_count: key.step_count,
                reps: key.replications,
                seed: key.seed,
                cv: *cv,
            })?;
        }
        let body = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("csv.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        writeln!(f, "{CACHE_HEADER}").map_err(|e| Error::io(&tmp, e))?;
        if body.is_empty() {
            writeln!(f, "kernel,b,level,q,step_count,reps,seed,cv").map_err(|e| Error::io(&tmp, e))?;
        }
        f.write_all(&body).map_err(|e| Error::io(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Resolves critical values: the Daniell polynomial where it applies,
/// otherwise simulation with an in-memory and optional on-disk cache.
#[derive(Debug)]
pub struct CvResolver {
    sim: SimConfig,
    cache: Mutex<CvCache>,
    path: Option<PathBuf>,
}

impl Default for CvResolver {
    fn default() -> Self {
        Self::new(SimConfig::default())
    }
}

impl CvResolver {
    pub fn new(sim: SimConfig) -> Self {
        Self {
            sim,
            cache: Mutex::new(CvCache::default()),
            path: None,
        }
    }

    pub fn with_cache_file(sim: SimConfig, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let cache = CvCache::load(&path)?;
        Ok(Self {
            sim,
            cache: Mutex::new(cache),
            path: Some(path),
        })
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.sim
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Critical value for `q` restrictions at two-sided size `level` (for
    /// `q = 1`) or Wald upper-tail size (for `q > 1`).
    pub fn resolve(&self, kernel: Kernel, b: f64, level: f64, q: usize) -> Result<CriticalValue> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::invalid(format!("level must lie in (0, 1], got {level}")));
        }
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::invalid(format!("b must lie in (0, 1], got {b}")));
        }
        if q == 0 {
            return Err(Error::invalid("number of restrictions must be at least 1"));
        }
        let form = if q == 1 { StatForm::AbsT } else { StatForm::Wald };
        if level == 1.0 {
            return Ok(CriticalValue {
                value: 0.0,
                level,
                b,
                kernel,
                q,
                form,
                source: CvSource::Trivial,
            });
        }
        if kernel == Kernel::Daniell && q == 1 && (level - 0.05).abs() < 1e-12 {
            return Ok(CriticalValue {
                value: cv_daniell_0025(b)?,
                level,
                b,
                kernel,
                q,
                form,
                source: CvSource::Polynomial,
            });
        }

        let key = CvKey::new(kernel, b, level, q, &self.sim);
        let source = CvSource::Simulated {
            replications: self.sim.replications,
            step_count: self.sim.step_count,
            seed: self.sim.seed,
        };
        if let Some(value) = self.cache.lock().unwrap().get(&key) {
            return Ok(CriticalValue {
                value,
                level,
                b: key.b(),
                kernel,
                q,
                form,
                source,
            });
        }
        log::info!(
            "simulating fixed-b cv: kernel={kernel} b={:.4} level={level} q={q} reps={}",
            key.b(),
            self.sim.replications
        );
        let cv = simulate_null_cv(kernel, key.b(), level, q, &self.sim)?;
        let mut cache = self.cache.lock().unwrap();
        cache.insert(key, cv.value);
        if let Some(path) = &self.path {
            cache.save(path)?;
        }
        Ok(cv)
    }
}
