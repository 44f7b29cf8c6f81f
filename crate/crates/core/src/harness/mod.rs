//! Experiment orchestration: configuration, runs, and report emission.
//!
//! A run produces a [`Report`]: CSV tables, a JSON summary whose bytes
//! depend only on (config, seed), and wall-clock timings kept apart in
//! `timings.json`.

pub mod config;
mod experiments;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::run;

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(
            row.len(),
            self.header.len(),
            "row width of table {}",
            self.name
        );
        self.rows.push(row);
    }
}

/// Output of one experiment run.
#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub summary: Value,
    pub tables: Vec<Table>,
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    /// Every recorded verdict holds.
    pub fn passed(&self) -> bool {
        self.summary["passed"].as_bool().unwrap_or(false)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    config_hash: String,
    seed: u64,
    config: &'a ExperimentConfig,
    results: &'a Value,
    verdicts: &'a BTreeMap<String, bool>,
    passed: bool,
}

pub(crate) fn summary(
    cfg: &ExperimentConfig,
    results: Value,
    verdicts: BTreeMap<String, bool>,
) -> Value {
    let passed = verdicts.values().all(|v| *v);
    serde_json::to_value(Summary {
        experiment: cfg.experiment.name(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg,
        results: &results,
        verdicts: &verdicts,
        passed,
    })
    .expect("summary serializes")
}

/// Formats a float for CSV: shortest round-trip form, exponent notation
/// for very small or large magnitudes, `inf` for infinity, and no
/// negative zero.
pub fn fmt(x: f64) -> String {
    let a = x.abs();
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == 0.0 {
        "0".to_string()
    } else if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Writes `<table>.csv` for every table, `summary.json` and `timings.json`
/// into `out`. Returns the written paths.
pub fn emit(report: &Report, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for t in &report.tables {
        let path = out.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&report.summary)? + "\n")?;
    written.push(path);
    let path = out.join("timings.json");
    fs::write(&path, serde_json::to_string_pretty(&report.timings)? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Loads a config, overriding the seed when given, and checks that it
/// describes one of the accepted experiments.
pub fn load_config(
    path: &Path,
    accepted: &[ExperimentKind],
    seed: Option<u64>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if !accepted.contains(&cfg.experiment) {
        let names: Vec<&str> = accepted.iter().map(|k| k.name()).collect();
        return Err(Error::Config(format!(
            "config describes a {} experiment, expected {}",
            cfg.experiment.name(),
            names.join(" or ")
        )));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Sizes the global worker pool. Call once, before any run.
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt(0.25), "0.25");
        assert_eq!(fmt(-0.0), "0");
        assert_eq!(fmt(f64::INFINITY), "inf");
        assert_eq!(fmt(5.2e-67), "5.2e-67");
        assert_eq!(fmt(1e20), "1e20");
        for x in [1e-300, 0.1 + 0.2, -3.5e-5, 123456.789] {
            assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
        }
    }
}
