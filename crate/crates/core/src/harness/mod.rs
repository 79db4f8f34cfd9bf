//! Seeded benchmark sweeps over sample size and filter degree.
//!
//! Every (T, L, seed index) cell draws its own scene from a seed derived from
//! the master seed, so cells are independent and can be computed in any order
//! or skipped on resume. Finished cells are persisted as JSON as soon as they
//! complete; aggregation runs after all cells are done.

pub mod config;
mod report;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::make_scene;
use crate::error::Result;
use crate::pipelines::{Method, RunSummary};
use crate::seed::derive_seed;

pub use config::{parse_methods, DxRule, ExperimentConfig, SampleGrid};
pub use report::{csv_report, loglog_data, CSV_HEADER};

pub const CELLS_DIR: &str = "cells";
pub const CSV_FILE: &str = "summary.csv";
pub const LOGLOG_FILE: &str = "loglog.dat";
pub const RECORDS_FILE: &str = "records.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub t: usize,
    pub l: usize,
    pub seed_index: usize,
}

impl CellKey {
    pub fn seed(&self, master: u64) -> u64 {
        derive_seed(master, &[self.t as u64, self.l as u64, self.seed_index as u64])
    }

    pub fn file_name(&self) -> String {
        format!("T{}_L{}_s{}.json", self.t, self.l, self.seed_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub amari: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
    pub run: Option<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: CellKey,
    pub seed: u64,
    pub scene_digest: Option<String>,
    /// Set when the scene itself could not be generated.
    pub error: Option<String>,
    pub outcomes: Vec<MethodOutcome>,
}

impl CellRecord {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    pub fn failures(&self) -> usize {
        self.error.is_some() as usize + self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    fn covers(&self, methods: &[Method]) -> bool {
        methods.iter().all(|m| self.outcome(*m).is_some())
    }
}

/// Generates the cell's scene and runs every configured method on it. Errors
/// are recorded, never returned.
pub fn run_cell(config: &ExperimentConfig, key: CellKey) -> CellRecord {
    let seed = key.seed(config.master_seed);
    let mut record = CellRecord { key, seed, scene_digest: None, error: None, outcomes: Vec::new() };
    let scene = match config.dims(key.l, key.t).and_then(|dims| make_scene(&config.database, &dims, seed)) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.scene_digest = Some(scene.digest());
    for &method in &config.methods {
        let start = Instant::now();
        let outcome = match method.run(&scene.observation, &scene.dims, seed, Some(&scene.mixing)) {
            Ok(res) => MethodOutcome {
                method,
                amari: res.amari,
                error: None,
                seconds: start.elapsed().as_secs_f64(),
                run: Some(res.summary()),
            },
            Err(e) => MethodOutcome {
                method,
                amari: None,
                error: Some(e.to_string()),
                seconds: start.elapsed().as_secs_f64(),
                run: None,
            },
        };
        log::info!(
            "T={} L={} seed#{} {method}: {}",
            key.t,
            key.l,
            key.seed_index,
            outcome.amari.map_or_else(|| outcome.error.clone().unwrap_or_default(), |r| format!("{:.4}%", 100.0 * r))
        );
        record.outcomes.push(outcome);
    }
    record
}

/// Aggregate over seeds for one (T, L, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: usize,
    pub l: usize,
    pub method: Method,
    /// Per seed index; `None` where the run failed or is missing.
    pub amari: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    /// `mean_TCC / mean_LPA` for this (T, L), when both exist.
    pub quotient: Option<f64>,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn values(&self) -> Vec<f64> {
        self.amari.iter().flatten().copied().collect()
    }
}

/// Records echoed together with the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
}

/// Groups cells into one record per (T, L, method) of the configured grid,
/// ordered by T, then L, then method.
pub fn aggregate(config: &ExperimentConfig, cells: &[CellRecord]) -> Vec<RunRecord> {
    let mut ts = config.sample_sizes();
    ts.sort_unstable();
    let mut ls = config.l.clone();
    ls.sort_unstable();
    ls.dedup();
    let mut methods = config.methods.clone();
    methods.sort();
    let mut out = Vec::new();
    for &t in &ts {
        for &l in &ls {
            let first = out.len();
            for &method in &methods {
                let mut amari = vec![None; config.seeds];
                let mut wall = 0.0;
                for c in cells.iter().filter(|c| c.key.t == t && c.key.l == l && c.key.seed_index < config.seeds) {
                    if let Some(o) = c.outcome(method) {
                        amari[c.key.seed_index] = o.amari;
                        wall += o.seconds;
                    }
                }
                let vals: Vec<f64> = amari.iter().flatten().copied().collect();
                out.push(RunRecord {
                    t,
                    l,
                    method,
                    mean: stats::mean(&vals),
                    std_dev: stats::std_dev(&vals),
                    amari,
                    quotient: None,
                    wall_seconds: wall,
                });
            }
            let mean_of = |m: Method| out[first..].iter().find(|r| r.method == m).and_then(|r| r.mean);
            if let (Some(lpa), Some(tcc)) = (mean_of(Method::Lpa), mean_of(Method::Tcc)) {
                if lpa > 0.0 {
                    for r in &mut out[first..] {
                        r.quotient = Some(tcc / lpa);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Reuse cell files already on disk instead of recomputing them.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: Vec<CellRecord>,
    pub records: Vec<RunRecord>,
    pub failures: usize,
    pub reused: usize,
    pub csv_path: PathBuf,
    pub loglog_path: PathBuf,
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_cell(path: &Path) -> Option<CellRecord> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn grid(config: &ExperimentConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for t in config.sample_sizes() {
        for &l in &config.l {
            for seed_index in 0..config.seeds {
                keys.push(CellKey { t, l, seed_index });
            }
        }
    }
    keys
}

/// Runs (or, with `resume`, completes) every cell of the grid, then writes the
/// CSV summary, log-log plot data and JSON records into `config.output`.
pub fn run_sweep(config: &ExperimentConfig, options: SweepOptions) -> Result<SweepOutcome> {
    config.validate()?;
    let cells_dir = config.output.join(CELLS_DIR);
    fs::create_dir_all(&cells_dir)?;
    write_atomic(&config.output.join(CONFIG_ECHO_FILE), config.to_toml().as_bytes())?;

    let keys = grid(config);
    let results = keys
        .par_iter()
        .map(|&key| -> Result<(CellRecord, bool)> {
            let path = cells_dir.join(key.file_name());
            if options.resume {
                if let Some(cell) = load_cell(&path) {
                    if cell.key == key && cell.seed == key.seed(config.master_seed) && cell.covers(&config.methods) {
                        return Ok((cell, true));
                    }
                }
            }
            let cell = run_cell(config, key);
            write_atomic(&path, serde_json::to_string_pretty(&cell)?.as_bytes())?;
            Ok((cell, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let reused = results.iter().filter(|(_, r)| *r).count();
    let cells: Vec<CellRecord> = results.into_iter().map(|(c, _)| c).collect();
    let failures = cells.iter().map(|c| c.failures()).sum();
    let records = aggregate(config, &cells);
    let (csv_path, loglog_path) = write_report(config, &records)?;
    Ok(SweepOutcome { cells, records, failures, reused, csv_path, loglog_path })
}

/// Writes `summary.csv`, `loglog.dat` and `records.json` into the output
/// directory.
pub fn write_report(config: &ExperimentConfig, records: &[RunRecord]) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&config.output)?;
    let csv_path = config.output.join(CSV_FILE);
    let loglog_path = config.output.join(LOGLOG_FILE);
    write_atomic(&csv_path, csv_report(records)?.as_bytes())?;
    write_atomic(&loglog_path, loglog_data(records).as_bytes())?;
    let set = RecordSet { config: config.clone(), records: records.to_vec() };
    write_atomic(&config.output.join(RECORDS_FILE), serde_json::to_string_pretty(&set)?.as_bytes())?;
    Ok((csv_path, loglog_path))
}

/// Re-aggregates from whatever cell files exist in the output directory.
pub fn report_from_disk(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let cells_dir = config.output.join(CELLS_DIR);
    let cells: Vec<CellRecord> = grid(config)
        .into_iter()
        .filter_map(|key| load_cell(&cells_dir.join(key.file_name())).filter(|c| c.key == key))
        .collect();
    let records = if cells.is_empty() { Vec::new() } else { aggregate(config, &cells) };
    write_report(config, &records)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path, methods: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
d = 2
m = 2
l = [1]
t = [1500, 3000]
seeds = 2
master_seed = 3
methods = [{methods}]
output = "{}"
[database]
kind = "letters"
"#,
            dir.display()
        ))
        .unwrap()
    }

    #[test]
    fn cell_seeds_depend_on_every_coordinate() {
        let k = CellKey { t: 1000, l: 1, seed_index: 0 };
        let seeds = [
            k.seed(1),
            CellKey { t: 1001, ..k }.seed(1),
            CellKey { l: 2, ..k }.seed(1),
            CellKey { seed_index: 1, ..k }.seed(1),
            k.seed(2),
        ];
        for i in 0..seeds.len() {
            for j in 0..i {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn aggregation_statistics_recomputable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), "\"lpa\", \"tcc\"");
        let out = run_sweep(&cfg, SweepOptions::default()).unwrap();
        assert_eq!(out.failures, 0);
        assert_eq!(out.records.len(), 4);
        for r in &out.records {
            let v = r.values();
            assert_eq!(v.len(), 2);
            assert_eq!(r.mean, stats::mean(&v));
            assert_eq!(r.std_dev, stats::std_dev(&v));
            assert!(r.quotient.is_some());
        }
        let csv = fs::read_to_string(&out.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("T,L,method,mean_r,std_r,quotient\n"));
        let set: RecordSet = serde_json::from_str(&fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap()).unwrap();
        assert_eq!(set.records, out.records);
    }

    #[test]
    fn empty_records_give_header_only() {
        assert_eq!(csv_report(&[]).unwrap(), "T,L,method,mean_r,std_r,quotient\n");
        assert_eq!(loglog_data(&[]), "");
    }

    #[test]
    fn missing_values_reported_as_na() {
        let r = RunRecord {
            t: 1000,
            l: 1,
            method: Method::Tcc,
            amari: vec![None],
            mean: None,
            std_dev: None,
            quotient: None,
            wall_seconds: 0.0,
        };
        assert_eq!(csv_report(&[r]).unwrap().lines().nth(1).unwrap(), "1000,1,TCC,NA,NA,NA");
    }
}
