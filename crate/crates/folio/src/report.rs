//! Result files: net series, per-step weights, metrics JSON and the run
//! manifest. Every file is written to a temporary sibling and renamed into
//! place.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use folio_core::allocators::AllocatorKind;
use folio_core::metrics::{Metric, MetricsReport};
use folio_core::walkforward::{BacktestResult, StepResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::csvio::write_series;
use crate::error::{FolioError, Result};

/// Writes `bytes` to `path` via write-temp-then-rename, creating parent
/// directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| FolioError::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| FolioError::Config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(FolioError::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| FolioError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| FolioError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| FolioError::Json { path: path.to_path_buf(), source })
}

/// Writes `step,ticker,weight` rows.
pub fn write_weights(path: &Path, steps: &[StepResult]) -> Result<()> {
    let mut out = String::from("step,ticker,weight\n");
    for s in steps {
        for (t, w) in s.weights.tickers().iter().zip(s.weights.weights()) {
            out.push_str(&format!("{},{t},{w}\n", s.step));
        }
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct WeightRow {
    pub step: usize,
    pub ticker: String,
    pub weight: f64,
}

pub fn read_weights(path: &Path) -> Result<Vec<WeightRow>> {
    let csv_err = |source| FolioError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// Hex SHA-256 of the canonical JSON form of `cfg`.
pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

/// Machine-readable record of how a run was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub folio_version: String,
    pub core_version: String,
    /// The only field that differs between otherwise identical runs.
    pub created_at: String,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(cfg),
            schema_version: SCHEMA_VERSION,
            seeds,
            folio_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: folio_core::VERSION.to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// Per-step summary kept in the metrics document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub last_visible_date: NaiveDate,
    pub cost: f64,
    pub information_ratio: Metric,
    pub metrics: MetricsReport,
}

/// Metrics of one backtest run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub allocator: String,
    pub kind: AllocatorKind,
    pub seed: Option<u64>,
    pub series_file: String,
    pub weights_file: String,
    pub metrics: MetricsReport,
    pub steps: Vec<StepSummary>,
}

/// Writes `series/<stem>.csv` and `weights/<stem>.csv` under `dir` and
/// returns the run's metrics summary.
pub fn emit_backtest(
    dir: &Path,
    stem: &str,
    allocator: &str,
    kind: AllocatorKind,
    seed: Option<u64>,
    result: &BacktestResult,
) -> Result<RunReport> {
    let series_file = format!("series/{stem}.csv");
    let weights_file = format!("weights/{stem}.csv");
    write_series(&dir.join(&series_file), &result.net)?;
    write_weights(&dir.join(&weights_file), &result.steps)?;
    let steps = result
        .steps
        .iter()
        .map(|s| StepSummary {
            step: s.step,
            first_date: s.dates[0],
            last_date: s.dates[s.dates.len() - 1],
            last_visible_date: s.last_visible_date,
            cost: s.cost,
            information_ratio: s.information_ratio,
            metrics: s.metrics.clone(),
        })
        .collect();
    Ok(RunReport {
        allocator: allocator.to_string(),
        kind,
        seed,
        series_file,
        weights_file,
        metrics: result.metrics.clone(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        let err = write_atomic(&blocker.join("x.json"), b"{}").unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn hash_changes_iff_config_changes() {
        let text = "schema_version = 1\n[data]\nsource = \"synthetic\"\nn_assets = 3\nn_days = 400\nseed = 1\n[[allocators]]\nkind = \"gmv\"\n";
        let a = RunConfig::from_toml_str(text, Path::new("a.toml")).unwrap();
        let same = RunConfig::from_toml_str(&format!("# comment\n{text}"), Path::new("a.toml")).unwrap();
        let b = RunConfig::from_toml_str(&text.replace("seed = 1", "seed = 2"), Path::new("a.toml")).unwrap();
        assert_eq!(config_hash(&a), config_hash(&same));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
