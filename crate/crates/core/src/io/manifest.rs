use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{MetricsWriter, CSV_FILE, JSONL_FILE, TIMINGS_FILE};
use super::{config_to_toml, create_dir, parse_config_str, write_atomic};
use crate::engine::{FedConfig, RoundRecord, RunOptions, Simulation};
use crate::error::{Error, Result};
use crate::rng::Seeds;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    /// Aborted; the metric files hold the rounds completed before the error.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub metrics_jsonl: PathBuf,
    pub metrics_csv: PathBuf,
    pub timings_csv: PathBuf,
}

/// Everything needed to re-derive a run's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub artifact: String,
    pub version: String,
    pub name: String,
    /// Canonical TOML of the validated config.
    pub config: String,
    /// SHA-256 of `config`, hex.
    pub config_hash: String,
    pub seeds: Seeds,
    pub master_seed: Option<u64>,
    pub started: String,
    pub finished: Option<String>,
    pub status: RunStatus,
    pub rounds_completed: usize,
    pub error: Option<String>,
    pub outputs: RunOutputs,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ExperimentManifest {
    pub fn new(cfg: &FedConfig, master_seed: Option<u64>) -> Result<Self> {
        let config = config_to_toml(cfg)?;
        Ok(ExperimentManifest {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            name: cfg.name.clone(),
            config_hash: sha256_hex(&config),
            config,
            seeds: cfg.seeds,
            master_seed,
            started: now(),
            finished: None,
            status: RunStatus::Running,
            rounds_completed: 0,
            error: None,
            outputs: RunOutputs {
                metrics_jsonl: JSONL_FILE.into(),
                metrics_csv: CSV_FILE.into(),
                timings_csv: TIMINGS_FILE.into(),
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", e.line()),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// The config snapshot, after checking it against the recorded hash.
    pub fn config(&self, path: &Path) -> Result<FedConfig> {
        if sha256_hex(&self.config) != self.config_hash {
            return Err(Error::Verification(format!("{}: config hash mismatch", path.display())));
        }
        parse_config_str(&self.config, path, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Run an experiment into `out`: manifest first, then metrics round by
/// round, then the final manifest. On failure the manifest is marked
/// partial and the error is returned.
pub fn execute_run(
    cfg: &FedConfig,
    out: &Path,
    master_seed: Option<u64>,
    opts: RunOptions,
) -> Result<(ExperimentManifest, Vec<RoundRecord>)> {
    cfg.validate()?;
    create_dir(out)?;
    let manifest_path = out.join(MANIFEST_FILE);
    let mut manifest = ExperimentManifest::new(cfg, master_seed)?;
    manifest.save(&manifest_path)?;

    let mut records = Vec::with_capacity(cfg.federation.rounds);
    let result = (|| -> Result<()> {
        let mut writer = MetricsWriter::create(
            &out.join(JSONL_FILE),
            &out.join(CSV_FILE),
            Some(&out.join(TIMINGS_FILE)),
        )?;
        let mut sim = Simulation::new(cfg.clone(), opts)?;
        while sim.round() < cfg.federation.rounds {
            let rec = sim.run_round()?;
            writer.write(&rec)?;
            records.push(rec);
        }
        Ok(())
    })();

    manifest.rounds_completed = records.len();
    manifest.finished = Some(now());
    match result {
        Ok(()) => {
            manifest.status = RunStatus::Complete;
            manifest.save(&manifest_path)?;
            Ok((manifest, records))
        }
        Err(e) => {
            manifest.status = RunStatus::Partial;
            manifest.error = Some(e.to_string());
            manifest.save(&manifest_path)?;
            Err(e)
        }
    }
}

/// Re-run the experiment recorded in `manifest_path` into `out`.
pub fn rerun_from_manifest(
    manifest_path: &Path,
    out: &Path,
    opts: RunOptions,
) -> Result<(ExperimentManifest, Vec<RoundRecord>)> {
    let m = ExperimentManifest::load(manifest_path)?;
    let cfg = m.config(manifest_path)?;
    execute_run(&cfg, out, m.master_seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ObjectiveKind;

    fn small() -> FedConfig {
        let mut cfg = FedConfig::default();
        cfg.data.objective = ObjectiveKind::Quadratic;
        cfg.federation.workers = 6;
        cfg.federation.selected = 3;
        cfg.federation.rounds = 4;
        cfg
    }

    #[test]
    fn manifest_reproduces_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let (m, recs) = execute_run(&small(), &a, None, RunOptions::default()).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(recs.len(), 4);
        let b = dir.path().join("b");
        rerun_from_manifest(&a.join(MANIFEST_FILE), &b, RunOptions { threads: Some(1) }).unwrap();
        let read = |d: &Path| fs::read(d.join(JSONL_FILE)).unwrap();
        assert_eq!(read(&a), read(&b));
        let loaded = ExperimentManifest::load(&b.join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded.config_hash, m.config_hash);
    }

    #[test]
    fn tampered_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = ExperimentManifest::new(&small(), None).unwrap();
        m.config = m.config.replace("rounds = 4", "rounds = 5");
        let p = dir.path().join(MANIFEST_FILE);
        m.save(&p).unwrap();
        let err = rerun_from_manifest(&p, dir.path(), RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn failing_run_is_flagged_partial() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.federation.stepsize = 1e200;
        cfg.federation.rounds = 50;
        let err = execute_run(&cfg, dir.path(), None, RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
        let m = ExperimentManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, RunStatus::Partial);
        assert!(m.error.is_some());
        let lines = fs::read_to_string(dir.path().join(JSONL_FILE)).unwrap().lines().count();
        assert_eq!(lines, m.rounds_completed);
    }
}
