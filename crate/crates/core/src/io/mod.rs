//! Config files, metric files, manifests, sweeps and plot tables.

mod manifest;
mod metrics;
mod plots;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

pub use manifest::{execute_run, rerun_from_manifest, ExperimentManifest, RunOutputs, RunStatus, MANIFEST_FILE};
pub use metrics::{format_real, write_metrics, MetricsWriter, CSV_FILE, JSONL_FILE, TIMINGS_FILE};
pub use plots::{export_plots, PlotRow};
pub use sweep::{expand_sweep, parse_sweep, run_sweep, SweepGrid, SweepRun, SweepSpec};

use crate::engine::FedConfig;
use crate::error::{Error, Result};

fn parse_error(path: &Path, text: &str, err: toml::de::Error) -> Error {
    let message = match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", err.message())
        }
        None => err.message().to_string(),
    };
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Parse TOML text into a value, reporting errors against `path`.
pub(crate) fn from_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| parse_error(path, text, e))
}

/// Parse config text. Relative dataset paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, path: &Path, base_dir: &Path) -> Result<FedConfig> {
    let mut cfg: FedConfig = from_toml(path, text)?;
    if let Some(csv) = &cfg.data.csv {
        if csv.is_relative() {
            cfg.data.csv = Some(base_dir.join(csv));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and validate a config file.
pub fn parse_config(path: &Path) -> Result<FedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path, path.parent().unwrap_or(Path::new(".")))
}

/// Canonical TOML rendering of a config; the manifest stores and hashes it.
pub fn config_to_toml(cfg: &FedConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config("config", format!("cannot serialize: {e}")))
}

/// Write `contents` to a temporary sibling and rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    tmp.set_file_name(name);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AggregatorKind;

    fn parse(text: &str) -> Result<FedConfig> {
        parse_config_str(text, Path::new("test.toml"), Path::new("/data"))
    }

    #[test]
    fn paper_defaults_parse() {
        let cfg = parse(
            "[federation]\nworkers = 40\nselected = 10\nlocal_steps = 5\nbatch_size = 10\nstepsize = 0.01\n\
             [aggregator]\nkind = \"drag\"\nalpha = 0.25\nc = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.federation.workers, 40);
        assert_eq!(cfg.aggregator.kind, AggregatorKind::Drag);
        assert_eq!(cfg.aggregator.c, 0.1);
    }

    #[test]
    fn alpha_out_of_range_names_field() {
        match parse("[aggregator]\nalpha = 1.2\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_many_selected_rejected() {
        match parse("[federation]\nworkers = 40\nselected = 50\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "selected"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse("name = \"x\"\n\n[federation]\nworkerz = 3\n").unwrap_err();
        match &err {
            Error::Parse { message, .. } => assert!(message.starts_with("line 4"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn relative_csv_resolves_against_config_dir() {
        let cfg = parse("[data]\ncsv = \"train.csv\"\n").unwrap();
        assert_eq!(cfg.data.csv.unwrap(), Path::new("/data/train.csv"));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = FedConfig::default();
        cfg.seeds = crate::rng::Seeds::from_master(u64::MAX);
        let text = config_to_toml(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
