use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::{ExperimentManifest, MANIFEST_FILE};
use super::metrics::csv_real;
use super::create_dir;
use crate::error::{Error, Result};

/// One row of a per-figure table: a round of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub round: usize,
    pub aggregator: String,
    pub alpha: f64,
    pub c: f64,
    pub c_t: f64,
    pub seed: u64,
    pub run: String,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
}

const HEADER: [&str; 9] = ["round", "aggregator", "alpha", "c", "c_t", "seed", "run", "accuracy", "loss"];

fn find_manifests(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            found.push(p);
        }
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<serde_json::Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

fn group_name(beta: f64, attack: Option<(&str, f64)>) -> String {
    match attack {
        Some((kind, ratio)) => format!("beta={beta}_attack={kind}_ratio={ratio}.csv"),
        None => format!("beta={beta}_attack=none.csv"),
    }
}

/// Collect every run under `input` into tidy tables in `out`, one per
/// (β, attack, ratio) combination: round against accuracy and loss for
/// each aggregator and seed. Returns the written files.
pub fn export_plots(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut manifests = Vec::new();
    find_manifests(input, &mut manifests)?;
    if manifests.is_empty() {
        return Err(Error::Data(format!("no {MANIFEST_FILE} found under {}", input.display())));
    }
    let mut groups: BTreeMap<String, Vec<PlotRow>> = BTreeMap::new();
    for mpath in &manifests {
        let m = ExperimentManifest::load(mpath)?;
        let cfg = m.config(mpath)?;
        let dir = mpath.parent().unwrap_or(Path::new("."));
        let run = dir.strip_prefix(input).unwrap_or(dir).display().to_string();
        let attack = cfg.attack.as_ref().map(|a| (a.kind.name(), a.ratio));
        let rows = groups.entry(group_name(cfg.data.beta, attack)).or_default();
        for rec in read_records(&dir.join(&m.outputs.metrics_jsonl))? {
            rows.push(PlotRow {
                round: rec["round"].as_u64().unwrap_or_default() as usize,
                aggregator: cfg.aggregator.kind.name().into(),
                alpha: cfg.aggregator.alpha,
                c: cfg.aggregator.c,
                c_t: cfg.aggregator.c_t,
                seed: m.master_seed.unwrap_or(cfg.seeds.partition),
                run: run.clone(),
                accuracy: rec["accuracy"].as_f64(),
                loss: rec["loss"].as_f64(),
            });
        }
    }

    create_dir(out)?;
    let mut written = Vec::with_capacity(groups.len());
    for (name, rows) in groups {
        let path = out.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut put = |rec: &[String]| w.write_record(rec).map_err(|e| Error::Data(format!("{}: {e}", path.display())));
        put(&HEADER.map(String::from))?;
        for r in &rows {
            put(&[
                r.round.to_string(),
                r.aggregator.clone(),
                r.alpha.to_string(),
                r.c.to_string(),
                r.c_t.to_string(),
                r.seed.to_string(),
                r.run.clone(),
                csv_real(r.accuracy),
                csv_real(r.loss),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::AttackKind;
    use crate::engine::{AttackConfig, FedConfig, RunOptions};
    use crate::io::execute_run;

    fn tiny(aggr: crate::engine::AggregatorKind, attack: bool) -> FedConfig {
        let mut cfg = FedConfig::default();
        cfg.aggregator.kind = aggr;
        cfg.federation.workers = 4;
        cfg.federation.selected = 2;
        cfg.federation.rounds = 3;
        cfg.data.samples = 200;
        if attack {
            cfg.attack = Some(AttackConfig::new(AttackKind::SignFlip, 0.5));
        }
        cfg
    }

    #[test]
    fn groups_by_beta_and_attack() {
        use crate::engine::AggregatorKind::*;
        let dir = tempfile::tempdir().unwrap();
        let runs = dir.path().join("runs");
        execute_run(&tiny(Fedavg, false), &runs.join("a"), Some(0), RunOptions::default()).unwrap();
        execute_run(&tiny(Drag, false), &runs.join("b"), Some(0), RunOptions::default()).unwrap();
        execute_run(&tiny(BrDrag, true), &runs.join("c"), Some(0), RunOptions::default()).unwrap();
        let files = export_plots(&runs, &dir.path().join("plots")).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
        assert_eq!(names, ["beta=0.1_attack=none.csv", "beta=0.1_attack=sign-flip_ratio=0.5.csv"]);
        let mut r = csv::Reader::from_path(&files[0]).unwrap();
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), HEADER);
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 6);
        assert_eq!(&rows[0][1], "fedavg");
        assert_eq!(&rows[3][1], "drag");
        assert!(rows.iter().all(|row| !row[7].is_empty()));
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_plots(dir.path(), &dir.path().join("o")).is_err());
    }
}
