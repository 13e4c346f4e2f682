use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::execute_run;
use super::{create_dir, from_toml, parse_config, write_atomic};
use crate::engine::{AggregatorKind, AttackConfig, FedConfig, RunOptions};
use crate::error::{Error, Result};
use crate::rng::Seeds;

/// Axes of a sweep. Absent axes keep the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub aggregator: Option<Vec<AggregatorKind>>,
    pub alpha: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub c_t: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub ratio: Option<Vec<f64>>,
    /// Master seeds.
    pub seed: Option<Vec<u64>>,
}

/// A sweep file: a base experiment config plus a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Base config path, relative to the sweep file.
    pub base: PathBuf,
    #[serde(default)]
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    /// Directory name, e.g. `aggregator=drag,c=0.25,seed=1`.
    pub label: String,
    pub config: FedConfig,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
enum Setting {
    Aggregator(AggregatorKind),
    Alpha(f64),
    C(f64),
    CT(f64),
    Beta(f64),
    Ratio(f64),
    Seed(u64),
}

impl Setting {
    fn apply(self, cfg: &mut FedConfig) -> Result<String> {
        Ok(match self {
            Setting::Aggregator(k) => {
                cfg.aggregator.kind = k;
                format!("aggregator={k}")
            }
            Setting::Alpha(v) => {
                cfg.aggregator.alpha = v;
                format!("alpha={v}")
            }
            Setting::C(v) => {
                cfg.aggregator.c = v;
                format!("c={v}")
            }
            Setting::CT(v) => {
                cfg.aggregator.c_t = v;
                format!("c_t={v}")
            }
            Setting::Beta(v) => {
                cfg.data.beta = v;
                format!("beta={v}")
            }
            Setting::Ratio(v) => {
                let attack: &mut AttackConfig = cfg
                    .attack
                    .as_mut()
                    .ok_or_else(|| Error::config("ratio", "sweeping the ratio needs an [attack] in the base config"))?;
                attack.ratio = v;
                format!("ratio={v}")
            }
            Setting::Seed(s) => {
                cfg.seeds = Seeds::from_master(s);
                format!("seed={s}")
            }
        })
    }
}

fn axes(grid: &SweepGrid) -> Vec<Vec<Setting>> {
    fn axis<T: Copy>(v: &Option<Vec<T>>, f: fn(T) -> Setting) -> Option<Vec<Setting>> {
        v.as_ref().map(|xs| xs.iter().map(|&x| f(x)).collect())
    }
    [
        axis(&grid.aggregator, Setting::Aggregator),
        axis(&grid.alpha, Setting::Alpha),
        axis(&grid.c, Setting::C),
        axis(&grid.c_t, Setting::CT),
        axis(&grid.beta, Setting::Beta),
        axis(&grid.ratio, Setting::Ratio),
        axis(&grid.seed, Setting::Seed),
    ]
    .into_iter()
    .flatten()
    .collect()
}

/// Cartesian product of the grid over `base`, in a fixed order.
pub fn expand_sweep(base: &FedConfig, grid: &SweepGrid) -> Result<Vec<SweepRun>> {
    let axes = axes(grid);
    if axes.iter().any(Vec::is_empty) {
        return Err(Error::config("grid", "every listed axis needs at least one value"));
    }
    let mut runs = vec![SweepRun {
        label: String::new(),
        config: base.clone(),
        master_seed: None,
    }];
    for axis in &axes {
        let mut next = Vec::with_capacity(runs.len() * axis.len());
        for run in &runs {
            for &setting in axis {
                let mut r = run.clone();
                let part = setting.apply(&mut r.config)?;
                if let Setting::Seed(s) = setting {
                    r.master_seed = Some(s);
                }
                r.label = if r.label.is_empty() { part } else { format!("{},{part}", r.label) };
                next.push(r);
            }
        }
        runs = next;
    }
    for r in &mut runs {
        if r.label.is_empty() {
            r.label = "base".into();
        }
        r.config.name = format!("{}[{}]", base.name, r.label);
        r.config.validate()?;
    }
    Ok(runs)
}

pub fn parse_sweep(path: &Path) -> Result<(FedConfig, SweepGrid)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SweepSpec = from_toml(path, &text)?;
    let base_path = path.parent().unwrap_or(Path::new(".")).join(&spec.base);
    Ok((parse_config(&base_path)?, spec.grid))
}

/// Run every grid point into its own subdirectory of `out`, concurrently
/// when the `parallel` feature is on. Each run's rounds execute serially.
/// Returns the run labels in grid order.
pub fn run_sweep(runs: &[SweepRun], out: &Path, threads: Option<usize>) -> Result<Vec<String>> {
    create_dir(out)?;
    let index: Vec<serde_json::Value> = runs
        .iter()
        .map(|r| serde_json::json!({ "label": r.label, "dir": r.label, "master_seed": r.master_seed }))
        .collect();
    let text = serde_json::to_string_pretty(&index).expect("index serializes") + "\n";
    write_atomic(&out.join("sweep.json"), text.as_bytes())?;

    let one = |r: &SweepRun| {
        execute_run(&r.config, &out.join(&r.label), r.master_seed, RunOptions { threads: Some(1) }).map(|_| ())
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?;
        pool.install(|| runs.par_iter().map(one).collect::<Result<Vec<()>>>())?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        runs.iter().map(one).collect::<Result<Vec<()>>>()?;
    }
    Ok(runs.iter().map(|r| r.label.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::AttackKind;
    use crate::engine::ObjectiveKind;

    #[test]
    fn product_order_and_labels() {
        let grid = SweepGrid {
            c: Some(vec![0.05, 0.1]),
            seed: Some(vec![0, 1, 2]),
            ..Default::default()
        };
        let runs = expand_sweep(&FedConfig::default(), &grid).unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[0].label, "c=0.05,seed=0");
        assert_eq!(runs[5].label, "c=0.1,seed=2");
        assert_eq!(runs[4].config.aggregator.c, 0.1);
        assert_eq!(runs[4].config.seeds, Seeds::from_master(1));
    }

    #[test]
    fn ratio_without_attack_is_config_error() {
        let grid = SweepGrid {
            ratio: Some(vec![0.3]),
            ..Default::default()
        };
        let err = expand_sweep(&FedConfig::default(), &grid).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let mut base = FedConfig::default();
        base.attack = Some(AttackConfig::new(AttackKind::SignFlip, 0.0));
        assert_eq!(expand_sweep(&base, &grid).unwrap()[0].config.attack_ratio(), 0.3);
    }

    #[test]
    fn invalid_grid_value_rejected() {
        let grid = SweepGrid {
            alpha: Some(vec![0.5, 1.5]),
            ..Default::default()
        };
        assert!(matches!(
            expand_sweep(&FedConfig::default(), &grid),
            Err(Error::Config { field, .. }) if field == "alpha"
        ));
    }

    #[test]
    fn sweep_writes_one_directory_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = FedConfig::default();
        base.data.objective = ObjectiveKind::Quadratic;
        base.federation.workers = 4;
        base.federation.selected = 2;
        base.federation.rounds = 2;
        let grid = SweepGrid {
            aggregator: Some(vec![AggregatorKind::Fedavg, AggregatorKind::Drag]),
            ..Default::default()
        };
        let runs = expand_sweep(&base, &grid).unwrap();
        let labels = run_sweep(&runs, dir.path(), Some(2)).unwrap();
        for l in labels {
            assert!(dir.path().join(l).join("metrics.jsonl").exists());
        }
    }
}
