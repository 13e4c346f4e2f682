//! WebAssembly bindings behind `www/index.html`. Each exported function
//! returns JSON text; the logic lives in plain functions so it is testable
//! off the browser.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fedsim::attacks::AttackKind;
use fedsim::drag::{dod, modify_br, modify_drag};
use fedsim::engine::{AggregatorKind, AttackConfig, FedConfig, RunOptions, Simulation};
use fedsim::rng::{stream, Purpose, Seeds, SERVER};
use fedsim::tasks::dirichlet_partition_indices;
use fedsim::vecmath::{cosine, ZERO_NORM_EPS};
use fedsim::ParamVector;

#[derive(Debug, Serialize, PartialEq)]
pub struct Geometry {
    pub cos: f64,
    pub lambda: f64,
    pub v: [f64; 2],
}

/// Calibrated upload for a planar update `g` and reference `r`.
pub fn geometry(g: [f64; 2], r: [f64; 2], c: f64, robust: bool) -> fedsim::Result<Geometry> {
    let (g, r) = (ParamVector::new(g.to_vec()), ParamVector::new(r.to_vec()));
    let lambda = dod(&g, &r, c)?;
    let v = if robust {
        modify_br(&g, &r, lambda)?
    } else {
        modify_drag(&g, &r, lambda)?
    };
    Ok(Geometry {
        cos: cosine(&g, &r, ZERO_NORM_EPS)?,
        lambda,
        v: [v[0], v[1]],
    })
}

/// Per-worker class counts when `per_class` samples of each class are
/// split with Dirichlet(β) shares.
pub fn shares(workers: usize, classes: usize, per_class: usize, beta: f64, seed: u64) -> fedsim::Result<Vec<Vec<usize>>> {
    let labels: Vec<usize> = (0..classes * per_class).map(|i| i % classes).collect();
    let mut rng = stream(seed, Purpose::Partition, SERVER, 0);
    let parts = dirichlet_partition_indices(&labels, classes, workers, beta, &mut rng)?;
    Ok(parts
        .iter()
        .map(|idx| {
            let mut counts = vec![0; classes];
            for &i in idx {
                counts[labels[i]] += 1;
            }
            counts
        })
        .collect())
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Curve {
    pub aggregator: String,
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Training curves of several rules on a small synthetic federation.
pub fn curves(
    aggregators: &[AggregatorKind],
    beta: f64,
    c: f64,
    attack: Option<(AttackKind, f64)>,
    rounds: usize,
    seed: u64,
) -> fedsim::Result<Vec<Curve>> {
    aggregators
        .iter()
        .map(|&kind| {
            let mut cfg = FedConfig::default();
            cfg.name = kind.name().into();
            cfg.federation.workers = 20;
            cfg.federation.selected = 5;
            cfg.federation.rounds = rounds;
            cfg.data.samples = 2000;
            cfg.data.beta = beta;
            cfg.aggregator.kind = kind;
            cfg.aggregator.c = c;
            cfg.attack = attack.map(|(k, ratio)| AttackConfig::new(k, ratio));
            cfg.seeds = Seeds::from_master(seed);
            let mut sim = Simulation::new(cfg, RunOptions::default())?;
            let recs = sim.run()?;
            Ok(Curve {
                aggregator: kind.name().into(),
                loss: recs.iter().map(|r| r.loss.unwrap_or(f64::NAN)).collect(),
                accuracy: recs.iter().map(|r| r.accuracy.unwrap_or(f64::NAN)).collect(),
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: fedsim::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

fn parse_attack(name: &str) -> Result<Option<AttackKind>, JsError> {
    Ok(match name {
        "" | "none" => None,
        "noise" => Some(AttackKind::Noise),
        "sign-flip" => Some(AttackKind::SignFlip),
        "label-flip" => Some(AttackKind::LabelFlip),
        other => return Err(JsError::new(&format!("unknown attack `{other}`"))),
    })
}

#[wasm_bindgen]
pub fn drag_geometry(gx: f64, gy: f64, rx: f64, ry: f64, c: f64, robust: bool) -> Result<String, JsError> {
    to_js(geometry([gx, gy], [rx, ry], c, robust))
}

#[wasm_bindgen]
pub fn dirichlet_shares(workers: usize, classes: usize, beta: f64, seed: u64) -> Result<String, JsError> {
    to_js(shares(workers, classes, 100, beta, seed))
}

/// `aggregators` is a comma-separated list such as `fedavg,drag`.
#[wasm_bindgen]
pub fn convergence_curves(
    aggregators: &str,
    beta: f64,
    c: f64,
    attack: &str,
    ratio: f64,
    rounds: usize,
    seed: u64,
) -> Result<String, JsError> {
    let kinds = aggregators
        .split(',')
        .map(|s| AggregatorKind::parse(s.trim()))
        .collect::<fedsim::Result<Vec<_>>>()
        .map_err(|e| JsError::new(&e.to_string()))?;
    let attack = parse_attack(attack)?.map(|k| (k, ratio));
    to_js(curves(&kinds, beta, c, attack, rounds, seed))
}
