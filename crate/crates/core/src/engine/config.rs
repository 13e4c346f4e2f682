use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, NoiseParam, NoiseSpec};
use crate::baselines::FedAcgState;
use crate::drag::CtSchedule;
use crate::error::{Error, Result};
use crate::rng::Seeds;
use crate::tasks::TinyMlp;

/// Which aggregation rule the server runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorKind {
    Fedavg,
    Fedprox,
    Scaffold,
    Fedexp,
    Fedacg,
    Drag,
    BrDrag,
    Fltrust,
    Rfa,
    Raga,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 10] = [
        AggregatorKind::Fedavg,
        AggregatorKind::Fedprox,
        AggregatorKind::Scaffold,
        AggregatorKind::Fedexp,
        AggregatorKind::Fedacg,
        AggregatorKind::Drag,
        AggregatorKind::BrDrag,
        AggregatorKind::Fltrust,
        AggregatorKind::Rfa,
        AggregatorKind::Raga,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregatorKind::Fedavg => "fedavg",
            AggregatorKind::Fedprox => "fedprox",
            AggregatorKind::Scaffold => "scaffold",
            AggregatorKind::Fedexp => "fedexp",
            AggregatorKind::Fedacg => "fedacg",
            AggregatorKind::Drag => "drag",
            AggregatorKind::BrDrag => "br-drag",
            AggregatorKind::Fltrust => "fltrust",
            AggregatorKind::Rfa => "rfa",
            AggregatorKind::Raga => "raga",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        AggregatorKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config("aggregator", format!("unknown aggregator `{name}`")))
    }

    /// Rules that need the trusted root dataset.
    pub fn uses_root(self) -> bool {
        matches!(self, AggregatorKind::BrDrag | AggregatorKind::Fltrust)
    }
}

impl std::fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub workers: usize,
    pub selected: usize,
    pub rounds: usize,
    pub local_steps: usize,
    pub batch_size: usize,
    pub stepsize: f64,
    /// Evaluate loss/accuracy every this many rounds (the last round is
    /// always evaluated).
    pub eval_every: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            workers: 40,
            selected: 10,
            rounds: 300,
            local_steps: 5,
            batch_size: 10,
            stepsize: 0.01,
            eval_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregatorConfig {
    pub kind: AggregatorKind,
    /// Reference momentum weight.
    pub alpha: f64,
    /// DoD coefficient for the momentum-referenced rule.
    pub c: f64,
    /// DoD coefficient for the root-referenced rule.
    pub c_t: f64,
    /// Per-round override of `c_t`; the last value repeats.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_t_schedule: Option<Vec<f64>>,
    pub mu: f64,
    pub epsilon: f64,
    pub acg_beta: f64,
    pub acg_lambda: f64,
    pub geomed_tol: f64,
    pub geomed_max_iter: usize,
    /// Root dataset size; defaults to `min(3000, 10% of the training pool)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_size: Option<usize>,
    /// Root mini-batch size; 0 means full batch. Defaults to the worker
    /// batch size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_batch_size: Option<usize>,
    /// Keep every aggregate so the reference can be checked against its
    /// closed form.
    pub keep_reference_history: bool,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        AggregatorConfig {
            kind: AggregatorKind::Drag,
            alpha: 0.25,
            c: 0.1,
            c_t: 0.5,
            c_t_schedule: None,
            mu: 0.2,
            epsilon: 0.001,
            acg_beta: FedAcgState::DEFAULT_BETA,
            acg_lambda: FedAcgState::DEFAULT_LAMBDA,
            geomed_tol: 1e-7,
            geomed_max_iter: 200,
            root_size: None,
            root_batch_size: None,
            keep_reference_history: false,
        }
    }
}

impl AggregatorConfig {
    pub fn c_t_schedule(&self) -> CtSchedule {
        match &self.c_t_schedule {
            Some(v) => CtSchedule::PerRound(v.clone()),
            None => CtSchedule::Constant(self.c_t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    #[serde(default)]
    pub ratio: f64,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub noise_param: NoiseParam,
    #[serde(default = "default_flip_fraction")]
    pub label_flip_fraction: f64,
}

fn default_noise_scale() -> f64 {
    3.0
}

fn default_flip_fraction() -> f64 {
    0.5
}

impl AttackConfig {
    pub fn new(kind: AttackKind, ratio: f64) -> Self {
        AttackConfig {
            kind,
            ratio,
            noise_scale: default_noise_scale(),
            noise_param: NoiseParam::default(),
            label_flip_fraction: default_flip_fraction(),
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            scale: self.noise_scale,
            param: self.noise_param,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Logistic,
    Mlp,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub objective: ObjectiveKind,
    /// Load samples from this CSV instead of synthesizing them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_classes: Option<usize>,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    /// Dirichlet concentration of the label split.
    pub beta: f64,
    pub test_fraction: f64,
    pub hidden: usize,
    /// Quadratic workload: model dimension.
    pub dim: usize,
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Std of the per-worker optima around the shared offset.
    pub optimum_spread: f64,
    /// Shared offset of every coordinate of every worker optimum; the
    /// model starts at the origin.
    pub optimum_offset: f64,
    pub noise_std: f64,
    pub samples_per_worker: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            objective: ObjectiveKind::Logistic,
            csv: None,
            csv_classes: None,
            samples: 5000,
            features: 10,
            classes: 10,
            separation: 3.0,
            beta: 0.1,
            test_fraction: 0.2,
            hidden: TinyMlp::DEFAULT_HIDDEN,
            dim: 10,
            curvature_min: 0.5,
            curvature_max: 2.0,
            optimum_spread: 1.0,
            optimum_offset: 5.0,
            noise_std: 0.5,
            samples_per_worker: 50,
        }
    }
}

/// Every knob of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedConfig {
    pub name: String,
    pub federation: FederationConfig,
    pub aggregator: AggregatorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    pub data: DataConfig,
    pub seeds: Seeds,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            name: "experiment".into(),
            federation: FederationConfig::default(),
            aggregator: AggregatorConfig::default(),
            attack: None,
            data: DataConfig::default(),
            seeds: Seeds::default(),
        }
    }
}

fn require(ok: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

fn unit_interval(v: f64, field: &str) -> Result<()> {
    require((0.0..=1.0).contains(&v), field, format!("{v} outside [0, 1]"))
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        let f = &self.federation;
        require(f.workers >= 1, "workers", "need at least one worker")?;
        require(f.selected >= 1, "selected", "must be at least 1")?;
        require(
            f.selected <= f.workers,
            "selected",
            format!("{} selected exceeds {} workers", f.selected, f.workers),
        )?;
        require(f.local_steps >= 1, "local_steps", "must be at least 1")?;
        require(f.batch_size >= 1, "batch_size", "must be at least 1")?;
        require(f.stepsize > 0.0 && f.stepsize.is_finite(), "stepsize", "must be positive")?;
        require(f.eval_every >= 1, "eval_every", "must be at least 1")?;

        let a = &self.aggregator;
        require(a.alpha > 0.0 && a.alpha < 1.0, "alpha", format!("{} outside (0, 1)", a.alpha))?;
        unit_interval(a.c, "c")?;
        unit_interval(a.c_t, "c_t")?;
        if let Some(s) = &a.c_t_schedule {
            require(!s.is_empty(), "c_t_schedule", "must not be empty")?;
            for &v in s {
                unit_interval(v, "c_t_schedule")?;
            }
        }
        require(a.mu >= 0.0, "mu", "must be non-negative")?;
        require(a.epsilon > 0.0, "epsilon", "must be positive")?;
        require(a.acg_beta >= 0.0, "acg_beta", "must be non-negative")?;
        require((0.0..1.0).contains(&a.acg_lambda), "acg_lambda", "must lie in [0, 1)")?;
        require(a.geomed_tol > 0.0, "geomed_tol", "must be positive")?;
        require(a.geomed_max_iter >= 1, "geomed_max_iter", "must be at least 1")?;
        if let Some(r) = a.root_size {
            require(r >= 1, "root_size", "must be at least 1")?;
        }

        if let Some(atk) = &self.attack {
            unit_interval(atk.ratio, "ratio")?;
            require(atk.noise_scale >= 0.0 && atk.noise_scale.is_finite(), "noise_scale", "must be non-negative")?;
            unit_interval(atk.label_flip_fraction, "label_flip_fraction")?;
        }

        let d = &self.data;
        require(d.beta > 0.0 && d.beta.is_finite(), "beta", "must be positive")?;
        require((0.0..1.0).contains(&d.test_fraction), "test_fraction", "must lie in [0, 1)")?;
        match d.objective {
            ObjectiveKind::Quadratic => {
                require(d.dim >= 1, "dim", "must be at least 1")?;
                require(
                    d.curvature_min > 0.0 && d.curvature_max >= d.curvature_min,
                    "curvature_min",
                    "need 0 < curvature_min <= curvature_max",
                )?;
                require(d.optimum_spread >= 0.0, "optimum_spread", "must be non-negative")?;
                require(d.optimum_offset.is_finite(), "optimum_offset", "must be finite")?;
                require(d.noise_std >= 0.0, "noise_std", "must be non-negative")?;
                require(d.samples_per_worker >= 1, "samples_per_worker", "must be at least 1")?;
            }
            ObjectiveKind::Logistic | ObjectiveKind::Mlp => {
                if d.csv.is_none() {
                    require(d.classes >= 2, "classes", "need at least 2 classes")?;
                    require(d.features >= 1, "features", "must be at least 1")?;
                    require(d.samples >= d.classes, "samples", "need at least one sample per class")?;
                    require(d.separation >= 0.0, "separation", "must be non-negative")?;
                }
                if d.objective == ObjectiveKind::Mlp {
                    require(d.hidden >= 1, "hidden", "must be at least 1")?;
                }
            }
        }
        Ok(())
    }

    pub fn attack_ratio(&self) -> f64 {
        self.attack.as_ref().map_or(0.0, |a| a.ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(cfg: &FedConfig) -> String {
        match cfg.validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_validate() {
        FedConfig::default().validate().unwrap();
    }

    #[test]
    fn range_checks_name_the_field() {
        let mut cfg = FedConfig::default();
        cfg.aggregator.alpha = 1.2;
        assert_eq!(field_of(&cfg), "alpha");

        let mut cfg = FedConfig::default();
        cfg.federation.selected = 50;
        assert_eq!(field_of(&cfg), "selected");

        let mut cfg = FedConfig::default();
        cfg.aggregator.c = -0.1;
        assert_eq!(field_of(&cfg), "c");

        let mut cfg = FedConfig::default();
        cfg.federation.stepsize = 0.0;
        assert_eq!(field_of(&cfg), "stepsize");

        let mut cfg = FedConfig::default();
        cfg.attack = Some(AttackConfig::new(AttackKind::SignFlip, 1.5));
        assert_eq!(field_of(&cfg), "ratio");
    }

    #[test]
    fn aggregator_names_round_trip() {
        for k in AggregatorKind::ALL {
            assert_eq!(AggregatorKind::parse(k.name()).unwrap(), k);
        }
        assert!(AggregatorKind::parse("krum").is_err());
    }
}
