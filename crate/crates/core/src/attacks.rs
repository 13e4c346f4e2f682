//! Byzantine behaviour: who attacks, and what their uploads look like.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SERVER};
use crate::tasks::LabeledDataset;
use crate::vecmath::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Upload `p · g` with a Gaussian scalar `p`.
    Noise,
    /// Upload `-g`.
    SignFlip,
    /// Train on data whose labels `l` were partly replaced by `L - l - 1`.
    LabelFlip,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Noise => "noise",
            AttackKind::SignFlip => "sign-flip",
            AttackKind::LabelFlip => "label-flip",
        }
    }

    /// Whether the attack rewrites the upload (as opposed to the data).
    pub fn acts_on_upload(self) -> bool {
        !matches!(self, AttackKind::LabelFlip)
    }
}

/// How the second parameter of `N(0, s)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseParam {
    #[default]
    Variance,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub scale: f64,
    pub param: NoiseParam,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            scale: 3.0,
            param: NoiseParam::Variance,
        }
    }
}

impl NoiseSpec {
    pub fn std_dev(&self) -> f64 {
        match self.param {
            NoiseParam::Variance => self.scale.sqrt(),
            NoiseParam::Std => self.scale,
        }
    }
}

/// Fixed malicious set plus the attack they run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub malicious: BTreeSet<usize>,
    pub kind: AttackKind,
    pub ratio: f64,
    pub noise: NoiseSpec,
    pub label_flip_fraction: f64,
    seed: u64,
}

impl AttackPlan {
    pub fn new(
        workers: usize,
        kind: AttackKind,
        ratio: f64,
        noise: NoiseSpec,
        label_flip_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&label_flip_fraction) {
            return Err(Error::config("label_flip_fraction", "must lie in [0, 1]"));
        }
        if !(noise.scale >= 0.0 && noise.scale.is_finite()) {
            return Err(Error::config("noise_scale", "must be finite and non-negative"));
        }
        Ok(AttackPlan {
            malicious: assign_malicious(workers, ratio, seed)?,
            kind,
            ratio,
            noise,
            label_flip_fraction,
            seed,
        })
    }

    pub fn is_malicious(&self, worker: usize) -> bool {
        self.malicious.contains(&worker)
    }

    /// Rewrite an upload of a malicious worker. Benign uploads and
    /// data-level attacks pass through unchanged.
    pub fn transform_upload(&self, worker: usize, round: usize, g: ParamVector) -> ParamVector {
        if !self.is_malicious(worker) {
            return g;
        }
        match self.kind {
            AttackKind::SignFlip => sign_flip(&g),
            AttackKind::Noise => {
                let mut rng = stream(self.seed, Purpose::Noise, worker as u64, round as u64);
                noise_inject(&g, &self.noise, &mut rng)
            }
            AttackKind::LabelFlip => g,
        }
    }

    /// Poison a malicious worker's dataset once, before training.
    pub fn poison_dataset(&self, worker: usize, ds: &LabeledDataset) -> Result<Option<LabeledDataset>> {
        if self.kind != AttackKind::LabelFlip || !self.is_malicious(worker) {
            return Ok(None);
        }
        let mut rng = stream(self.seed, Purpose::LabelFlip, worker as u64, 0);
        label_flip(ds, self.label_flip_fraction, &mut rng).map(|(d, _)| Some(d))
    }
}

/// `⌊ratio·M + 0.5⌋` distinct worker ids, uniformly at random.
pub fn assign_malicious(workers: usize, ratio: f64, seed: u64) -> Result<BTreeSet<usize>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config("ratio", format!("{ratio} outside [0, 1]")));
    }
    let count = ((ratio * workers as f64) + 0.5).floor() as usize;
    let count = count.min(workers);
    let mut rng = stream(seed, Purpose::Assign, SERVER, 0);
    Ok(sample(&mut rng, workers, count).into_iter().collect())
}

/// `p · g` with one scalar `p ~ N(0, σ²)` per call.
pub fn noise_inject<R: Rng + ?Sized>(g: &ParamVector, spec: &NoiseSpec, rng: &mut R) -> ParamVector {
    let p = Normal::new(0.0, spec.std_dev()).expect("validated noise scale").sample(rng);
    g.scaled(p)
}

pub fn sign_flip(g: &ParamVector) -> ParamVector {
    g.neg()
}

/// Flip `round(fraction · n)` uniformly chosen labels to `L - l - 1`.
/// Returns the poisoned copy and the sorted flipped indices.
pub fn label_flip<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config("label_flip_fraction", "must lie in [0, 1]"));
    }
    let n = ds.len();
    let count = ((fraction * n as f64).round() as usize).min(n);
    let mut flipped = sample(rng, n, count).into_vec();
    flipped.sort_unstable();
    let classes = ds.classes();
    let mut labels = ds.labels().to_vec();
    for &i in &flipped {
        labels[i] = classes - labels[i] - 1;
    }
    Ok((ds.with_labels(labels)?, flipped))
}
