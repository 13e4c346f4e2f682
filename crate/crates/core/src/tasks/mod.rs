//! Desk-scale workloads: datasets, objectives, partitioning.

mod csv_import;
pub(crate) mod objective;
mod partition;
mod synthetic;

pub use csv_import::load_csv;
pub use objective::{HeterogeneousQuadratic, MultinomialLogistic, Objective, TinyMlp};
pub use partition::{dirichlet_partition, dirichlet_partition_indices, label_entropy};
pub use synthetic::{
    class_balanced_sample, make_quadratic_samples, make_synthetic_classification,
    train_test_split,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::vecmath::ParamVector;

/// Feature matrix (row-major) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, input_dim: usize, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("dataset must hold at least one sample".into()));
        }
        if input_dim == 0 || features.len() != labels.len() * input_dim {
            return Err(Error::Data(format!(
                "{} feature values do not form {} rows of width {input_dim}",
                features.len(),
                labels.len()
            )));
        }
        if classes == 0 {
            return Err(Error::Data("class count must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} outside [0, {classes})")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(LabeledDataset {
            features,
            labels,
            input_dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!("index {i} out of range {}", self.len())));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset::new(features, labels, self.input_dim, self.classes)
    }

    /// Same features with a replaced label vector.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<LabeledDataset> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: labels.len(),
            });
        }
        LabeledDataset::new(self.features.clone(), labels, self.input_dim, self.classes)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Index list into a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch(pub Vec<usize>);

impl MiniBatch {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `size` indices drawn uniformly with replacement.
pub fn sample_batch<R: Rng + ?Sized>(ds: &LabeledDataset, size: usize, rng: &mut R) -> Result<MiniBatch> {
    if ds.is_empty() {
        return Err(Error::Data("cannot sample from an empty dataset".into()));
    }
    if size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    Ok(MiniBatch((0..size).map(|_| rng.random_range(0..ds.len())).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Present only for classifiers.
    pub accuracy: Option<f64>,
}

/// Full-dataset mean loss and (for classifiers) accuracy.
pub fn evaluate(obj: &dyn Objective, theta: &ParamVector, ds: &LabeledDataset) -> Result<Evaluation> {
    let all: Vec<usize> = (0..ds.len()).collect();
    let loss = obj.loss(theta, ds, &all)?;
    let accuracy = if obj.is_classifier() {
        let hits = (0..ds.len())
            .filter(|&i| obj.predict(theta, ds.row(i)) == Some(ds.label(i)))
            .count();
        Some(hits as f64 / ds.len() as f64)
    } else {
        None
    };
    Ok(Evaluation { loss, accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn dataset_rejects_bad_labels_and_empty() {
        assert!(LabeledDataset::new(vec![0.0, 1.0], vec![0, 2], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![], vec![], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![f64::NAN], vec![0], 1, 2).is_err());
    }

    #[test]
    fn batch_from_singleton_dataset() {
        let ds = LabeledDataset::new(vec![1.0], vec![0], 1, 1).unwrap();
        let mut rng = stream(1, Purpose::Train, 0, 0);
        assert_eq!(sample_batch(&ds, 3, &mut rng).unwrap(), MiniBatch(vec![0, 0, 0]));
    }

    #[test]
    fn batch_sequence_is_reproducible() {
        let ds = LabeledDataset::new((0..20).map(f64::from).collect(), vec![0; 20], 1, 1).unwrap();
        let mut a = stream(5, Purpose::Train, 2, 7);
        let mut b = stream(5, Purpose::Train, 2, 7);
        for _ in 0..10 {
            assert_eq!(sample_batch(&ds, 4, &mut a).unwrap(), sample_batch(&ds, 4, &mut b).unwrap());
        }
    }

    #[test]
    fn batch_index_frequencies_are_uniform() {
        let ds = LabeledDataset::new((0..10).map(f64::from).collect(), vec![0; 10], 1, 1).unwrap();
        let mut rng = stream(11, Purpose::Train, 0, 0);
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for _ in 0..draws {
            for &i in sample_batch(&ds, 1, &mut rng).unwrap().indices() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((0.05..=0.15).contains(&f), "frequency {f}");
        }
    }
}
