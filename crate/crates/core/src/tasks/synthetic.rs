use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SERVER};

/// Gaussian class clusters with unit within-class variance.
///
/// Class means sit on random directions at radius `separation / √2`, so
/// two means are on average `separation` apart. Labels cycle through the
/// classes, giving balanced class counts.
pub fn make_synthetic_classification(
    n: usize,
    input_dim: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::config("classes", "need at least 2 classes"));
    }
    if n < classes {
        return Err(Error::config("samples", "need at least one sample per class"));
    }
    if input_dim == 0 {
        return Err(Error::config("features", "must be at least 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::config("separation", "must be finite and non-negative"));
    }
    let mut rng = stream(seed, Purpose::Data, SERVER, 0);
    let radius = separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let dir: Vec<f64> = (0..input_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            dir.into_iter().map(|x| radius * x / norm).collect()
        })
        .collect();
    let mut features = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % classes;
        for mu in &means[k] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(mu + z);
        }
        labels.push(k);
    }
    LabeledDataset::new(features, labels, input_dim, classes)
}

/// Noise rows for [`super::HeterogeneousQuadratic`], centered so their
/// mean is exactly zero per coordinate.
pub fn make_quadratic_samples<R: Rng + ?Sized>(
    dim: usize,
    n: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if n == 0 || dim == 0 {
        return Err(Error::config("samples_per_worker", "must be at least 1"));
    }
    let normal = Normal::new(0.0, noise_std).map_err(|e| Error::config("noise_std", e.to_string()))?;
    let mut rows: Vec<f64> = (0..n * dim).map(|_| normal.sample(rng)).collect();
    for j in 0..dim {
        let mean = (0..n).map(|i| rows[i * dim + j]).sum::<f64>() / n as f64;
        for i in 0..n {
            rows[i * dim + j] -= mean;
        }
    }
    LabeledDataset::new(rows, vec![0; n], dim, 1)
}

/// Shuffled split into (train, test) with `round(n * test_fraction)` test
/// rows. A zero fraction evaluates on the training rows themselves.
pub fn train_test_split<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::config("test_fraction", "must lie in [0, 1)"));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(rng);
    let n_test = ((ds.len() as f64) * test_fraction).round() as usize;
    let n_test = n_test.min(ds.len() - 1);
    let (test, train) = idx.split_at(n_test);
    let test = if test.is_empty() {
        ds.subset(train)?
    } else {
        ds.subset(test)?
    };
    Ok((ds.subset(train)?, test))
}

/// Draw up to `size` rows in equal per-class proportions.
pub fn class_balanced_sample<R: Rng + ?Sized>(
    ds: &LabeledDataset,
    size: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if size == 0 {
        return Err(Error::config("root_size", "root dataset must be non-empty"));
    }
    let classes = ds.classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut picked = Vec::with_capacity(size);
    for (k, members) in by_class.iter_mut().enumerate() {
        members.shuffle(rng);
        // Spread the remainder over the first classes.
        let quota = size / classes + usize::from(k < size % classes);
        picked.extend(members.iter().take(quota));
    }
    picked.sort_unstable();
    ds.subset(&picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{evaluate, MultinomialLogistic, Objective};
    use crate::vecmath::ParamVector;

    /// Full-batch gradient descent, used as the reference trainer.
    fn train_logistic(ds: &LabeledDataset, steps: usize, lr: f64) -> (MultinomialLogistic, ParamVector) {
        let obj = MultinomialLogistic {
            input_dim: ds.input_dim(),
            classes: ds.classes(),
        };
        let all: Vec<usize> = (0..ds.len()).collect();
        let mut theta = ParamVector::zeros(obj.dim());
        for _ in 0..steps {
            let g = obj.grad(&theta, ds, &all).unwrap();
            theta.axpy(-lr, &g).unwrap();
        }
        (obj, theta)
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_synthetic_classification(100, 3, 2, 1.0, 7).unwrap();
        let b = make_synthetic_classification(100, 3, 2, 1.0, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_synthetic_classification(100, 3, 2, 1.0, 8).unwrap());
    }

    #[test]
    fn rejects_invalid_counts() {
        assert!(make_synthetic_classification(1, 2, 2, 1.0, 0).is_err());
        assert!(make_synthetic_classification(10, 0, 2, 1.0, 0).is_err());
        assert!(make_synthetic_classification(10, 2, 1, 1.0, 0).is_err());
    }

    #[test]
    fn no_separation_gives_chance_accuracy() {
        let ds = make_synthetic_classification(2000, 5, 2, 0.0, 3).unwrap();
        let (obj, theta) = train_logistic(&ds, 200, 0.5);
        let acc = evaluate(&obj, &theta, &ds).unwrap().accuracy.unwrap();
        assert!((acc - 0.5).abs() <= 0.1, "accuracy {acc}");
    }

    #[test]
    fn wide_separation_is_linearly_separable() {
        let ds = make_synthetic_classification(2000, 5, 2, 10.0, 3).unwrap();
        let (obj, theta) = train_logistic(&ds, 200, 0.5);
        let acc = evaluate(&obj, &theta, &ds).unwrap().accuracy.unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn quadratic_samples_are_centered() {
        let mut rng = stream(1, Purpose::Data, 0, 0);
        let ds = make_quadratic_samples(3, 17, 2.0, &mut rng).unwrap();
        for j in 0..3 {
            let m: f64 = (0..17).map(|i| ds.row(i)[j]).sum::<f64>() / 17.0;
            assert!(m.abs() < 1e-14);
        }
    }

    #[test]
    fn balanced_sample_has_equal_class_shares() {
        let ds = make_synthetic_classification(1000, 2, 4, 1.0, 1).unwrap();
        let mut rng = stream(1, Purpose::RootSample, 0, 0);
        let root = class_balanced_sample(&ds, 100, &mut rng).unwrap();
        assert_eq!(root.class_counts(), vec![25, 25, 25, 25]);
    }

    #[test]
    fn split_sizes() {
        let ds = make_synthetic_classification(100, 2, 2, 1.0, 1).unwrap();
        let mut rng = stream(1, Purpose::Split, 0, 0);
        let (train, test) = train_test_split(&ds, 0.2, &mut rng).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
    }
}
