use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SERVER};

const MAX_REDRAWS: usize = 1000;

fn dirichlet<R: Rng + ?Sized>(beta: f64, m: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(beta, 1.0).expect("beta validated positive");
    loop {
        let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        // Tiny beta can underflow every component.
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Split sample indices over `workers` parts: for every class, the
/// shares come from one Dirichlet(beta) draw over the workers. The whole
/// draw is repeated until no part is empty.
pub fn dirichlet_partition_indices<R: Rng + ?Sized>(
    labels: &[usize],
    classes: usize,
    workers: usize,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if workers == 0 {
        return Err(Error::config("workers", "must be at least 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::config("beta", "must be positive"));
    }
    if labels.len() < workers {
        return Err(Error::Partition(format!(
            "{} samples cannot fill {workers} workers",
            labels.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for _ in 0..MAX_REDRAWS {
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); workers];
        for members in &by_class {
            if members.is_empty() {
                continue;
            }
            let mut members = members.clone();
            members.shuffle(rng);
            let shares = dirichlet(beta, workers, rng);
            let n = members.len();
            let mut start = 0;
            let mut cumulative = 0.0;
            for (j, share) in shares.iter().enumerate() {
                cumulative += share;
                let end = if j + 1 == workers {
                    n
                } else {
                    ((cumulative * n as f64) as usize).min(n)
                };
                let end = end.max(start);
                parts[j].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if parts.iter().all(|p| !p.is_empty()) {
            for p in &mut parts {
                p.sort_unstable();
            }
            return Ok(parts);
        }
    }
    Err(Error::Partition(format!(
        "no partition without empty workers after {MAX_REDRAWS} draws (workers={workers}, beta={beta})"
    )))
}

pub fn dirichlet_partition(
    ds: &LabeledDataset,
    workers: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    let mut rng = stream(seed, Purpose::Partition, SERVER, 0);
    dirichlet_partition_indices(ds.labels(), ds.classes(), workers, beta, &mut rng)?
        .iter()
        .map(|idx| ds.subset(idx))
        .collect()
}

/// Shannon entropy (nats) of a dataset's label distribution.
pub fn label_entropy(ds: &LabeledDataset) -> f64 {
    let n = ds.len() as f64;
    ds.class_counts()
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::make_synthetic_classification;
    use proptest::prelude::*;

    #[test]
    fn single_worker_gets_everything() {
        let ds = make_synthetic_classification(50, 2, 3, 1.0, 1).unwrap();
        let parts = dirichlet_partition(&ds, 1, 0.5, 9).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], ds);
    }

    #[test]
    fn small_beta_is_more_skewed() {
        let mean_entropy = |beta: f64| {
            let mut total = 0.0;
            for seed in 0..5 {
                let ds = make_synthetic_classification(2000, 2, 10, 1.0, seed).unwrap();
                let parts = dirichlet_partition(&ds, 10, beta, seed).unwrap();
                total += parts.iter().map(label_entropy).sum::<f64>() / parts.len() as f64;
            }
            total / 5.0
        };
        let skewed = mean_entropy(0.1);
        let mixed = mean_entropy(100.0);
        assert!(skewed < mixed, "{skewed} vs {mixed}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let labels = vec![0, 1, 0, 1];
        let mut rng = stream(0, Purpose::Partition, 0, 0);
        assert!(dirichlet_partition_indices(&labels, 2, 0, 1.0, &mut rng).is_err());
        assert!(dirichlet_partition_indices(&labels, 2, 2, 0.0, &mut rng).is_err());
        assert!(matches!(
            dirichlet_partition_indices(&labels, 2, 5, 1.0, &mut rng),
            Err(Error::Partition(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn partition_is_an_exact_cover(n in 20usize..300, classes in 2usize..6, workers in 1usize..8,
                                       beta in prop::sample::select(vec![0.1, 0.5, 1.0, 10.0]), seed in 0u64..1000) {
            let labels: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % classes).collect();
            let mut rng = stream(seed, Purpose::Partition, 0, 0);
            match dirichlet_partition_indices(&labels, classes, workers, beta, &mut rng) {
                Ok(parts) => {
                    let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                    prop_assert!(parts.iter().all(|p| !p.is_empty()));
                }
                Err(Error::Partition(_)) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
