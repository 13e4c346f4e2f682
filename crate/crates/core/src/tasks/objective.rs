use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::vecmath::ParamVector;

/// A per-sample differentiable loss. Batch losses and gradients are means
/// over the batch.
pub trait Objective: Send + Sync + Debug {
    /// Number of model parameters.
    fn dim(&self) -> usize;

    /// Expected feature width of the dataset rows.
    fn input_dim(&self) -> usize;

    /// Loss of one sample; when `grad` is given, the sample gradient is
    /// added into it.
    fn accumulate(&self, theta: &[f64], x: &[f64], label: usize, grad: Option<&mut [f64]>) -> f64;

    /// Predicted class, for classifiers.
    fn predict(&self, _theta: &ParamVector, _x: &[f64]) -> Option<usize> {
        None
    }

    fn is_classifier(&self) -> bool {
        false
    }

    fn init_params(&self, _rng: &mut dyn rand::RngCore) -> ParamVector {
        ParamVector::zeros(self.dim())
    }

    fn check(&self, theta: &ParamVector, ds: &LabeledDataset) -> Result<()> {
        theta.ensure_dim(self.dim())?;
        if ds.input_dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: ds.input_dim(),
            });
        }
        Ok(())
    }

    fn loss(&self, theta: &ParamVector, ds: &LabeledDataset, batch: &[usize]) -> Result<f64> {
        self.check(theta, ds)?;
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let total: f64 = batch
            .iter()
            .map(|&i| self.accumulate(theta.as_slice(), ds.row(i), ds.label(i), None))
            .sum();
        Ok(total / batch.len() as f64)
    }

    fn grad(&self, theta: &ParamVector, ds: &LabeledDataset, batch: &[usize]) -> Result<ParamVector> {
        self.loss_and_grad(theta, ds, batch).map(|(_, g)| g)
    }

    fn loss_and_grad(&self, theta: &ParamVector, ds: &LabeledDataset, batch: &[usize]) -> Result<(f64, ParamVector)> {
        self.check(theta, ds)?;
        if batch.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let mut g = vec![0.0; self.dim()];
        let mut total = 0.0;
        for &i in batch {
            total += self.accumulate(theta.as_slice(), ds.row(i), ds.label(i), Some(&mut g));
        }
        let inv = 1.0 / batch.len() as f64;
        for v in &mut g {
            *v *= inv;
        }
        Ok((total * inv, ParamVector::new(g)))
    }
}

/// `F(θ; ξ) = ½ (θ-θ*)ᵀ diag(a) (θ-θ*) + ⟨ξ, θ-θ*⟩`.
///
/// Dataset rows hold the noise vectors ξ. With zero-mean rows the
/// full-dataset objective is exactly the quadratic with minimum 0 at θ*.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousQuadratic {
    pub curvature: Vec<f64>,
    pub optimum: ParamVector,
}

impl HeterogeneousQuadratic {
    pub fn new(curvature: Vec<f64>, optimum: ParamVector) -> Result<Self> {
        optimum.ensure_dim(curvature.len())?;
        if curvature.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::config("curvature", "entries must be positive and finite"));
        }
        Ok(HeterogeneousQuadratic { curvature, optimum })
    }

    /// Exact gradient of the noise-free quadratic.
    pub fn exact_grad(&self, theta: &ParamVector) -> ParamVector {
        ParamVector::new(
            self.curvature
                .iter()
                .zip(theta.iter().zip(self.optimum.iter()))
                .map(|(a, (t, o))| a * (t - o))
                .collect(),
        )
    }

    /// Minimizer of the average of several quadratics, and the average
    /// objective value there.
    pub fn average_optimum(parts: &[HeterogeneousQuadratic]) -> Result<(ParamVector, f64)> {
        let Some(first) = parts.first() else {
            return Err(Error::Protocol("no quadratics to average".into()));
        };
        let d = first.curvature.len();
        let mut opt = vec![0.0; d];
        for (j, o) in opt.iter_mut().enumerate() {
            let num: f64 = parts.iter().map(|q| q.curvature[j] * q.optimum[j]).sum();
            let den: f64 = parts.iter().map(|q| q.curvature[j]).sum();
            *o = num / den;
        }
        let opt = ParamVector::new(opt);
        let value = parts.iter().map(|q| q.value(&opt)).sum::<f64>() / parts.len() as f64;
        Ok((opt, value))
    }

    /// Noise-free objective value.
    pub fn value(&self, theta: &ParamVector) -> f64 {
        self.curvature
            .iter()
            .zip(theta.iter().zip(self.optimum.iter()))
            .map(|(a, (t, o))| 0.5 * a * (t - o) * (t - o))
            .sum()
    }
}

impl Objective for HeterogeneousQuadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn input_dim(&self) -> usize {
        self.curvature.len()
    }

    fn accumulate(&self, theta: &[f64], x: &[f64], _label: usize, grad: Option<&mut [f64]>) -> f64 {
        let mut loss = 0.0;
        match grad {
            Some(g) => {
                for j in 0..theta.len() {
                    let diff = theta[j] - self.optimum[j];
                    loss += 0.5 * self.curvature[j] * diff * diff + x[j] * diff;
                    g[j] += self.curvature[j] * diff + x[j];
                }
            }
            None => {
                for j in 0..theta.len() {
                    let diff = theta[j] - self.optimum[j];
                    loss += 0.5 * self.curvature[j] * diff * diff + x[j] * diff;
                }
            }
        }
        loss
    }
}

/// Softmax over `logits` in place; returns log-sum-exp.
fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
    max + sum.ln()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Linear softmax classifier with cross-entropy loss.
///
/// Layout: weights `W[k][j]` at `k * input_dim + j`, then one bias per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultinomialLogistic {
    pub input_dim: usize,
    pub classes: usize,
}

impl MultinomialLogistic {
    fn logits(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let (d, l) = (self.input_dim, self.classes);
        (0..l)
            .map(|k| {
                let w = &theta[k * d..(k + 1) * d];
                w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + theta[l * d + k]
            })
            .collect()
    }
}

impl Objective for MultinomialLogistic {
    fn dim(&self) -> usize {
        self.classes * (self.input_dim + 1)
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn accumulate(&self, theta: &[f64], x: &[f64], label: usize, grad: Option<&mut [f64]>) -> f64 {
        let (d, l) = (self.input_dim, self.classes);
        let mut z = self.logits(theta, x);
        let target = z[label];
        let lse = softmax_in_place(&mut z);
        if let Some(g) = grad {
            for k in 0..l {
                let dz = z[k] - if k == label { 1.0 } else { 0.0 };
                for j in 0..d {
                    g[k * d + j] += dz * x[j];
                }
                g[l * d + k] += dz;
            }
        }
        lse - target
    }

    fn predict(&self, theta: &ParamVector, x: &[f64]) -> Option<usize> {
        Some(argmax(&self.logits(theta.as_slice(), x)))
    }

    fn is_classifier(&self) -> bool {
        true
    }
}

/// One hidden tanh layer followed by a softmax output.
///
/// Layout: `W1` (hidden × input), `b1`, `W2` (classes × hidden), `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyMlp {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl TinyMlp {
    pub const DEFAULT_HIDDEN: usize = 16;

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.classes * self.hidden;
        (w1, b1, w2)
    }

    fn forward(&self, theta: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, h, l) = (self.input_dim, self.hidden, self.classes);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let act: Vec<f64> = (0..h)
            .map(|i| {
                let w = &theta[i * d..(i + 1) * d];
                (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + theta[o_b1 + i]).tanh()
            })
            .collect();
        let logits = (0..l)
            .map(|k| {
                let w = &theta[o_w2 + k * h..o_w2 + (k + 1) * h];
                w.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>() + theta[o_b2 + k]
            })
            .collect();
        (act, logits)
    }
}

impl Objective for TinyMlp {
    fn dim(&self) -> usize {
        self.hidden * self.input_dim + self.hidden + self.classes * self.hidden + self.classes
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn accumulate(&self, theta: &[f64], x: &[f64], label: usize, grad: Option<&mut [f64]>) -> f64 {
        let (d, h, l) = (self.input_dim, self.hidden, self.classes);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let (act, mut z) = self.forward(theta, x);
        let target = z[label];
        let lse = softmax_in_place(&mut z);
        if let Some(g) = grad {
            let mut d_act = vec![0.0; h];
            for k in 0..l {
                let dz = z[k] - if k == label { 1.0 } else { 0.0 };
                for i in 0..h {
                    g[o_w2 + k * h + i] += dz * act[i];
                    d_act[i] += dz * theta[o_w2 + k * h + i];
                }
                g[o_b2 + k] += dz;
            }
            for i in 0..h {
                let d_pre = d_act[i] * (1.0 - act[i] * act[i]);
                for j in 0..d {
                    g[i * d + j] += d_pre * x[j];
                }
                g[o_b1 + i] += d_pre;
            }
        }
        lse - target
    }

    fn predict(&self, theta: &ParamVector, x: &[f64]) -> Option<usize> {
        Some(argmax(&self.forward(theta.as_slice(), x).1))
    }

    fn is_classifier(&self) -> bool {
        true
    }

    fn init_params(&self, rng: &mut dyn rand::RngCore) -> ParamVector {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let w1 = Normal::new(0.0, (1.0 / self.input_dim as f64).sqrt()).expect("valid std");
        let w2 = Normal::new(0.0, (1.0 / self.hidden as f64).sqrt()).expect("valid std");
        let mut theta = vec![0.0; self.dim()];
        for v in &mut theta[..o_b1] {
            *v = w1.sample(rng);
        }
        for v in &mut theta[o_w2..o_b2] {
            *v = w2.sample(rng);
        }
        ParamVector::new(theta)
    }
}

/// Central finite-difference gradient of the batch loss.
pub(crate) fn finite_difference_grad(
    obj: &dyn Objective,
    theta: &ParamVector,
    ds: &LabeledDataset,
    batch: &[usize],
    step: f64,
) -> Result<ParamVector> {
    let mut out = vec![0.0; theta.dim()];
    let mut probe = theta.clone();
    for (j, o) in out.iter_mut().enumerate() {
        let orig = probe[j];
        probe[j] = orig + step;
        let up = obj.loss(&probe, ds, batch)?;
        probe[j] = orig - step;
        let down = obj.loss(&probe, ds, batch)?;
        probe[j] = orig;
        *o = (up - down) / (2.0 * step);
    }
    Ok(ParamVector::new(out))
}

/// Random parameter vector for gradient probes.
pub(crate) fn random_point<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> ParamVector {
    ParamVector::new((0..dim).map(|_| rng.random_range(-scale..scale)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::tasks::{evaluate, make_synthetic_classification, sample_batch};
    use crate::vecmath::norm2;

    fn relative_error(a: &ParamVector, b: &ParamVector) -> f64 {
        let diff = norm2(&a.sub(b).unwrap());
        diff / norm2(a).max(norm2(b)).max(1e-12)
    }

    fn gradient_check(obj: &dyn Objective, ds: &LabeledDataset, scale: f64) {
        let mut rng = stream(3, Purpose::Init, 0, 0);
        for _ in 0..20 {
            let theta = random_point(obj.dim(), scale, &mut rng);
            let batch = sample_batch(ds, 8, &mut rng).unwrap();
            let g = obj.grad(&theta, ds, batch.indices()).unwrap();
            let fd = finite_difference_grad(obj, &theta, ds, batch.indices(), 1e-5).unwrap();
            let err = relative_error(&g, &fd);
            assert!(err <= 1e-5, "relative error {err}");
        }
    }

    fn classification() -> LabeledDataset {
        make_synthetic_classification(60, 4, 3, 2.0, 17).unwrap()
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        gradient_check(&MultinomialLogistic { input_dim: 4, classes: 3 }, &classification(), 1.0);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        gradient_check(&TinyMlp { input_dim: 4, hidden: 16, classes: 3 }, &classification(), 1.0);
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences() {
        let q = HeterogeneousQuadratic::new(vec![0.5, 1.0, 2.0], ParamVector::new(vec![1.0, -1.0, 0.5])).unwrap();
        let mut rng = stream(4, Purpose::Data, 0, 0);
        let ds = crate::tasks::make_quadratic_samples(3, 30, 0.3, &mut rng).unwrap();
        gradient_check(&q, &ds, 3.0);
    }

    #[test]
    fn full_gradient_is_mean_of_sample_gradients() {
        let ds = classification();
        let obj = TinyMlp { input_dim: 4, hidden: 5, classes: 3 };
        let mut rng = stream(8, Purpose::Init, 0, 0);
        let theta = obj.init_params(&mut rng);
        let all: Vec<usize> = (0..ds.len()).collect();
        let full = obj.grad(&theta, &ds, &all).unwrap();
        let mut mean = ParamVector::zeros(obj.dim());
        for i in 0..ds.len() {
            mean.axpy(1.0 / ds.len() as f64, &obj.grad(&theta, &ds, &[i]).unwrap()).unwrap();
        }
        assert!(norm2(&full.sub(&mean).unwrap()) < 1e-10);
    }

    #[test]
    fn quadratic_loss_vanishes_at_optimum() {
        let opt = ParamVector::new(vec![0.2, -0.7]);
        let q = HeterogeneousQuadratic::new(vec![1.0, 3.0], opt.clone()).unwrap();
        let mut rng = stream(4, Purpose::Data, 0, 0);
        let ds = crate::tasks::make_quadratic_samples(2, 25, 1.0, &mut rng).unwrap();
        let e = evaluate(&q, &opt, &ds).unwrap();
        assert!(e.loss.abs() < 1e-15);
        assert_eq!(e.accuracy, None);
        let all: Vec<usize> = (0..ds.len()).collect();
        let theta = ParamVector::new(vec![1.0, 1.0]);
        let g = q.grad(&theta, &ds, &all).unwrap();
        assert!(norm2(&g.sub(&q.exact_grad(&theta)).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_logistic_weights_give_log_class_count() {
        let ds = classification();
        let obj = MultinomialLogistic { input_dim: 4, classes: 3 };
        let e = evaluate(&obj, &ParamVector::zeros(obj.dim()), &ds).unwrap();
        assert!((e.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictor_has_unit_accuracy() {
        // One-hot features: weights equal to the identity classify exactly.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..9 {
            let k = i % 3;
            let mut row = vec![0.0; 3];
            row[k] = 1.0;
            features.extend(row);
            labels.push(k);
        }
        let ds = LabeledDataset::new(features, labels, 3, 3).unwrap();
        let obj = MultinomialLogistic { input_dim: 3, classes: 3 };
        let mut theta = ParamVector::zeros(obj.dim());
        for k in 0..3 {
            theta[k * 3 + k] = 5.0;
        }
        assert_eq!(evaluate(&obj, &theta, &ds).unwrap().accuracy, Some(1.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = classification();
        let obj = MultinomialLogistic { input_dim: 4, classes: 3 };
        assert!(matches!(
            obj.loss(&ParamVector::zeros(3), &ds, &[0]),
            Err(Error::Dimension { .. })
        ));
        let wrong = MultinomialLogistic { input_dim: 5, classes: 3 };
        assert!(wrong.loss(&ParamVector::zeros(wrong.dim()), &ds, &[0]).is_err());
    }
}
