//! Dense vector primitives shared by every aggregation rule.
//!
//! All reductions run in index order, and every multi-vector operation
//! consumes its inputs in the order given, so identical inputs always
//! produce bit-identical outputs.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a vector is treated as zero by direction-based rules.
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// Flat model-sized vector: parameters, local updates, reference directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(data: Vec<f64>) -> Self {
        ParamVector(data)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected,
                got: self.dim(),
            })
        }
    }

    pub fn scaled(&self, k: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|x| k * x).collect())
    }

    pub fn neg(&self) -> ParamVector {
        ParamVector(self.0.iter().map(|x| -x).collect())
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &ParamVector) -> Result<()> {
        other.ensure_dim(self.dim())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        other.ensure_dim(self.dim())?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        other.ensure_dim(self.dim())?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

pub fn dot(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    b.ensure_dim(a.dim())?;
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum())
}

pub fn norm2(a: &ParamVector) -> f64 {
    a.0.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`; zero when either norm is at or
/// below `eps`.
pub fn cosine(a: &ParamVector, b: &ParamVector, eps: f64) -> Result<f64> {
    let ab = dot(a, b)?;
    let na = norm2(a);
    let nb = norm2(b);
    if na <= eps || nb <= eps {
        return Ok(0.0);
    }
    Ok((ab / (na * nb)).clamp(-1.0, 1.0))
}

/// `Σ coeffs[i] * vecs[i]`, accumulated in input order.
pub fn linear_combine(coeffs: &[f64], vecs: &[&ParamVector]) -> Result<ParamVector> {
    if coeffs.len() != vecs.len() {
        return Err(Error::Dimension {
            expected: coeffs.len(),
            got: vecs.len(),
        });
    }
    let Some(first) = vecs.first() else {
        return Err(Error::Protocol("linear_combine over no vectors".into()));
    };
    let mut out = ParamVector::zeros(first.dim());
    for (&k, v) in coeffs.iter().zip(vecs) {
        out.axpy(k, v)?;
    }
    Ok(out)
}

/// Arithmetic mean in canonical (input) order.
pub fn mean(vecs: &[ParamVector]) -> Result<ParamVector> {
    let Some(first) = vecs.first() else {
        return Err(Error::Protocol("mean of an empty upload set".into()));
    };
    let mut sum = ParamVector::zeros(first.dim());
    for v in vecs {
        sum.axpy(1.0, v)?;
    }
    let inv = 1.0 / vecs.len() as f64;
    for x in sum.as_mut_slice() {
        *x *= inv;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dot(&pv(&[1.0, 2.0]), &pv(&[3.0, 4.0])).unwrap(), 11.0);
        let a = pv(&[3.0, 4.0]);
        assert_eq!(dot(&a, &a).unwrap(), 25.0);
        assert!(matches!(
            dot(&pv(&[1.0]), &pv(&[1.0, 2.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm2(&pv(&[0.0, 0.0, 0.0])), 0.0);
        assert_eq!(norm2(&pv(&[3.0, 4.0])), 5.0);
        let a = pv(&[1.5, -2.0, 0.25]);
        assert!((norm2(&a.scaled(3.0)) - 3.0 * norm2(&a)).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let a = pv(&[0.3, -1.2, 4.0]);
        assert!((cosine(&a, &a, ZERO_NORM_EPS).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&a, &a.neg(), ZERO_NORM_EPS).unwrap() + 1.0).abs() < 1e-15);
        let c = cosine(&pv(&[1.0, 0.0]), &pv(&[1.0, 1.0]), ZERO_NORM_EPS).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&pv(&[0.0, 0.0]), &pv(&[1.0, 2.0]), ZERO_NORM_EPS).unwrap(), 0.0);
    }

    #[test]
    fn linear_combine_examples() {
        let a = pv(&[1.0, -2.0]);
        assert_eq!(linear_combine(&[1.0], &[&a]).unwrap(), a);
        let out = linear_combine(&[0.5, 0.5], &[&pv(&[2.0, 0.0]), &pv(&[0.0, 2.0])]).unwrap();
        assert_eq!(out, pv(&[1.0, 1.0]));
        let z = linear_combine(&[1.0, -1.0], &[&a, &a]).unwrap();
        assert_eq!(z, pv(&[0.0, 0.0]));
        assert!(linear_combine(&[1.0, 2.0], &[&a]).is_err());
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, d)
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(a in vec_strategy(6), b in vec_strategy(6), k in 0.01f64..50.0, m in 0.01f64..50.0) {
            let a = ParamVector::new(a);
            let b = ParamVector::new(b);
            prop_assume!(norm2(&a) > 1e-6 && norm2(&b) > 1e-6);
            let base = cosine(&a, &b, ZERO_NORM_EPS).unwrap();
            let scaled = cosine(&a.scaled(k), &b.scaled(m), ZERO_NORM_EPS).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12);
            prop_assert!(base.abs() <= 1.0);
        }

        #[test]
        fn linear_combine_is_bit_deterministic(c in prop::collection::vec(-3.0f64..3.0, 4), vs in prop::collection::vec(vec_strategy(5), 4)) {
            let vs: Vec<ParamVector> = vs.into_iter().map(ParamVector::new).collect();
            let refs: Vec<&ParamVector> = vs.iter().collect();
            let x = linear_combine(&c, &refs).unwrap();
            let y = linear_combine(&c, &refs).unwrap();
            prop_assert_eq!(x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            y.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
