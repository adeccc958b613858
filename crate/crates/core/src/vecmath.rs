//! Dense vector arithmetic shared by the optimizers, problems and diagnostics.
//!
//! All binary operations require equal lengths. Square and square root are
//! entrywise, as is the preconditioned division `num / (delta + s)` that
//! realizes the diagonal preconditioner `H = delta + diag(s)`.

use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fixed-length dense vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct Vector<T: Scalar>(Vec<T>);

impl<T: Scalar> Vector<T> {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self(vec![value; len])
    }

    pub fn from_f64_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Mutable access for in-place kernels. Callers keep entries finite.
    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.as_f64()).collect()
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: T) -> Self {
        Self(self.0.iter().map(|&v| v * k).collect())
    }

    pub fn add_scalar(&self, k: T) -> Self {
        Self(self.0.iter().map(|&v| v + k).collect())
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_len(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum())
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: T, other: &Self) -> Result<()> {
        self.check_len(other)?;
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = *a + k * b;
        }
        Ok(())
    }

    pub fn distance_l2(&self, other: &Self) -> Result<T> {
        self.check_len(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt())
    }

    pub fn distance_linf(&self, other: &Self) -> Result<T> {
        self.check_len(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }

    /// Applies a permutation: `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl<T: Scalar> Deref for Vector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Scalar> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

pub fn elementwise_square<T: Scalar>(v: &Vector<T>) -> Vector<T> {
    Vector(v.0.iter().map(|&x| x * x).collect())
}

pub fn elementwise_sqrt<T: Scalar>(v: &Vector<T>) -> Result<Vector<T>> {
    v.0.iter()
        .enumerate()
        .map(|(index, &x)| {
            if x < T::zero() {
                Err(Error::NegativeEntry {
                    index,
                    value: x.as_f64(),
                })
            } else {
                Ok(x.sqrt())
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Vector)
}

/// `out[i] = num[i] / (delta + s[i])`.
pub fn preconditioned_div<T: Scalar>(
    num: &Vector<T>,
    s: &Vector<T>,
    delta: T,
) -> Result<Vector<T>> {
    num.check_len(s)?;
    num.0
        .iter()
        .zip(&s.0)
        .enumerate()
        .map(|(index, (&n, &si))| {
            let denom = delta + si;
            if denom == T::zero() {
                Err(Error::DivisionByZero { index })
            } else {
                Ok(n / denom)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Vector)
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn l1_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub fn running_max<T: Scalar>(a: &Vector<T>, b: &Vector<T>) -> Result<Vector<T>> {
    a.zip_map(b, |x, y| x.max(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64_slice(xs).unwrap()
    }

    #[test]
    fn square_examples() {
        assert_eq!(elementwise_square(&v(&[3.0, 4.0])), v(&[9.0, 16.0]));
        assert_eq!(elementwise_square(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(elementwise_square(&v(&[-2.0])), v(&[4.0]));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(elementwise_sqrt(&v(&[9.0, 16.0])).unwrap(), v(&[3.0, 4.0]));
        assert_eq!(elementwise_sqrt(&v(&[0.0])).unwrap(), v(&[0.0]));
        let r = elementwise_sqrt(&v(&[2.0])).unwrap();
        assert!((r[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn sqrt_negative_reports_index() {
        match elementwise_sqrt(&v(&[1.0, 4.0, -1.0])) {
            Err(Error::NegativeEntry { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn preconditioned_div_examples() {
        assert_eq!(
            preconditioned_div(&v(&[2.0]), &v(&[2.0]), 0.0).unwrap(),
            v(&[1.0])
        );
        assert_eq!(
            preconditioned_div(&v(&[0.0, 0.0]), &v(&[5.0, 7.0]), 1e-8).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(
            preconditioned_div(&v(&[3.0, 4.0]), &v(&[3.0, 4.0]), 0.0).unwrap(),
            v(&[1.0, 1.0])
        );
    }

    #[test]
    fn preconditioned_div_by_zero() {
        assert!(matches!(
            preconditioned_div(&v(&[1.0, 1.0]), &v(&[1.0, 0.0]), 0.0),
            Err(Error::DivisionByZero { index: 1 })
        ));
    }

    #[test]
    fn norms() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(linf_norm(&[-3.0, 2.0]), 3.0);
        assert_eq!(l1_norm(&[-3.0, 2.0]), 5.0);
    }

    #[test]
    fn running_max_examples() {
        assert_eq!(
            running_max(&v(&[1.0, 5.0]), &v(&[3.0, 2.0])).unwrap(),
            v(&[3.0, 5.0])
        );
        assert_eq!(
            running_max(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(running_max(&v(&[-1.0]), &v(&[-2.0])).unwrap(), v(&[-1.0]));
    }

    #[test]
    fn rejects_nonfinite_and_mismatch() {
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            running_max(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let a = Vector::<f32>::from_f64_slice(&[3.0, 4.0]).unwrap();
        assert_eq!(l2_norm(&a), 5.0f32);
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..32).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e6f64..1e6, n),
                prop::collection::vec(-1e6f64..1e6, n),
            )
        })
    }

    proptest! {
        #[test]
        fn elementwise_ops_preserve_length_and_finiteness((a, b) in pair()) {
            let a = v(&a);
            let b = v(&b);
            let sq = elementwise_square(&a);
            prop_assert_eq!(sq.len(), a.len());
            prop_assert!(sq.is_finite());
            let rt = elementwise_sqrt(&sq).unwrap();
            prop_assert!(rt.is_finite());
            let mx = running_max(&a, &b).unwrap();
            prop_assert_eq!(mx.len(), a.len());
        }

        #[test]
        fn preconditioned_div_bounded_by_delta((g, s) in pair(), delta in 1e-8f64..10.0) {
            let g = v(&g);
            let s = v(&s.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let out = preconditioned_div(&g, &s, delta).unwrap();
            for i in 0..g.len() {
                prop_assert!(out[i].abs() <= g[i].abs() / delta);
            }
        }

        #[test]
        fn running_max_laws((a, b) in pair()) {
            let a = v(&a);
            let b = v(&b);
            let ab = running_max(&a, &b).unwrap();
            prop_assert_eq!(&ab, &running_max(&b, &a).unwrap());
            prop_assert_eq!(&ab, &running_max(&ab, &b).unwrap());
            for i in 0..a.len() {
                prop_assert!(ab[i] >= a[i]);
            }
        }
    }
}
