//! Streaming weighted iterate average.
//!
//! Tracks `x_bar = sum_{i<tau} eta_i x_i / sum_{i<tau} eta_i` where `tau`
//! maximizes `sum_{i<t} eta_i / eta_t`, using O(d) memory. Ties go to the
//! earliest `t`: the snapshot only moves on a strict improvement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AverageTracker<T: Scalar> {
    /// Observations so far; the next one is step `t`.
    t: u64,
    /// `sum_{i<t} eta_i`
    eta_sum: T,
    /// `sum_{i<t} eta_i x_i`
    weighted: Vector<T>,
    best_ratio: T,
    tau: Option<u64>,
    snapshot: Option<Vector<T>>,
}

impl<T: Scalar> AverageTracker<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            t: 0,
            eta_sum: T::zero(),
            weighted: Vector::zeros(dim),
            best_ratio: T::zero(),
            tau: None,
            snapshot: None,
        }
    }

    /// Records `(x_t, eta_t)`; returns true when `tau` moved to this step.
    pub fn observe(&mut self, x: &Vector<T>, eta: T) -> Result<bool> {
        if x.len() != self.weighted.len() {
            return Err(Error::LengthMismatch {
                expected: self.weighted.len(),
                found: x.len(),
            });
        }
        let improved = self.candidate(eta)?;
        self.eta_sum = self.eta_sum + eta;
        self.weighted.axpy(eta, x)?;
        self.t += 1;
        Ok(improved)
    }

    /// Evaluates the ratio at the current step without accumulating. Used for
    /// the closing candidate `t = T`, whose iterate is never averaged.
    pub fn candidate(&mut self, eta: T) -> Result<bool> {
        if eta <= T::zero() || !eta.is_finite() {
            return Err(Error::NonPositiveStepSize(eta.as_f64()));
        }
        if self.eta_sum == T::zero() {
            return Ok(false);
        }
        let ratio = self.eta_sum / eta;
        if ratio > self.best_ratio {
            self.best_ratio = ratio;
            self.tau = Some(self.t);
            self.snapshot = Some(self.weighted.scale(T::one() / self.eta_sum));
            return Ok(true);
        }
        Ok(false)
    }

    /// Frozen `(tau, x_bar_tau)`.
    pub fn current_average(&self) -> Result<(u64, &Vector<T>)> {
        match (self.tau, &self.snapshot) {
            (Some(tau), Some(x)) => Ok((tau, x)),
            _ => Err(Error::NoAverage),
        }
    }

    pub fn best_ratio(&self) -> T {
        self.best_ratio
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn eta_sum(&self) -> T {
        self.eta_sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64_slice(xs).unwrap()
    }

    #[test]
    fn constant_eta_gives_plain_mean() {
        let mut tr = AverageTracker::new(1);
        for k in 0..10 {
            tr.observe(&v(&[k as f64]), 0.5).unwrap();
        }
        tr.candidate(0.5).unwrap();
        let (tau, xbar) = tr.current_average().unwrap();
        assert_eq!(tau, 10);
        assert!((xbar[0] - 4.5).abs() < 1e-15);
    }

    #[test]
    fn earliest_maximizer_wins() {
        let mut tr = AverageTracker::new(2);
        tr.observe(&v(&[1.0, 2.0]), 1.0).unwrap();
        tr.observe(&v(&[3.0, 4.0]), 1.0).unwrap();
        tr.observe(&v(&[5.0, 6.0]), 2.0).unwrap();
        let (tau, xbar) = tr.current_average().unwrap();
        assert_eq!(tau, 1);
        assert_eq!(xbar, &v(&[1.0, 2.0]));
    }

    #[test]
    fn query_before_candidate_is_error() {
        let mut tr = AverageTracker::new(1);
        assert!(matches!(tr.current_average(), Err(Error::NoAverage)));
        tr.observe(&v(&[1.0]), 1.0).unwrap();
        assert!(matches!(tr.current_average(), Err(Error::NoAverage)));
    }

    #[test]
    fn snapshot_frozen_without_strict_improvement() {
        let mut tr = AverageTracker::new(1);
        tr.observe(&v(&[1.0]), 1.0).unwrap();
        tr.observe(&v(&[2.0]), 1.0).unwrap();
        let before = tr.current_average().unwrap().1.clone();
        // ratio 2/4 < 1
        tr.observe(&v(&[100.0]), 4.0).unwrap();
        tr.observe(&v(&[-50.0]), 100.0).unwrap();
        assert_eq!(tr.current_average().unwrap(), (1, &before));
    }

    #[test]
    fn rejects_nonpositive_eta() {
        let mut tr = AverageTracker::new(1);
        assert!(tr.observe(&v(&[1.0]), 0.0).is_err());
    }
}
