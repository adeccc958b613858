//! Convergence-guarantee quantities and empirical rate fits.
//!
//! The high-probability bound for the averaged iterate reads
//!
//! ```text
//! f(x_bar_tau) - f(x*) <= C * [ D_tau^2 sqrt(d) |s_tau|_2
//!                               + Dbar_tau eta_0 sqrt(theta |s_tau|^2 + L^2 theta^2) ]
//!                             * log(eta_T / eta_0) / (T eta_0)
//! ```
//!
//! with `D_tau = max_{t<=tau} |x_t - x*|_inf`, `Dbar_tau` the same in the
//! 2-norm, and `theta = log(60 log(6 tau) / delta)`. [`TheoremReport`] carries
//! every factor plus `bound_core`, the bracketed expression without `C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Minimizer, Problem};
use crate::ParamVector;

/// `log(60 log(6t) / delta)`, natural logarithms.
pub fn theta(t: u64, delta_conf: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidConfig("theta requires t >= 1".into()));
    }
    if !(delta_conf > 0.0 && delta_conf <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level delta must lie in (0, 1], got {delta_conf}"
        )));
    }
    Ok((60.0 * (6.0 * t as f64).ln() / delta_conf).ln())
}

/// Quantities frozen at the averaging step `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSnapshot {
    pub tau: u64,
    pub d_tau: Option<f64>,
    pub d_bar_tau: Option<f64>,
    pub s_tau_l2: f64,
    /// `sum_{t<=tau} |g_t|_2^2`
    pub grad_sq_sum: f64,
}

/// Streaming collector for the run-level quantities the report needs.
///
/// Per step `t`: `record_iterate(x_t)`, then after the optimizer step
/// `record_step(g_t, |s_t|, eta_t)`, then `snapshot(t)` if the averaging
/// tracker moved `tau` to `t`.
#[derive(Debug, Clone)]
pub struct TheoremTracker {
    x_star: Option<ParamVector>,
    d_inf: f64,
    d_l2: f64,
    grad_sq_sum: f64,
    s_l2: f64,
    l_hat: f64,
    eta0: f64,
    eta_last: f64,
    steps: u64,
    at_tau: Option<TauSnapshot>,
}

impl TheoremTracker {
    pub fn new(x_star: Option<ParamVector>, eta0: f64) -> Self {
        Self {
            x_star,
            d_inf: 0.0,
            d_l2: 0.0,
            grad_sq_sum: 0.0,
            s_l2: 0.0,
            l_hat: 0.0,
            eta0,
            eta_last: eta0,
            steps: 0,
            at_tau: None,
        }
    }

    pub fn record_iterate(&mut self, x: &ParamVector) -> Result<()> {
        if let Some(xs) = &self.x_star {
            self.d_inf = self.d_inf.max(x.distance_linf(xs)?);
            self.d_l2 = self.d_l2.max(x.distance_l2(xs)?);
        }
        Ok(())
    }

    pub fn record_step(&mut self, g: &ParamVector, s_l2: f64, eta: f64) {
        let gsq: f64 = g.iter().map(|v| v * v).sum();
        self.grad_sq_sum += gsq;
        self.l_hat = self.l_hat.max(gsq.sqrt());
        self.s_l2 = s_l2;
        self.eta_last = eta;
    }

    /// Marks the end of the run at horizon `total_steps`.
    pub fn set_horizon(&mut self, total_steps: u64) {
        self.steps = total_steps;
    }

    pub fn snapshot(&mut self, tau: u64) {
        let known = self.x_star.is_some();
        self.at_tau = Some(TauSnapshot {
            tau,
            d_tau: known.then_some(self.d_inf),
            d_bar_tau: known.then_some(self.d_l2),
            s_tau_l2: self.s_l2,
            grad_sq_sum: self.grad_sq_sum,
        });
    }

    pub fn at_tau(&self) -> Option<&TauSnapshot> {
        self.at_tau.as_ref()
    }

    pub fn l_hat(&self) -> f64 {
        self.l_hat
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn eta_last(&self) -> f64 {
        self.eta_last
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub tau: u64,
    pub total_steps: u64,
    pub d_tau: Option<f64>,
    pub d_bar_tau: Option<f64>,
    pub s_tau_l2: f64,
    pub grad_sq_sum_tau: f64,
    pub theta: f64,
    pub delta_conf: f64,
    pub l_hat: f64,
    /// Analytic global gradient bound, when the problem has one.
    pub g_analytic: Option<f64>,
    pub eta0: f64,
    pub eta_t: f64,
    pub log_eta_ratio: f64,
    pub gap: Option<f64>,
    pub bound_core: Option<f64>,
    /// Set when no minimizer is available and the distance terms are absent.
    pub minimizer_missing: bool,
}

impl TheoremReport {
    /// `gap / bound_core`, when both are defined and the bound is positive.
    pub fn gap_ratio(&self) -> Option<f64> {
        match (self.gap, self.bound_core) {
            (Some(g), Some(b)) if b > 0.0 => Some(g / b),
            _ => None,
        }
    }
}

/// The bracketed bound expression without its universal constant.
#[allow(clippy::too_many_arguments)]
pub fn bound_core(
    d_tau: f64,
    d_bar_tau: f64,
    dim: usize,
    s_tau_l2: f64,
    theta: f64,
    l: f64,
    eta0: f64,
    eta_t: f64,
    total_steps: u64,
) -> f64 {
    let first = d_tau * d_tau * (dim as f64).sqrt() * s_tau_l2;
    let second = d_bar_tau * eta0 * (theta * s_tau_l2 * s_tau_l2 + l * l * theta * theta).sqrt();
    (first + second) / (total_steps as f64 * eta0) * (eta_t / eta0).ln()
}

/// Builds the report from the streamed quantities and the averaged iterate.
pub fn theorem_report(
    tracker: &TheoremTracker,
    problem: &Problem,
    minimizer: Option<&Minimizer>,
    x_bar: &ParamVector,
    delta_conf: f64,
) -> Result<TheoremReport> {
    let snap = tracker.at_tau().ok_or(Error::NoAverage)?;
    let th = theta(snap.tau.max(1), delta_conf)?;
    let eta0 = tracker.eta0();
    let eta_t = tracker.eta_last();
    let gap = match minimizer {
        Some(m) => Some(problem.loss(x_bar)? - m.f_star),
        None => None,
    };
    let bound = match (snap.d_tau, snap.d_bar_tau) {
        (Some(d), Some(db)) => Some(bound_core(
            d,
            db,
            problem.dim(),
            snap.s_tau_l2,
            th,
            tracker.l_hat(),
            eta0,
            eta_t,
            tracker.steps(),
        )),
        _ => None,
    };
    Ok(TheoremReport {
        tau: snap.tau,
        total_steps: tracker.steps(),
        d_tau: snap.d_tau,
        d_bar_tau: snap.d_bar_tau,
        s_tau_l2: snap.s_tau_l2,
        grad_sq_sum_tau: snap.grad_sq_sum,
        theta: th,
        delta_conf,
        l_hat: tracker.l_hat(),
        g_analytic: problem.gradient_bound(),
        eta0,
        eta_t,
        log_eta_ratio: (eta_t / eta0).ln(),
        gap,
        bound_core: bound,
        minimizer_missing: minimizer.is_none(),
    })
}

/// Least-squares line through `(log T, log gap)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(u64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// `-slope - 1/2`: excess over the `T^{-1/2}` rate.
    pub alpha_hat: f64,
}

pub fn rate_fit(points: &[(u64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::RateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) || points[0].0 == 0 {
        return Err(Error::RateFit(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    if let Some(&(t, gap)) = points.iter().find(|p| p.1 <= 0.0 || !p.1.is_finite()) {
        return Err(Error::RateFit(format!(
            "gap at T = {t} must be positive, got {gap}"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        alpha_hat: -slope - 0.5,
    })
}
