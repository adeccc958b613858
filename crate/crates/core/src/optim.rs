//! Optimizer kernels.
//!
//! The parameter-free methods (AdaGrad++, Adam++ in both second-moment
//! variants, AdamW++) share one step-size recursion:
//!
//! ```text
//! r_t   = ||x_t - x_0||_2 / sqrt(d)
//! eta_t = max(eta_{t-1}, c * r_t),   eta_{-1} = eps
//! x_{t+1} = x_t - lr_mult * eta_t * num_t / (delta + s_t)
//! ```
//!
//! where `num_t` is the gradient (AdaGrad++) or the first moment (Adam++),
//! and `s_t` is either the root of the cumulative squared gradients or
//! `sqrt((t + 1) * max_{k<=t} v_k)` for the EMA second moment. The schedule
//! multiplier `lr_mult` scales the applied step only; the recursion always
//! sees the raw distance.
//!
//! Baselines (SGD, AdaGrad, AdaGrad-Norm, DoG, Adam, AdamW) live alongside
//! and reuse the same state type.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{l2_norm, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    AdagradPp,
    AdamPpCase1,
    AdamPpCase2,
    AdamwPp,
    Sgd,
    Adagrad,
    AdagradNorm,
    Dog,
    Adam,
    Adamw,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::AdagradPp,
        Algorithm::AdamPpCase1,
        Algorithm::AdamPpCase2,
        Algorithm::AdamwPp,
        Algorithm::Sgd,
        Algorithm::Adagrad,
        Algorithm::AdagradNorm,
        Algorithm::Dog,
        Algorithm::Adam,
        Algorithm::Adamw,
    ];

    /// The `++` family: step size driven by distance from `x_0`.
    pub fn is_parameter_free(self) -> bool {
        matches!(
            self,
            Algorithm::AdagradPp
                | Algorithm::AdamPpCase1
                | Algorithm::AdamPpCase2
                | Algorithm::AdamwPp
        )
    }

    /// Baselines that need a tuned `lr`.
    pub fn needs_lr(self) -> bool {
        matches!(
            self,
            Algorithm::Sgd
                | Algorithm::Adagrad
                | Algorithm::AdagradNorm
                | Algorithm::Adam
                | Algorithm::Adamw
        )
    }
}

/// Second-moment variant of Adam++.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdamPpCase {
    /// Cumulative second moment, as in AdaGrad.
    Case1,
    /// EMA second moment scaled by `sqrt(t + 1)`.
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eta0Rule {
    Absolute,
    /// `eps = eta0 * (1 + ||x_0||_2^2)`
    ScaledByInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    None,
    /// `weight_decay * x` added to the gradient.
    Coupled,
    /// `x -= lr_mult * rate * weight_decay * x_old`, applied after the step.
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound = "")]
pub struct OptimizerConfig<T: Scalar> {
    pub algorithm: Algorithm,
    pub eta0: T,
    pub eta0_rule: Eta0Rule,
    pub delta: T,
    pub beta1: T,
    pub beta2: T,
    pub lambda: T,
    pub base_factor: T,
    pub lr: Option<T>,
    pub weight_decay: T,
    pub decay_mode: DecayMode,
    /// Case 2 running max of `v`. Off gives `s = sqrt((t + 1) * v)`.
    pub amsgrad_max: bool,
    /// Bias correction for the Adam/AdamW baselines.
    pub bias_correction: bool,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AdagradPp,
            eta0: T::lit(1e-6),
            eta0_rule: Eta0Rule::ScaledByInit,
            delta: T::lit(1e-8),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            lambda: T::one(),
            base_factor: T::one(),
            lr: None,
            weight_decay: T::zero(),
            decay_mode: DecayMode::None,
            amsgrad_max: true,
            bias_correction: true,
        }
    }
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn with_lr(mut self, lr: T) -> Self {
        self.lr = Some(lr);
        self
    }

    /// Checks hard constraints and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.eta0 <= T::zero() || !self.eta0.is_finite() {
            return Err(Error::NonPositiveStepSize(self.eta0.as_f64()));
        }
        if self.delta < T::zero() || !self.delta.is_finite() {
            return bad("delta must be nonnegative");
        }
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !unit(self.beta1) || !unit(self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.lambda > T::zero() && self.lambda <= T::one()) {
            return bad("lambda must lie in (0, 1]");
        }
        if self.base_factor <= T::zero() || !self.base_factor.is_finite() {
            return bad("base_factor must be positive");
        }
        if self.weight_decay < T::zero() {
            return bad("weight_decay must be nonnegative");
        }
        if self.algorithm.needs_lr() {
            match self.lr {
                None => return Err(Error::MissingLearningRate(self.algorithm)),
                Some(lr) if lr <= T::zero() || !lr.is_finite() => {
                    return Err(Error::NonPositiveStepSize(lr.as_f64()))
                }
                Some(_) => {}
            }
        }
        let mut warnings = Vec::new();
        if matches!(
            self.algorithm,
            Algorithm::AdamPpCase1 | Algorithm::AdamPpCase2 | Algorithm::AdamwPp
        ) && self.beta1 >= self.beta2.sqrt()
        {
            warnings.push(format!(
                "beta1 = {} >= sqrt(beta2) = {}: outside the convergence guarantee",
                self.beta1,
                self.beta2.sqrt()
            ));
        }
        if self.delta == T::zero() {
            warnings
                .push("delta = 0: the first gradient must be nonzero in every coordinate".into());
        }
        Ok(warnings)
    }

    /// Decay mode after accounting for the AdamW variants, which always decouple.
    pub fn effective_decay_mode(&self) -> DecayMode {
        match self.algorithm {
            Algorithm::Adamw | Algorithm::AdamwPp => DecayMode::Decoupled,
            _ => self.decay_mode,
        }
    }
}

/// Mutable per-run optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizerState<T: Scalar> {
    /// Steps taken so far.
    pub t: u64,
    pub x: Vector<T>,
    pub x0: Vector<T>,
    /// Effective initial step scale after the `eta0_rule`.
    pub eps: T,
    /// Current step scale. For DoG this is the distance numerator; for tuned
    /// baselines it is `lr`.
    pub eta: T,
    /// Last raw normalized distance `||x_t - x_0||_2 / sqrt(d)`.
    pub r: T,
    /// Last first-moment coefficient used by Adam++.
    pub beta1_t: T,
    /// Cumulative sum of squared gradients (entrywise).
    pub grad_sq_sum: Vector<T>,
    /// Current preconditioner diagonal.
    pub s: Vector<T>,
    pub m: Vector<T>,
    pub v: Vector<T>,
    pub v_max: Vector<T>,
    /// Cumulative sum of squared gradient norms (DoG, AdaGrad-Norm).
    pub grad_norm_sq_sum: T,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `||s_t||_2`; for the scalar-accumulator methods, `sqrt(sum ||g||^2)`.
    pub fn precond_l2(&self, algorithm: Algorithm) -> T {
        match algorithm {
            Algorithm::Dog | Algorithm::AdagradNorm => self.grad_norm_sq_sum.sqrt(),
            _ => l2_norm(&self.s),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(text)?;
        let d = state.x.len();
        for other in [
            &state.x0,
            &state.grad_sq_sum,
            &state.s,
            &state.m,
            &state.v,
            &state.v_max,
        ] {
            if other.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    found: other.len(),
                });
            }
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

pub fn init_state<T: Scalar>(
    cfg: &OptimizerConfig<T>,
    x0: &Vector<T>,
) -> Result<OptimizerState<T>> {
    cfg.validate()?;
    if x0.is_empty() {
        return Err(Error::InvalidConfig("x0 must be nonempty".into()));
    }
    let eps = match cfg.eta0_rule {
        Eta0Rule::Absolute => cfg.eta0,
        Eta0Rule::ScaledByInit => {
            let sq: T = x0.iter().map(|&v| v * v).sum();
            cfg.eta0 * (T::one() + sq)
        }
    };
    if eps <= T::zero() || !eps.is_finite() {
        return Err(Error::NonPositiveStepSize(eps.as_f64()));
    }
    let d = x0.len();
    Ok(OptimizerState {
        t: 0,
        x: x0.clone(),
        x0: x0.clone(),
        eps,
        eta: if cfg.algorithm.needs_lr() {
            cfg.lr.unwrap_or(eps)
        } else {
            eps
        },
        r: T::zero(),
        beta1_t: cfg.beta1,
        grad_sq_sum: Vector::zeros(d),
        s: Vector::zeros(d),
        m: Vector::zeros(d),
        v: Vector::zeros(d),
        v_max: Vector::zeros(d),
        grad_norm_sq_sum: T::zero(),
    })
}

fn normalized_distance<T: Scalar>(state: &OptimizerState<T>) -> T {
    let d = T::lit(state.dim() as f64);
    let sq: T = state
        .x
        .iter()
        .zip(state.x0.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    sq.sqrt() / d.sqrt()
}

/// `eta_t = max(eta_{t-1}, c * r_t)`; stores and returns `eta_t`.
pub fn update_eta<T: Scalar>(state: &mut OptimizerState<T>, c: T) -> T {
    let r = normalized_distance(state);
    state.r = r;
    state.eta = state.eta.max(c * r);
    state.eta
}

/// The `eta` that `update_eta` would produce, without touching the state.
pub fn peek_eta<T: Scalar>(state: &OptimizerState<T>, c: T) -> T {
    state.eta.max(c * normalized_distance(state))
}

/// Validates `g` and folds in coupled weight decay.
fn effective_gradient<T: Scalar>(
    state: &OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
) -> Result<Vec<T>> {
    if g.len() != state.dim() {
        return Err(Error::LengthMismatch {
            expected: state.dim(),
            found: g.len(),
        });
    }
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(match cfg.effective_decay_mode() {
        DecayMode::Coupled if cfg.weight_decay > T::zero() => g
            .iter()
            .zip(state.x.iter())
            .map(|(&gi, &xi)| gi + cfg.weight_decay * xi)
            .collect(),
        _ => g.as_slice().to_vec(),
    })
}

fn require_lr<T: Scalar>(cfg: &OptimizerConfig<T>) -> Result<T> {
    cfg.lr.ok_or(Error::MissingLearningRate(cfg.algorithm))
}

/// Entry `num / (delta + s)`. A zero denominator can only occur when every
/// gradient seen in that coordinate was zero, so the numerator is zero too.
#[inline]
fn precond<T: Scalar>(num: T, s: T, delta: T) -> T {
    let denom = delta + s;
    if denom == T::zero() {
        T::zero()
    } else {
        num / denom
    }
}

fn finish<T: Scalar>(state: &mut OptimizerState<T>) -> Result<&Vector<T>> {
    state.t += 1;
    if let Some(index) = state.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(&state.x)
}

/// Accumulates `g^2` and materializes `s = sqrt(sum g^2)`.
fn accumulate_squares<T: Scalar>(state: &mut OptimizerState<T>, g: &[T]) {
    let sums = state.grad_sq_sum.as_mut_slice();
    let s = state.s.as_mut_slice();
    for ((acc, si), &gi) in sums.iter_mut().zip(s.iter_mut()).zip(g) {
        *acc = *acc + gi * gi;
        *si = acc.sqrt();
    }
}

/// `x -= rate * num / (delta + s)`, then decoupled decay `x -= decay * x_old`.
fn apply_preconditioned<T: Scalar>(
    state: &mut OptimizerState<T>,
    num: &[T],
    rate: T,
    delta: T,
    decay: T,
) {
    let s = state.s.as_slice().to_vec();
    for ((xi, &ni), &si) in state.x.as_mut_slice().iter_mut().zip(num).zip(&s) {
        let old = *xi;
        *xi = old - rate * precond(ni, si, delta);
        if decay != T::zero() {
            *xi = *xi - decay * old;
        }
    }
}

fn decoupled_rate<T: Scalar>(cfg: &OptimizerConfig<T>, rate: T) -> T {
    match cfg.effective_decay_mode() {
        DecayMode::Decoupled => rate * cfg.weight_decay,
        _ => T::zero(),
    }
}

/// One AdaGrad++ step with gradient `g` evaluated at the current iterate.
pub fn step_adagradpp<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let g = effective_gradient(state, cfg, g)?;
    let eta = update_eta(state, cfg.base_factor);
    accumulate_squares(state, &g);
    let rate = lr_mult * eta;
    apply_preconditioned(state, &g, rate, cfg.delta, decoupled_rate(cfg, rate));
    finish(state)
}

/// One Adam++ step. AdamW++ is this step with decoupled decay.
pub fn step_adampp<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    case: AdamPpCase,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let g = effective_gradient(state, cfg, g)?;
    let eta = update_eta(state, cfg.base_factor);

    let beta1_t = cfg.beta1 * cfg.lambda.powf(T::lit(state.t as f64));
    state.beta1_t = beta1_t;
    for (mi, &gi) in state.m.as_mut_slice().iter_mut().zip(&g) {
        *mi = beta1_t * *mi + (T::one() - beta1_t) * gi;
    }

    match case {
        AdamPpCase::Case1 => accumulate_squares(state, &g),
        AdamPpCase::Case2 => {
            let b2 = cfg.beta2;
            let scale = T::lit((state.t + 1) as f64);
            let v = state.v.as_mut_slice();
            let v_max = state.v_max.as_mut_slice();
            let s = state.s.as_mut_slice();
            for (((vi, vmi), si), &gi) in
                v.iter_mut().zip(v_max.iter_mut()).zip(s.iter_mut()).zip(&g)
            {
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                *vmi = if cfg.amsgrad_max { vmi.max(*vi) } else { *vi };
                *si = (scale * *vmi).sqrt();
            }
        }
    }

    let rate = lr_mult * eta;
    let m = state.m.as_slice().to_vec();
    apply_preconditioned(state, &m, rate, cfg.delta, decoupled_rate(cfg, rate));
    finish(state)
}

pub fn step_sgd<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let lr = require_lr(cfg)?;
    let g = effective_gradient(state, cfg, g)?;
    state.eta = lr;
    let rate = lr_mult * lr;
    let decay = decoupled_rate(cfg, rate);
    for (xi, &gi) in state.x.as_mut_slice().iter_mut().zip(&g) {
        let old = *xi;
        *xi = old - rate * gi - decay * old;
    }
    finish(state)
}

pub fn step_adagrad<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let lr = require_lr(cfg)?;
    let g = effective_gradient(state, cfg, g)?;
    state.eta = lr;
    accumulate_squares(state, &g);
    let rate = lr_mult * lr;
    apply_preconditioned(state, &g, rate, cfg.delta, decoupled_rate(cfg, rate));
    finish(state)
}

/// Adam, with optional bias correction. With decoupled decay this is AdamW.
pub fn step_adam<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let lr = require_lr(cfg)?;
    let g = effective_gradient(state, cfg, g)?;
    state.eta = lr;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let (c1, c2) = if cfg.bias_correction {
        let k = T::lit((state.t + 1) as f64);
        (T::one() - b1.powf(k), T::one() - b2.powf(k))
    } else {
        (T::one(), T::one())
    };
    let mut num = Vec::with_capacity(g.len());
    {
        let m = state.m.as_mut_slice();
        let v = state.v.as_mut_slice();
        let s = state.s.as_mut_slice();
        for (((mi, vi), si), &gi) in m.iter_mut().zip(v.iter_mut()).zip(s.iter_mut()).zip(&g) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            *si = (*vi / c2).sqrt();
            num.push(*mi / c1);
        }
    }
    let rate = lr_mult * lr;
    apply_preconditioned(state, &num, rate, cfg.delta, decoupled_rate(cfg, rate));
    finish(state)
}

pub fn step_adamw<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    debug_assert_eq!(cfg.effective_decay_mode(), DecayMode::Decoupled);
    step_adam(state, cfg, g, lr_mult)
}

/// DoG: `eta_t = max(eps, max_i ||x_i - x_0||_2) / sqrt(sum ||g_i||^2)`.
pub fn step_dog<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let g = effective_gradient(state, cfg, g)?;
    let r = normalized_distance(state);
    state.r = r;
    let dist = r * T::lit(state.dim() as f64).sqrt();
    state.eta = state.eta.max(dist);
    state.grad_norm_sq_sum = state.grad_norm_sq_sum + g.iter().map(|&v| v * v).sum::<T>();
    scalar_step(state, cfg, &g, lr_mult * state.eta)
}

/// AdaGrad-Norm: `eta_t = lr / sqrt(sum ||g_i||^2)`.
pub fn step_adagrad_norm<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    let lr = require_lr(cfg)?;
    let g = effective_gradient(state, cfg, g)?;
    state.eta = lr;
    state.grad_norm_sq_sum = state.grad_norm_sq_sum + g.iter().map(|&v| v * v).sum::<T>();
    scalar_step(state, cfg, &g, lr_mult * lr)
}

/// `x -= numer * g / sqrt(acc)`; no move while the accumulator is zero.
fn scalar_step<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &[T],
    numer: T,
) -> Result<&'a Vector<T>> {
    if state.grad_norm_sq_sum == T::zero() {
        if state.eps == T::zero() {
            return Err(Error::DivisionByZero { index: 0 });
        }
        return finish(state);
    }
    let root = state.grad_norm_sq_sum.sqrt();
    let decay = decoupled_rate(cfg, numer / root);
    for (xi, &gi) in state.x.as_mut_slice().iter_mut().zip(g) {
        let old = *xi;
        *xi = old - numer * gi / root - decay * old;
    }
    finish(state)
}

/// Dispatches one step of the configured algorithm.
pub fn step<'a, T: Scalar>(
    state: &'a mut OptimizerState<T>,
    cfg: &OptimizerConfig<T>,
    g: &Vector<T>,
    lr_mult: T,
) -> Result<&'a Vector<T>> {
    match cfg.algorithm {
        Algorithm::AdagradPp => step_adagradpp(state, cfg, g, lr_mult),
        Algorithm::AdamPpCase1 => step_adampp(state, cfg, g, AdamPpCase::Case1, lr_mult),
        Algorithm::AdamPpCase2 | Algorithm::AdamwPp => {
            step_adampp(state, cfg, g, AdamPpCase::Case2, lr_mult)
        }
        Algorithm::Sgd => step_sgd(state, cfg, g, lr_mult),
        Algorithm::Adagrad => step_adagrad(state, cfg, g, lr_mult),
        Algorithm::AdagradNorm => step_adagrad_norm(state, cfg, g, lr_mult),
        Algorithm::Dog => step_dog(state, cfg, g, lr_mult),
        Algorithm::Adam => step_adam(state, cfg, g, lr_mult),
        Algorithm::Adamw => step_adamw(state, cfg, g, lr_mult),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64_slice(xs).unwrap()
    }

    fn pp(alg: Algorithm, eps: f64, delta: f64) -> OptimizerConfig<f64> {
        OptimizerConfig {
            algorithm: alg,
            eta0: eps,
            eta0_rule: Eta0Rule::Absolute,
            delta,
            ..Default::default()
        }
    }

    fn random_grads(seed: u64, n: usize, d: usize) -> Vec<Vector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                v(&(0..d)
                    .map(|_| rng.random_range(-3.0..3.0))
                    .collect::<Vec<_>>())
            })
            .collect()
    }

    #[test]
    fn init_eta_rules() {
        let x0 = v(&[1.0, 1.0, 1.0]);
        let abs = init_state(&pp(Algorithm::AdagradPp, 1e-6, 1e-8), &x0).unwrap();
        assert_eq!(abs.eta, 1e-6);
        let mut cfg = pp(Algorithm::AdagradPp, 1e-6, 1e-8);
        cfg.eta0_rule = Eta0Rule::ScaledByInit;
        let scaled = init_state(&cfg, &x0).unwrap();
        assert!((scaled.eta - 4e-6).abs() < 1e-20);
        assert!(scaled.m.iter().all(|&x| x == 0.0));
        assert!(scaled.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_rejects_nonpositive_eps() {
        let cfg = pp(Algorithm::AdagradPp, 0.0, 1e-8);
        assert!(matches!(
            init_state(&cfg, &v(&[1.0])),
            Err(Error::NonPositiveStepSize(_))
        ));
    }

    #[test]
    fn update_eta_examples() {
        let cfg = pp(Algorithm::AdagradPp, 0.1, 0.0);
        let mut st = init_state(&cfg, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(update_eta(&mut st, 1.0), 0.1);
        st.x = v(&[3.0, 4.0]);
        let mut half = st.clone();
        assert!((update_eta(&mut st, 1.0) - 3.5355339059327373).abs() < 1e-12);
        assert!((update_eta(&mut half, 0.5) - 1.7677669529663687).abs() < 1e-12);
    }

    #[test]
    fn adagradpp_hand_recurrence() {
        let cfg = pp(Algorithm::AdagradPp, 1.0, 0.0);
        let mut st = init_state(&cfg, &v(&[0.0])).unwrap();
        step_adagradpp(&mut st, &cfg, &v(&[2.0]), 1.0).unwrap();
        assert_eq!(st.s[0], 2.0);
        assert_eq!(st.x[0], -1.0);
        step_adagradpp(&mut st, &cfg, &v(&[2.0]), 1.0).unwrap();
        assert_eq!(st.eta, 1.0);
        assert!((st.s[0] - 8f64.sqrt()).abs() < 1e-15);
        assert!((st.x[0] - (-1.7071067811865475)).abs() < 1e-12);
    }

    #[test]
    fn adagradpp_two_dim_recurrence() {
        let cfg = pp(Algorithm::AdagradPp, 0.5, 0.0);
        let mut st = init_state(&cfg, &v(&[0.0, 0.0])).unwrap();
        step_adagradpp(&mut st, &cfg, &v(&[3.0, 4.0]), 1.0).unwrap();
        assert_eq!(st.s, v(&[3.0, 4.0]));
        assert_eq!(st.x, v(&[-0.5, -0.5]));
        assert!((update_eta(&mut st, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point_for_adagradpp() {
        let cfg = pp(Algorithm::AdagradPp, 1e-3, 1e-8);
        let mut st = init_state(&cfg, &v(&[1.0, -2.0])).unwrap();
        step_adagradpp(&mut st, &cfg, &v(&[0.5, 0.5]), 1.0).unwrap();
        let (x, s) = (st.x.clone(), st.s.clone());
        step_adagradpp(&mut st, &cfg, &v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(st.s, s);
        assert_eq!(st.x, x);
    }

    #[test]
    fn adampp_case2_hand_recurrence() {
        let mut cfg = pp(Algorithm::AdamPpCase2, 1.0, 0.0);
        cfg.beta1 = 0.0;
        cfg.beta2 = 0.5;
        let mut st = init_state(&cfg, &v(&[0.0])).unwrap();
        step_adampp(&mut st, &cfg, &v(&[2.0]), AdamPpCase::Case2, 1.0).unwrap();
        assert_eq!(st.v[0], 2.0);
        assert!((st.s[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((st.x[0] + std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn adampp_case1_without_momentum_is_adagradpp() {
        let mut cfg = pp(Algorithm::AdamPpCase1, 1e-3, 1e-8);
        cfg.beta1 = 0.0;
        cfg.lambda = 0.7;
        let base = pp(Algorithm::AdagradPp, 1e-3, 1e-8);
        let x0 = v(&[0.3; 20]);
        let mut a = init_state(&cfg, &x0).unwrap();
        let mut b = init_state(&base, &x0).unwrap();
        for g in random_grads(11, 1000, 20) {
            step(&mut a, &cfg, &g, 1.0).unwrap();
            step(&mut b, &base, &g, 1.0).unwrap();
            for i in 0..20 {
                assert!((a.x[i] - b.x[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn beta1_decay_convention() {
        let mut cfg = pp(Algorithm::AdamPpCase2, 1e-3, 1e-8);
        cfg.lambda = 0.5;
        let mut st = init_state(&cfg, &v(&[0.0, 0.0])).unwrap();
        let g = v(&[1.0, -1.0]);
        step(&mut st, &cfg, &g, 1.0).unwrap();
        assert_eq!(st.beta1_t, 0.9);
        step(&mut st, &cfg, &g, 1.0).unwrap();
        assert_eq!(st.beta1_t, 0.45);
        cfg.lambda = 1.0;
        let mut st = init_state(&cfg, &v(&[0.0, 0.0])).unwrap();
        for _ in 0..50 {
            step(&mut st, &cfg, &g, 1.0).unwrap();
            assert_eq!(st.beta1_t, 0.9);
        }
    }

    #[test]
    fn case2_scaled_max_is_monotone() {
        let cfg = pp(Algorithm::AdamPpCase2, 1e-3, 1e-8);
        let mut st = init_state(&cfg, &v(&[0.0; 5])).unwrap();
        let mut prev = [0.0; 5];
        for (k, g) in random_grads(3, 300, 5).into_iter().enumerate() {
            step(&mut st, &cfg, &g, 1.0).unwrap();
            let scale = (k + 1) as f64;
            for (p, &si) in prev.iter_mut().zip(st.s.iter()) {
                let cur = si / scale.sqrt();
                assert!(cur >= *p * (1.0 - 1e-15));
                *p = cur;
            }
        }
    }

    #[test]
    fn simplified_case2_tracks_current_v() {
        let mut cfg = pp(Algorithm::AdamPpCase2, 1e-3, 1e-8);
        cfg.amsgrad_max = false;
        let mut st = init_state(&cfg, &v(&[0.0])).unwrap();
        step(&mut st, &cfg, &v(&[10.0]), 1.0).unwrap();
        step(&mut st, &cfg, &v(&[0.0]), 1.0).unwrap();
        assert_eq!(st.v_max, st.v);
        assert!((st.s[0] - (2.0 * st.v[0]).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adamw_pp_decays_from_old_iterate() {
        let mut cfg = pp(Algorithm::AdamwPp, 0.5, 0.0);
        cfg.weight_decay = 0.1;
        cfg.beta1 = 0.0;
        let mut st = init_state(&cfg, &v(&[2.0])).unwrap();
        step(&mut st, &cfg, &v(&[1.0]), 1.0).unwrap();
        // s = sqrt(1 * (1 - 0.999) * 1), m = 1
        let s = (0.001f64).sqrt();
        let expected = 2.0 - 0.5 * 1.0 / s - 0.5 * 0.1 * 2.0;
        assert!((st.x[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn baselines_basic_steps() {
        let sgd = OptimizerConfig::new(Algorithm::Sgd).with_lr(0.1);
        let mut st = init_state(&sgd, &v(&[0.0, 0.0])).unwrap();
        step(&mut st, &sgd, &v(&[1.0, -2.0]), 1.0).unwrap();
        assert!((st.x[0] + 0.1).abs() < 1e-15 && (st.x[1] - 0.2).abs() < 1e-15);

        let mut adam = OptimizerConfig::new(Algorithm::Adam).with_lr(1e-3);
        adam.delta = 0.0;
        let mut st = init_state(&adam, &v(&[1.0, 1.0, 1.0])).unwrap();
        step(&mut st, &adam, &v(&[0.3, -5.0, 1e-3]), 1.0).unwrap();
        for (xi, sign) in st.x.iter().zip([1.0, -1.0, 1.0]) {
            assert!((xi - (1.0 - 1e-3 * sign)).abs() < 1e-15);
        }

        let adagrad = OptimizerConfig::new(Algorithm::Adagrad).with_lr(0.5);
        let mut st = init_state(&adagrad, &v(&[0.0])).unwrap();
        step(&mut st, &adagrad, &v(&[4.0]), 1.0).unwrap();
        assert!((st.x[0] + 0.5 * 4.0 / (4.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_defaults() {
        let cfg = OptimizerConfig::<f64>::default();
        assert_eq!((cfg.beta1, cfg.beta2), (0.9, 0.999));
    }

    #[test]
    fn literal_adam_without_bias_correction() {
        let mut cfg = OptimizerConfig::new(Algorithm::Adam).with_lr(1.0);
        cfg.bias_correction = false;
        cfg.delta = 0.0;
        let mut st = init_state(&cfg, &v(&[0.0])).unwrap();
        step(&mut st, &cfg, &v(&[2.0]), 1.0).unwrap();
        // m = 0.2, v = 0.004
        assert!((st.x[0] + 0.2 / 0.004f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_lr_is_an_error() {
        let cfg = OptimizerConfig::<f64>::new(Algorithm::Adam);
        assert!(matches!(
            init_state(&cfg, &v(&[0.0])),
            Err(Error::MissingLearningRate(_))
        ));
        let x0 = v(&[0.0]);
        let mut st = init_state(&OptimizerConfig::new(Algorithm::Sgd).with_lr(1.0), &x0).unwrap();
        assert!(step_sgd(&mut st, &cfg, &x0, 1.0).is_err());
    }

    #[test]
    fn dog_and_adagrad_norm_hand_values() {
        let cfg = pp(Algorithm::Dog, 1.0, 0.0);
        let mut st = init_state(&cfg, &v(&[0.0])).unwrap();
        step(&mut st, &cfg, &v(&[2.0]), 1.0).unwrap();
        assert_eq!(st.x[0], -1.0);

        let an = OptimizerConfig::new(Algorithm::AdagradNorm).with_lr(1.0);
        let mut st = init_state(&an, &v(&[1.0, 1.0])).unwrap();
        step(&mut st, &an, &v(&[3.0, 4.0]), 1.0).unwrap();
        assert!((st.x[0] - 0.4).abs() < 1e-15 && (st.x[1] - 0.2).abs() < 1e-15);

        let mut st = init_state(&cfg, &v(&[0.5])).unwrap();
        step(&mut st, &cfg, &v(&[0.0]), 1.0).unwrap();
        assert_eq!(st.x[0], 0.5);
    }

    #[test]
    fn adagradpp_matches_dog_in_one_dimension() {
        let a_cfg = pp(Algorithm::AdagradPp, 0.01, 0.0);
        let d_cfg = pp(Algorithm::Dog, 0.01, 0.0);
        let mut a = init_state(&a_cfg, &v(&[0.2])).unwrap();
        let mut b = init_state(&d_cfg, &v(&[0.2])).unwrap();
        for g in random_grads(5, 1000, 1) {
            step(&mut a, &a_cfg, &g, 1.0).unwrap();
            step(&mut b, &d_cfg, &g, 1.0).unwrap();
            assert!((a.x[0] - b.x[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_gradients() {
        let cfg = pp(Algorithm::AdagradPp, 1e-3, 1e-8);
        let mut st = init_state(&cfg, &v(&[0.0, 0.0])).unwrap();
        assert!(matches!(
            step(&mut st, &cfg, &v(&[1.0]), 1.0),
            Err(Error::LengthMismatch { .. })
        ));
        let bad = Vector::<f64>::zeros(2).add_scalar(f64::INFINITY);
        assert!(matches!(
            step(&mut st, &cfg, &bad, 1.0),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn warns_outside_theory_range() {
        let mut cfg = pp(Algorithm::AdamPpCase1, 1e-3, 1e-8);
        cfg.beta1 = 0.99;
        cfg.beta2 = 0.9;
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }

    #[test]
    fn state_snapshot_round_trip() {
        let cfg = pp(Algorithm::AdamPpCase2, 1e-3, 1e-8);
        let mut st = init_state(&cfg, &v(&[0.1, -0.7, 3.0])).unwrap();
        for g in random_grads(9, 17, 3) {
            step(&mut st, &cfg, &g, 1.0).unwrap();
        }
        let restored = OptimizerState::<f64>::from_json(&st.to_json().unwrap()).unwrap();
        assert_eq!(restored, st);
    }

    #[test]
    fn single_precision_kernel_runs() {
        let cfg = OptimizerConfig::<f32> {
            eta0: 1.0,
            eta0_rule: Eta0Rule::Absolute,
            delta: 0.0,
            ..Default::default()
        };
        let mut st = init_state(&cfg, &Vector::zeros(1)).unwrap();
        step(&mut st, &cfg, &Vector::from_f64_slice(&[2.0]).unwrap(), 1.0).unwrap();
        assert_eq!(st.x[0], -1.0f32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn zero_gradients_never_move(alg_idx in 0usize..10, x0 in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let alg = Algorithm::ALL[alg_idx];
            let mut cfg = OptimizerConfig::new(alg).with_lr(0.1);
            cfg.eta0_rule = Eta0Rule::Absolute;
            cfg.eta0 = 1e-3;
            let x0 = v(&x0);
            let mut st = init_state(&cfg, &x0).unwrap();
            let zero = Vector::zeros(x0.len());
            for _ in 0..5 {
                step(&mut st, &cfg, &zero, 1.0).unwrap();
            }
            prop_assert_eq!(&st.x, &x0);
        }

        #[test]
        fn permutation_equivariance(alg_idx in 0usize..10, seed in 0u64..1000) {
            let alg = Algorithm::ALL[alg_idx];
            let mut cfg = OptimizerConfig::new(alg).with_lr(0.05);
            cfg.eta0_rule = Eta0Rule::Absolute;
            cfg.eta0 = 1e-2;
            let d = 6;
            let perm = [3usize, 0, 5, 1, 4, 2];
            let x0 = random_grads(seed ^ 77, 1, d).remove(0);
            let mut a = init_state(&cfg, &x0).unwrap();
            let mut b = init_state(&cfg, &x0.permuted(&perm)).unwrap();
            for g in random_grads(seed, 40, d) {
                step(&mut a, &cfg, &g, 1.0).unwrap();
                step(&mut b, &cfg, &g.permuted(&perm), 1.0).unwrap();
            }
            let pa = a.x.permuted(&perm);
            for i in 0..d {
                prop_assert!((pa[i] - b.x[i]).abs() <= 1e-9 * (1.0 + pa[i].abs()));
            }
        }

        #[test]
        fn parameter_free_step_bound(alg_idx in 0usize..4, seed in 0u64..1000, lr_mult in 0.1f64..1.0) {
            let alg = Algorithm::ALL[alg_idx];
            let mut cfg = OptimizerConfig::new(alg);
            cfg.eta0_rule = Eta0Rule::Absolute;
            cfg.eta0 = 1e-2;
            cfg.beta1 = 0.5;
            let mut st = init_state(&cfg, &Vector::zeros(4)).unwrap();
            for g in random_grads(seed, 30, 4) {
                let x_old = st.x.clone();
                let prev = st.clone();
                step(&mut st, &cfg, &g, lr_mult).unwrap();
                let num: &[f64] = if alg == Algorithm::AdagradPp { &g } else { &st.m };
                let bound = (0..4)
                    .map(|i| num[i].abs() / (cfg.delta + st.s[i]))
                    .fold(0.0f64, f64::max) * lr_mult * st.eta;
                let moved = x_old.distance_linf(&st.x).unwrap();
                prop_assert!(moved <= bound * (1.0 + 1e-12));
                prop_assert!(st.eta >= prev.eta);
            }
        }
    }
}
