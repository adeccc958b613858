//! Parameter-free adaptive optimizers.
//!
//! AdaGrad++ and Adam++ replace the tuned learning rate of AdaGrad/Adam with
//! `eta_t = max(eta_{t-1}, ||x_t - x_0||_2 / sqrt(d))`. This crate provides
//! those kernels (plus AdamW++ and the usual baselines), convex benchmark
//! problems with stochastic oracles, the weighted averaged iterate used by
//! the convergence guarantees, diagnostics for the quantities in those
//! guarantees, and a deterministic experiment harness.
//!
//! The vector, optimizer, schedule and averaging layers are generic over
//! [`Scalar`] (`f32` or `f64`). Problems, diagnostics and the harness run in
//! `f64`; the aliases below name the `f64` instantiations.

pub mod averaging;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod scalar;
pub mod schedule;
pub mod vecmath;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ParamVector = vecmath::Vector<f64>;
pub type OptimizerConfig = optim::OptimizerConfig<f64>;
pub type OptimizerState = optim::OptimizerState<f64>;
pub type AverageTracker = averaging::AverageTracker<f64>;

pub type ParamVector32 = vecmath::Vector<f32>;
pub type OptimizerConfig32 = optim::OptimizerConfig<f32>;
pub type OptimizerState32 = optim::OptimizerState<f32>;
