//! Benchmark objectives with stochastic gradient oracles.
//!
//! Every problem exposes `loss`, an exact `full_gradient`, and a seeded
//! `stochastic_gradient` whose conditional mean is the full gradient. The
//! convex kinds also provide a minimizer: closed form for the quadratic and
//! least-squares objectives, damped Newton for logistic regression, and the
//! origin for `abs_sum`.
//!
//! Objectives (with `l2 = l2_reg`):
//!
//! ```text
//! quadratic      1/2 x'Ax - b'x                         + l2/2 |x|^2
//! least_squares  1/(2m) |Xw - y|^2                      + l2/2 |w|^2
//! logistic       1/m sum log(1 + exp(-y_i <w, x_i>))    + l2/2 |w|^2
//! abs_sum        sum |x_i|                              + l2/2 |x|^2
//! tiny_mlp       1/(2m) sum (w2' tanh(W1 x_i + b1) + b2 - y_i)^2 + l2/2 |theta|^2
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::{l2_norm, Vector};
use crate::ParamVector;

/// Hidden width of the `tiny_mlp` network.
pub const MLP_HIDDEN: usize = 16;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    LeastSquares,
    Logistic,
    AbsSum,
    TinyMlp,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::LeastSquares => "least_squares",
            ProblemKind::Logistic => "logistic",
            ProblemKind::AbsSum => "abs_sum",
            ProblemKind::TinyMlp => "tiny_mlp",
        }
    }

    pub fn has_minimizer(self) -> bool {
        self != ProblemKind::TinyMlp
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            values,
        }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::identity(n);
        for (i, &e) in entries.iter().enumerate() {
            m.values[i * n + i] = e;
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut values = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                values.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            values,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Problem-specific parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemData {
    Quadratic { a: DenseMatrix, b: Vec<f64> },
    LeastSquares { x: DenseMatrix, y: Vec<f64> },
    Logistic { x: DenseMatrix, y: Vec<f64> },
    AbsSum { dim: usize },
    TinyMlp { x: DenseMatrix, y: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(flatten)]
    pub data: ProblemData,
    /// Coupled L2 regularization, part of the objective and its gradient.
    #[serde(default)]
    pub l2_reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerMethod {
    ClosedForm,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub x_star: ParamVector,
    pub f_star: f64,
    pub method: MinimizerMethod,
    /// Achieved `||grad f(x_star)||_2`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    AdditiveGaussian {
        sigma: f64,
    },
    /// Indices drawn i.i.d. uniformly with replacement.
    Minibatch {
        batch_size: usize,
    },
}

impl NoiseKind {
    fn name(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::AdditiveGaussian { .. } => "additive_gaussian",
            NoiseKind::Minibatch { .. } => "minibatch",
        }
    }
}

/// Stochastic oracle definition; draws are a pure function of `(seed, step)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::AdditiveGaussian { sigma },
            seed,
        }
    }

    pub fn minibatch(batch_size: usize, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Minibatch { batch_size },
            seed,
        }
    }

    fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        rng
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

/// Activations of the tiny MLP for one sample.
struct MlpView<'a> {
    d_in: usize,
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
}

impl<'a> MlpView<'a> {
    fn new(theta: &'a [f64], d_in: usize) -> Self {
        let h = MLP_HIDDEN;
        let (w1, rest) = theta.split_at(h * d_in);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        Self {
            d_in,
            w1,
            b1,
            w2,
            b2: rest[0],
        }
    }

    fn hidden(&self, xi: &[f64]) -> [f64; MLP_HIDDEN] {
        let mut a = [0.0; MLP_HIDDEN];
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = (dot(&self.w1[j * self.d_in..(j + 1) * self.d_in], xi) + self.b1[j]).tanh();
        }
        a
    }

    fn output(&self, a: &[f64; MLP_HIDDEN]) -> f64 {
        dot(self.w2, a) + self.b2
    }
}

/// Parameter count of the tiny MLP for `d_in` inputs.
pub fn mlp_param_dim(d_in: usize) -> usize {
    MLP_HIDDEN * d_in + 2 * MLP_HIDDEN + 1
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(z))`
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl Problem {
    pub fn new(data: ProblemData, l2_reg: f64) -> Result<Self> {
        let p = Self { data, l2_reg };
        p.validate()?;
        Ok(p)
    }

    pub fn quadratic(a: DenseMatrix, b: Vec<f64>, l2_reg: f64) -> Result<Self> {
        Self::new(ProblemData::Quadratic { a, b }, l2_reg)
    }

    pub fn abs_sum(dim: usize) -> Self {
        Self {
            data: ProblemData::AbsSum { dim },
            l2_reg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.l2_reg < 0.0 || !self.l2_reg.is_finite() {
            return invalid("l2_reg must be a nonnegative finite number");
        }
        let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
        match &self.data {
            ProblemData::Quadratic { a, b } => {
                if a.rows != a.cols || a.rows != b.len() || b.is_empty() {
                    return invalid("quadratic needs square A matching b");
                }
                DenseMatrix::new(a.rows, a.cols, a.values.clone())?;
                if !finite(&a.values) || !finite(b) {
                    return invalid("quadratic data must be finite");
                }
                let n = a.rows;
                for i in 0..n {
                    for j in 0..i {
                        let (u, v) = (a.values[i * n + j], a.values[j * n + i]);
                        if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                            return invalid("quadratic A must be symmetric");
                        }
                    }
                }
            }
            ProblemData::LeastSquares { x, y }
            | ProblemData::Logistic { x, y }
            | ProblemData::TinyMlp { x, y } => {
                DenseMatrix::new(x.rows, x.cols, x.values.clone())?;
                if x.rows != y.len() || x.rows == 0 || x.cols == 0 {
                    return invalid("design matrix rows must match labels and be nonempty");
                }
                if !finite(&x.values) || !finite(y) {
                    return invalid("data must be finite");
                }
                if matches!(self.data, ProblemData::Logistic { .. })
                    && y.iter().any(|&v| v != 1.0 && v != -1.0)
                {
                    return invalid("logistic labels must be -1 or +1");
                }
            }
            ProblemData::AbsSum { dim } => {
                if *dim == 0 {
                    return invalid("abs_sum dimension must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ProblemKind {
        match self.data {
            ProblemData::Quadratic { .. } => ProblemKind::Quadratic,
            ProblemData::LeastSquares { .. } => ProblemKind::LeastSquares,
            ProblemData::Logistic { .. } => ProblemKind::Logistic,
            ProblemData::AbsSum { .. } => ProblemKind::AbsSum,
            ProblemData::TinyMlp { .. } => ProblemKind::TinyMlp,
        }
    }

    /// Dimension of the optimization variable.
    pub fn dim(&self) -> usize {
        match &self.data {
            ProblemData::Quadratic { b, .. } => b.len(),
            ProblemData::LeastSquares { x, .. } | ProblemData::Logistic { x, .. } => x.cols,
            ProblemData::AbsSum { dim } => *dim,
            ProblemData::TinyMlp { x, .. } => mlp_param_dim(x.cols),
        }
    }

    /// Number of data rows, for the data-driven kinds.
    pub fn samples(&self) -> Option<usize> {
        match &self.data {
            ProblemData::LeastSquares { x, .. }
            | ProblemData::Logistic { x, .. }
            | ProblemData::TinyMlp { x, .. } => Some(x.rows),
            _ => None,
        }
    }

    /// Analytic bound on `||G(x)||_2` when one holds globally.
    pub fn gradient_bound(&self) -> Option<f64> {
        match self.data {
            ProblemData::AbsSum { dim } if self.l2_reg == 0.0 => Some((dim as f64).sqrt()),
            _ => None,
        }
    }

    fn check_dim(&self, x: &ParamVector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn reg_loss(&self, x: &[f64]) -> f64 {
        if self.l2_reg == 0.0 {
            0.0
        } else {
            0.5 * self.l2_reg * dot(x, x)
        }
    }

    pub fn loss(&self, x: &ParamVector) -> Result<f64> {
        self.check_dim(x)?;
        let w = x.as_slice();
        let data_loss = match &self.data {
            ProblemData::Quadratic { a, b } => {
                let n = b.len();
                let mut quad = 0.0;
                for i in 0..n {
                    quad += w[i] * dot(a.row(i), w);
                }
                0.5 * quad - dot(b, w)
            }
            ProblemData::LeastSquares { x: xm, y } => {
                let m = xm.rows as f64;
                (0..xm.rows)
                    .map(|i| {
                        let r = dot(xm.row(i), w) - y[i];
                        r * r
                    })
                    .sum::<f64>()
                    / (2.0 * m)
            }
            ProblemData::Logistic { x: xm, y } => {
                let m = xm.rows as f64;
                (0..xm.rows)
                    .map(|i| log1p_exp(-y[i] * dot(xm.row(i), w)))
                    .sum::<f64>()
                    / m
            }
            ProblemData::AbsSum { .. } => w.iter().map(|v| v.abs()).sum(),
            ProblemData::TinyMlp { x: xm, y } => {
                let net = MlpView::new(w, xm.cols);
                let m = xm.rows as f64;
                (0..xm.rows)
                    .map(|i| {
                        let r = net.output(&net.hidden(xm.row(i))) - y[i];
                        r * r
                    })
                    .sum::<f64>()
                    / (2.0 * m)
            }
        };
        Ok(data_loss + self.reg_loss(w))
    }

    pub fn full_gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        self.check_dim(x)?;
        let g = match &self.data {
            ProblemData::Quadratic { a, b } => {
                let w = x.as_slice();
                (0..b.len()).map(|i| dot(a.row(i), w) - b[i]).collect()
            }
            ProblemData::AbsSum { .. } => x
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            _ => {
                let m = self.samples().unwrap_or(0);
                return self.batch_gradient(x, 0..m);
            }
        };
        self.finish_gradient(x, g)
    }

    fn finish_gradient(&self, x: &ParamVector, mut g: Vec<f64>) -> Result<ParamVector> {
        if self.l2_reg != 0.0 {
            for (gi, &xi) in g.iter_mut().zip(x.iter()) {
                *gi += self.l2_reg * xi;
            }
        }
        Vector::new(g)
    }

    /// Averaged data gradient over the given rows, plus the L2 term.
    fn batch_gradient(
        &self,
        x: &ParamVector,
        rows: impl Iterator<Item = usize>,
    ) -> Result<ParamVector> {
        let w = x.as_slice();
        let d = self.dim();
        let mut g = vec![0.0; d];
        let mut count = 0usize;
        match &self.data {
            ProblemData::LeastSquares { x: xm, y } => {
                for i in rows {
                    let xi = xm.row(i);
                    let r = dot(xi, w) - y[i];
                    for (gj, &xij) in g.iter_mut().zip(xi) {
                        *gj += r * xij;
                    }
                    count += 1;
                }
            }
            ProblemData::Logistic { x: xm, y } => {
                for i in rows {
                    let xi = xm.row(i);
                    let coef = -y[i] * sigmoid_neg(y[i] * dot(xi, w));
                    for (gj, &xij) in g.iter_mut().zip(xi) {
                        *gj += coef * xij;
                    }
                    count += 1;
                }
            }
            ProblemData::TinyMlp { x: xm, y } => {
                let d_in = xm.cols;
                let net = MlpView::new(w, d_in);
                let h = MLP_HIDDEN;
                let (gw1, rest) = g.split_at_mut(h * d_in);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h);
                for i in rows {
                    let xi = xm.row(i);
                    let a = net.hidden(xi);
                    let r = net.output(&a) - y[i];
                    gb2[0] += r;
                    for j in 0..h {
                        gw2[j] += r * a[j];
                        let back = r * net.w2[j] * (1.0 - a[j] * a[j]);
                        gb1[j] += back;
                        for (k, &xik) in xi.iter().enumerate() {
                            gw1[j * d_in + k] += back * xik;
                        }
                    }
                    count += 1;
                }
            }
            _ => unreachable!("batch gradient only for data-driven kinds"),
        }
        if count > 0 {
            let inv = 1.0 / count as f64;
            g.iter_mut().for_each(|gi| *gi *= inv);
        }
        self.finish_gradient(x, g)
    }

    /// Seeded stochastic gradient for step `step`.
    pub fn stochastic_gradient(
        &self,
        noise: &NoiseModel,
        x: &ParamVector,
        step: u64,
    ) -> Result<ParamVector> {
        match noise.kind {
            NoiseKind::None => self.full_gradient(x),
            NoiseKind::AdditiveGaussian { sigma } => {
                let mut g = self.full_gradient(x)?.into_inner();
                let mut rng = noise.rng(step);
                for gi in g.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *gi += sigma * z;
                }
                Vector::new(g)
            }
            NoiseKind::Minibatch { batch_size } => {
                let m = self.samples().ok_or(Error::UnsupportedNoise {
                    noise: noise.kind.name(),
                    problem: self.kind().name(),
                })?;
                if batch_size == 0 || batch_size > m {
                    return Err(Error::InvalidConfig(format!(
                        "batch_size must lie in [1, {m}], got {batch_size}"
                    )));
                }
                self.check_dim(x)?;
                let mut rng = noise.rng(step);
                let rows: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..m)).collect();
                self.batch_gradient(x, rows.into_iter())
            }
        }
    }

    pub fn validate_noise(&self, noise: &NoiseModel) -> Result<()> {
        match noise.kind {
            NoiseKind::AdditiveGaussian { sigma } if sigma < 0.0 || !sigma.is_finite() => {
                Err(Error::InvalidConfig("sigma must be nonnegative".into()))
            }
            NoiseKind::Minibatch { batch_size } => match self.samples() {
                None => Err(Error::UnsupportedNoise {
                    noise: noise.kind.name(),
                    problem: self.kind().name(),
                }),
                Some(m) if batch_size == 0 || batch_size > m => Err(Error::InvalidConfig(format!(
                    "batch_size must lie in [1, {m}], got {batch_size}"
                ))),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Exact minimizer for the convex kinds.
    pub fn solve_minimizer(&self) -> Result<Minimizer> {
        let d = self.dim();
        let (x_star, method) = match &self.data {
            ProblemData::Quadratic { a, b } => {
                let mut h = a.to_nalgebra();
                for i in 0..d {
                    h[(i, i)] += self.l2_reg;
                }
                (
                    solve_spd(h, DVector::from_column_slice(b))?,
                    MinimizerMethod::ClosedForm,
                )
            }
            ProblemData::LeastSquares { x, y } => {
                let xm = x.to_nalgebra();
                let m = x.rows as f64;
                let mut h = xm.transpose() * &xm / m;
                for i in 0..d {
                    h[(i, i)] += self.l2_reg;
                }
                let rhs = xm.transpose() * DVector::from_column_slice(y) / m;
                (solve_spd(h, rhs)?, MinimizerMethod::ClosedForm)
            }
            ProblemData::Logistic { .. } => (self.newton_logistic()?, MinimizerMethod::Newton),
            ProblemData::AbsSum { dim } => (vec![0.0; *dim], MinimizerMethod::ClosedForm),
            ProblemData::TinyMlp { .. } => return Err(Error::NoMinimizer("tiny_mlp")),
        };
        let x_star = Vector::new(x_star)?;
        let f_star = self.loss(&x_star)?;
        let tolerance = l2_norm(&self.full_gradient(&x_star)?);
        Ok(Minimizer {
            x_star,
            f_star,
            method,
            tolerance,
        })
    }

    fn logistic_hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let ProblemData::Logistic { x, y } = &self.data else {
            unreachable!()
        };
        let d = x.cols;
        let mut h = DMatrix::<f64>::zeros(d, d);
        for (i, &yi) in y.iter().enumerate() {
            let xi = x.row(i);
            let p = sigmoid_neg(yi * dot(xi, w));
            let c = p * (1.0 - p);
            for j in 0..d {
                let cj = c * xi[j];
                for k in 0..=j {
                    h[(j, k)] += cj * xi[k];
                }
            }
        }
        let m = x.rows as f64;
        for j in 0..d {
            for k in 0..=j {
                h[(j, k)] /= m;
                h[(k, j)] = h[(j, k)];
            }
            h[(j, j)] += self.l2_reg;
        }
        h
    }

    fn newton_logistic(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut w = Vector::zeros(d);
        let mut f = self.loss(&w)?;
        let mut gnorm = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITERS {
            let g = self.full_gradient(&w)?;
            gnorm = l2_norm(&g);
            if gnorm <= NEWTON_TOL {
                return Ok(w.into_inner());
            }
            let h = self.logistic_hessian(&w);
            let dir = solve_spd(h, DVector::from_column_slice(&g))?;
            let decrement: f64 = dot(&dir, &g);
            // Once the predicted decrease is below the loss's roundoff, Armijo
            // comparisons are noise; take the full step.
            if decrement <= f64::EPSILON * (1.0 + f.abs()) {
                w = Vector::new(w.iter().zip(&dir).map(|(wi, di)| wi - di).collect())?;
                f = self.loss(&w)?;
                continue;
            }
            // backtracking on the Armijo condition
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial =
                    Vector::new(w.iter().zip(&dir).map(|(wi, di)| wi - step * di).collect())?;
                let ft = self.loss(&trial)?;
                if ft <= f - 1e-4 * step * decrement {
                    w = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // line search stalled at roundoff; take the full Newton step
                w = Vector::new(w.iter().zip(&dir).map(|(wi, di)| wi - di).collect())?;
                f = self.loss(&w)?;
            }
        }
        let g = self.full_gradient(&w)?;
        gnorm = gnorm.min(l2_norm(&g));
        if gnorm <= NEWTON_TOL {
            return Ok(w.into_inner());
        }
        Err(Error::NewtonDiverged {
            iterations: NEWTON_MAX_ITERS,
            grad_norm: gnorm,
        })
    }

    /// Condition number of the quadratic's Hessian `A + l2 I`.
    pub fn condition_number(&self) -> Option<f64> {
        let ProblemData::Quadratic { a, .. } = &self.data else {
            return None;
        };
        let mut h = a.to_nalgebra();
        for i in 0..a.rows {
            h[(i, i)] += self.l2_reg;
        }
        let eig = h.symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
    }

    /// Smallest eigenvalue of `A + l2 I` for the quadratic kind.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        let ProblemData::Quadratic { a, .. } = &self.data else {
            return None;
        };
        let mut h = a.to_nalgebra();
        for i in 0..a.rows {
            h[(i, i)] += self.l2_reg;
        }
        h.symmetric_eigenvalues().iter().cloned().reduce(f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
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

/// Cholesky solve, with LU as a fallback for semidefinite-but-invertible input.
fn solve_spd(h: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Ok(chol.solve(&rhs).as_slice().to_vec());
    }
    let scale = h.amax().max(1.0);
    let lu = h.lu();
    let u = lu.u();
    let min_pivot = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min_pivot <= 1e-13 * scale {
        return Err(Error::SingularSystem);
    }
    lu.solve(&rhs)
        .map(|s| s.as_slice().to_vec())
        .ok_or(Error::SingularSystem)
}

/// Parameters for deterministic synthetic problem generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: ProblemKind,
    /// Variable dimension; for `tiny_mlp`, the input dimension.
    pub d: usize,
    /// Data rows (ignored by `quadratic` and `abs_sum`).
    pub m: usize,
    pub seed: u64,
    pub l2_reg: f64,
    /// Ridge added to `M'M` in the quadratic construction.
    pub mu: f64,
    /// If set, the quadratic gets a log-spaced spectrum on `[1, condition]`
    /// instead of `M'M + mu I`.
    pub condition: Option<f64>,
    /// Separation between the two logistic class means.
    pub margin: f64,
    /// Target noise for regression data.
    pub target_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Quadratic,
            d: 10,
            m: 100,
            seed: 0,
            l2_reg: 0.0,
            mu: 0.1,
            condition: None,
            margin: 2.0,
            target_noise: 0.1,
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Problem> {
    let (d, m) = (spec.d, spec.m);
    if d == 0 || m == 0 {
        return Err(Error::InvalidConfig(
            "synthetic d and m must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let data = match spec.kind {
        ProblemKind::Quadratic => {
            let a = match spec.condition {
                None => {
                    let mm = DMatrix::from_row_slice(d, d, &gaussian_vec(&mut rng, d * d))
                        / (d as f64).sqrt();
                    let mut a = mm.transpose() * &mm;
                    for i in 0..d {
                        a[(i, i)] += spec.mu;
                    }
                    a
                }
                Some(kappa) => {
                    if kappa < 1.0 || !kappa.is_finite() {
                        return Err(Error::InvalidConfig("condition must be >= 1".into()));
                    }
                    let g = DMatrix::from_row_slice(d, d, &gaussian_vec(&mut rng, d * d));
                    let q = g.qr().q();
                    let spectrum: Vec<f64> = (0..d)
                        .map(|i| {
                            if d == 1 {
                                1.0
                            } else {
                                kappa.powf(i as f64 / (d - 1) as f64)
                            }
                        })
                        .collect();
                    let lam = DMatrix::from_diagonal(&DVector::from_vec(spectrum));
                    &q * lam * q.transpose()
                }
            };
            let mut a = DenseMatrix::from_nalgebra(&a);
            // exact symmetry
            for i in 0..d {
                for j in 0..i {
                    let avg = 0.5 * (a.values[i * d + j] + a.values[j * d + i]);
                    a.values[i * d + j] = avg;
                    a.values[j * d + i] = avg;
                }
            }
            let b = gaussian_vec(&mut rng, d);
            ProblemData::Quadratic { a, b }
        }
        ProblemKind::LeastSquares => {
            let x = gaussian_vec(&mut rng, m * d);
            let w_true = gaussian_vec(&mut rng, d);
            let y = (0..m)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    dot(&x[i * d..(i + 1) * d], &w_true) + spec.target_noise * z
                })
                .collect();
            ProblemData::LeastSquares {
                x: DenseMatrix::new(m, d, x)?,
                y,
            }
        }
        ProblemKind::Logistic => {
            let dir = gaussian_vec(&mut rng, d);
            let norm = l2_norm(&dir).max(f64::MIN_POSITIVE);
            let mean: Vec<f64> = dir.iter().map(|v| 0.5 * spec.margin * v / norm).collect();
            let mut x = Vec::with_capacity(m * d);
            let mut y = Vec::with_capacity(m);
            for i in 0..m {
                // alternate so both classes are present whenever m >= 2
                let label = if i % 2 == 0 { 1.0 } else { -1.0 };
                for mj in &mean {
                    let z: f64 = rng.sample(StandardNormal);
                    x.push(label * mj + z);
                }
                y.push(label);
            }
            ProblemData::Logistic {
                x: DenseMatrix::new(m, d, x)?,
                y,
            }
        }
        ProblemKind::AbsSum => ProblemData::AbsSum { dim: d },
        ProblemKind::TinyMlp => {
            let x = gaussian_vec(&mut rng, m * d);
            let u = gaussian_vec(&mut rng, d);
            let scale = 1.0 / (d as f64).sqrt();
            let y = (0..m)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    (scale * dot(&x[i * d..(i + 1) * d], &u)).tanh() + spec.target_noise * z
                })
                .collect();
            ProblemData::TinyMlp {
                x: DenseMatrix::new(m, d, x)?,
                y,
            }
        }
    };
    Problem::new(data, spec.l2_reg)
}
