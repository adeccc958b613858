//! Deterministic experiment runner, sweeps and output writers.
//!
//! A run is fully determined by its [`ExperimentConfig`]: the problem is
//! generated (or loaded) from its spec, `x_0` is drawn from `run_seed`, and
//! the oracle noise is a function of `(noise.seed, step)`. Sweeps override a
//! single key and may run in parallel; results are collected in input order,
//! so parallel and sequential sweeps produce identical tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::averaging::AverageTracker;
use crate::diagnostics::{rate_fit, theorem_report, RateFit, TheoremReport, TheoremTracker};
use crate::error::{Error, Result};
use crate::optim::{self, Algorithm, Eta0Rule};
use crate::problems::{make_synthetic, Minimizer, NoiseModel, Problem, ProblemKind, SyntheticSpec};
use crate::schedule::{Schedule, ScheduleKind};
use crate::vecmath::{l2_norm, Vector};
use crate::{OptimizerConfig, ParamVector};

/// Runs abort once the loss or any coordinate exceeds this magnitude.
pub const DIVERGENCE_THRESHOLD: f64 = 1e30;

pub const TRACE_HEADER: &str = "step,loss,eta,r,grad_l2,s_l2,dist_x0,dist_xstar_inf,lr_mult";

pub const DEFAULT_ETA0_VALUES: [f64; 7] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_BASE_FACTORS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Largest `eta0` included in the sweep spread statistic.
const ETA0_SPREAD_CUTOFF: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    /// Load a serialized problem instead of generating one.
    pub path: Option<PathBuf>,
    pub kind: ProblemKind,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    pub l2_reg: f64,
    pub mu: f64,
    pub condition: Option<f64>,
    pub margin: f64,
    pub target_noise: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            path: None,
            kind: s.kind,
            d: s.d,
            m: s.m,
            seed: s.seed,
            l2_reg: s.l2_reg,
            mu: s.mu,
            condition: s.condition,
            margin: s.margin,
            target_noise: s.target_noise,
        }
    }
}

impl ProblemSpec {
    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            kind: self.kind,
            d: self.d,
            m: self.m,
            seed: self.seed,
            l2_reg: self.l2_reg,
            mu: self.mu,
            condition: self.condition,
            margin: self.margin,
            target_noise: self.target_noise,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        match &self.path {
            Some(path) => Problem::load(path),
            None => make_synthetic(&self.synthetic()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zeros,
    Gaussian,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    pub kind: InitKind,
    /// Standard deviation for `gaussian`.
    pub scale: f64,
    /// Coordinates for `explicit`.
    pub values: Option<Vec<f64>>,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            kind: InitKind::Gaussian,
            scale: 1.0,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub warmup_steps: u64,
    pub floor: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            warmup_steps: 0,
            floor: 0.0,
        }
    }
}

impl ScheduleSpec {
    pub fn with_total(&self, total_steps: u64) -> Schedule {
        Schedule {
            kind: self.kind,
            total_steps,
            warmup_steps: self.warmup_steps,
            floor: self.floor,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub trace_csv: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
    /// Include wall-clock time in the summary (breaks byte-for-byte reproducibility).
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub noise: NoiseModel,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleSpec,
    pub total_steps: u64,
    pub eval_every: u64,
    pub run_seed: u64,
    pub init: InitSpec,
    /// Confidence level `delta` for `theta`.
    pub delta_conf: f64,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            noise: NoiseModel::none(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleSpec::default(),
            total_steps: 1000,
            eval_every: 10,
            run_seed: 0,
            init: InitSpec::default(),
            delta_conf: 0.1,
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps < 2 {
            return Err(Error::InvalidConfig(
                "total_steps must be at least 2".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be at least 1".into()));
        }
        self.schedule.with_total(self.total_steps).validate()?;
        self.optimizer.validate()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything except output paths.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = OutputSpec::default();
        let text = serde_json::to_string(&canonical)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    /// Sets a dotted key such as `optimizer.lr` to a JSON value.
    pub fn with_override(&self, key: &str, value: Value) -> Result<Self> {
        let mut tree = serde_json::to_value(self)?;
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        }
        *node = value;
        Ok(serde_json::from_value(tree)?)
    }

    fn initial_point(&self, dim: usize) -> Result<ParamVector> {
        match self.init.kind {
            InitKind::Zeros => Ok(Vector::zeros(dim)),
            InitKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.run_seed);
                let values = (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        self.init.scale * z
                    })
                    .collect();
                Vector::new(values)
            }
            InitKind::Explicit => {
                let values =
                    self.init.values.clone().ok_or_else(|| {
                        Error::InvalidConfig("explicit init needs `values`".into())
                    })?;
                if values.len() != dim {
                    return Err(Error::LengthMismatch {
                        expected: dim,
                        found: values.len(),
                    });
                }
                Vector::new(values)
            }
        }
    }
}

/// One logged evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub loss: f64,
    pub eta: f64,
    pub r: f64,
    pub grad_l2: f64,
    pub s_l2: f64,
    pub dist_x0: f64,
    pub dist_xstar_inf: Option<f64>,
    pub lr_mult: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub problem: ProblemKind,
    pub dim: usize,
    pub total_steps: u64,
    pub diverged: bool,
    pub diverged_step: Option<u64>,
    pub final_loss: Option<f64>,
    pub f_star: Option<f64>,
    /// `f(x_T) - f*`
    pub gap_final: Option<f64>,
    /// `f(x_bar_tau) - f*`
    pub gap_avg: Option<f64>,
    pub loss_avg: Option<f64>,
    pub initial_gap: Option<f64>,
    pub tau: Option<u64>,
    pub theorem: Option<TheoremReport>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
}

impl RunSummary {
    /// Gap used for ranking: final gap when `f*` is known, else final loss.
    pub fn ranking_score(&self) -> Option<f64> {
        if self.diverged {
            return None;
        }
        self.gap_final.or(self.final_loss)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
    /// Averaged iterate, when one exists.
    pub x_bar: Option<ParamVector>,
    pub x_final: ParamVector,
}

fn exceeds(x: f64) -> bool {
    !x.is_finite() || x.abs() > DIVERGENCE_THRESHOLD
}

fn iterate_diverged(x: &ParamVector) -> bool {
    x.iter().any(|&v| exceeds(v))
}

/// Executes one experiment. Nothing is written to disk.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let mut warnings = cfg.optimizer.validate()?;
    let problem = cfg.problem.build()?;
    problem.validate_noise(&cfg.noise)?;
    let minimizer: Option<Minimizer> = if problem.kind().has_minimizer() {
        match problem.solve_minimizer() {
            Ok(m) => Some(m),
            Err(e) => {
                warnings.push(format!("no minimizer: {e}"));
                None
            }
        }
    } else {
        None
    };
    let x_star = minimizer.as_ref().map(|m| m.x_star.clone());
    let f_star = minimizer.as_ref().map(|m| m.f_star);

    let dim = problem.dim();
    let x0 = cfg.initial_point(dim)?;
    let opt = &cfg.optimizer;
    let mut state = optim::init_state(opt, &x0)?;
    let schedule = cfg.schedule.with_total(cfg.total_steps);
    let mut averager = AverageTracker::new(dim);
    let mut theorem = TheoremTracker::new(x_star.clone(), state.eps);
    let initial_gap = match f_star {
        Some(fs) => Some(problem.loss(&x0)? - fs),
        None => None,
    };

    let mut trace = Vec::new();
    let mut diverged_step = None;

    for t in 0..cfg.total_steps {
        let x_t = state.x.clone();
        if iterate_diverged(&x_t) {
            diverged_step = Some(t);
            break;
        }
        theorem.record_iterate(&x_t)?;
        let lr_mult: f64 = schedule.multiplier(t)?;
        let loss = if t % cfg.eval_every == 0 {
            let l = problem.loss(&x_t)?;
            if exceeds(l) {
                diverged_step = Some(t);
                break;
            }
            Some(l)
        } else {
            None
        };
        let g = match problem.stochastic_gradient(&cfg.noise, &x_t, t) {
            Ok(g) => g,
            Err(Error::NonFinite { .. }) => {
                diverged_step = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        match optim::step(&mut state, opt, &g, lr_mult) {
            Ok(_) => {}
            Err(Error::NonFinite { .. }) => {
                diverged_step = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        let s_l2 = state.precond_l2(opt.algorithm);
        theorem.record_step(&g, s_l2, state.eta);
        if averager.observe(&x_t, state.eta)? {
            theorem.snapshot(t);
        }
        if let Some(loss) = loss {
            trace.push(TraceRecord {
                step: t,
                loss,
                eta: state.eta,
                r: state.r,
                grad_l2: l2_norm(&g),
                s_l2,
                dist_x0: x_t.distance_l2(&x0)?,
                dist_xstar_inf: match &x_star {
                    Some(xs) => Some(x_t.distance_linf(xs)?),
                    None => None,
                },
                lr_mult,
            });
        }
    }
    theorem.set_horizon(cfg.total_steps);

    let mut summary = RunSummary {
        config_hash: cfg.hash()?,
        algorithm: opt.algorithm,
        problem: problem.kind(),
        dim,
        total_steps: cfg.total_steps,
        diverged: false,
        diverged_step: None,
        final_loss: None,
        f_star,
        gap_final: None,
        gap_avg: None,
        loss_avg: None,
        initial_gap,
        tau: None,
        theorem: None,
        warnings,
        wall_clock_seconds: None,
    };

    if diverged_step.is_none() && iterate_diverged(&state.x) {
        diverged_step = Some(cfg.total_steps);
    }
    let final_loss = if diverged_step.is_none() {
        let l = problem.loss(&state.x)?;
        if exceeds(l) {
            diverged_step = Some(cfg.total_steps);
        }
        Some(l)
    } else {
        None
    };

    let mut x_bar = None;
    if let (None, Some(final_loss)) = (diverged_step, final_loss) {
        // Closing candidate tau = T: eta_T and s_T from a probe step at x_T.
        let x_last = state.x.clone();
        theorem.record_iterate(&x_last)?;
        if let Ok(g_last) = problem.stochastic_gradient(&cfg.noise, &x_last, cfg.total_steps) {
            let mut probe = state.clone();
            if optim::step(&mut probe, opt, &g_last, 1.0).is_ok() {
                theorem.record_step(&g_last, probe.precond_l2(opt.algorithm), probe.eta);
                if averager.candidate(probe.eta)? {
                    theorem.snapshot(cfg.total_steps);
                }
            }
        }
        summary.final_loss = Some(final_loss);
        summary.gap_final = f_star.map(|fs| final_loss - fs);
        if let Ok((tau, xb)) = averager.current_average() {
            let loss_avg = problem.loss(xb)?;
            summary.tau = Some(tau);
            summary.loss_avg = Some(loss_avg);
            summary.gap_avg = f_star.map(|fs| loss_avg - fs);
            summary.theorem = Some(theorem_report(
                &theorem,
                &problem,
                minimizer.as_ref(),
                xb,
                cfg.delta_conf,
            )?);
            x_bar = Some(xb.clone());
        }
    } else {
        log::warn!(
            "run {} diverged at step {:?}",
            summary.config_hash,
            diverged_step
        );
        summary.diverged = true;
        summary.diverged_step = diverged_step;
    }

    if cfg.output.record_timing {
        summary.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    Ok(RunOutput {
        trace,
        summary,
        x_bar,
        x_final: state.x,
    })
}

/// Runs and writes whichever outputs the config names.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let out = run(cfg)?;
    if let Some(path) = &cfg.output.trace_csv {
        write_trace_csv(&out.trace, path)?;
    }
    if let Some(path) = &cfg.output.summary_json {
        write_summary_json(&out.summary, path)?;
    }
    Ok(out)
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 + trace.len() * 200);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let xstar = r.dist_xstar_inf.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            format_float(r.loss),
            format_float(r.eta),
            format_float(r.r),
            format_float(r.grad_l2),
            format_float(r.s_l2),
            format_float(r.dist_x0),
            xstar,
            format_float(r.lr_mult),
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

pub fn write_trace_csv(trace: &[TraceRecord], path: &Path) -> Result<()> {
    write_file(path, &trace_to_csv(trace))
}

pub fn summary_to_json(summary: &RunSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

pub fn write_summary_json(summary: &RunSummary, path: &Path) -> Result<()> {
    write_file(path, &summary_to_json(summary)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: Value,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: String,
    pub rows: Vec<SweepRow>,
    /// `max / min - 1` of the final gaps over the rows the sweep singles out.
    pub relative_spread: Option<f64>,
}

impl SweepTable {
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter_map(|r| r.summary.ranking_score().map(|s| (s, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| r)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},final_loss,gap_final,gap_avg,tau,diverged,diverged_step\n",
            self.param
        );
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        for row in &self.rows {
            let s = &row.summary;
            let value = match &row.value {
                Value::String(text) => text.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                value,
                opt(s.final_loss),
                opt(s.gap_final),
                opt(s.gap_avg),
                s.tau.map(|t| t.to_string()).unwrap_or_default(),
                s.diverged,
                s.diverged_step.map(|t| t.to_string()).unwrap_or_default(),
            );
        }
        if let Some(spread) = self.relative_spread {
            let _ = writeln!(out, "# relative_spread,{}", format_float(spread));
        }
        out
    }
}

fn sweep(configs: Vec<(Value, ExperimentConfig)>, parallel: bool) -> Result<Vec<SweepRow>> {
    let exec = |(value, cfg): (Value, ExperimentConfig)| -> Result<SweepRow> {
        let summary = run(&cfg)?.summary;
        Ok(SweepRow { value, summary })
    };
    if parallel {
        configs.into_par_iter().map(exec).collect()
    } else {
        configs.into_iter().map(exec).collect()
    }
}

fn detached(base: &ExperimentConfig) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.output.trace_csv = None;
    cfg.output.summary_json = None;
    cfg.output.record_timing = false;
    cfg
}

/// One run per value of `param`; rows sorted by final gap, diverged last.
pub fn grid_search(
    base: &ExperimentConfig,
    param: &str,
    values: &[Value],
    parallel: bool,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(
            "grid search needs at least one value".into(),
        ));
    }
    let base = detached(base);
    let configs = values
        .iter()
        .map(|v| Ok((v.clone(), base.with_override(param, v.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = sweep(configs, parallel)?;
    rows.sort_by(
        |a, b| match (a.summary.ranking_score(), b.summary.ranking_score()) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        },
    );
    Ok(SweepTable {
        param: param.to_string(),
        rows,
        relative_spread: None,
    })
}

fn require_parameter_free(cfg: &ExperimentConfig) -> Result<()> {
    if !cfg.optimizer.algorithm.is_parameter_free() {
        return Err(Error::InvalidConfig(format!(
            "ablations need a parameter-free optimizer, got {:?}",
            cfg.optimizer.algorithm
        )));
    }
    Ok(())
}

fn spread(rows: &[SweepRow], include: impl Fn(f64) -> bool) -> Option<f64> {
    let gaps: Vec<f64> = rows
        .iter()
        .filter(|r| r.value.as_f64().is_some_and(&include))
        .filter_map(|r| r.summary.ranking_score())
        .collect();
    if gaps.len() < 2 {
        return None;
    }
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(max / min - 1.0)
}

/// Sweeps the initial step scale (absolute mode), all else fixed.
pub fn ablation_eta0(
    base: &ExperimentConfig,
    values: &[f64],
    parallel: bool,
) -> Result<SweepTable> {
    require_parameter_free(base)?;
    let base = detached(base);
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            cfg.optimizer.eta0_rule = Eta0Rule::Absolute;
            cfg.optimizer.eta0 = v;
            (Value::from(v), cfg)
        })
        .collect();
    let rows = sweep(configs, parallel)?;
    let relative_spread = spread(&rows, |v| v <= ETA0_SPREAD_CUTOFF);
    Ok(SweepTable {
        param: "optimizer.eta0".into(),
        rows,
        relative_spread,
    })
}

/// Sweeps the base factor `c`, all else fixed.
pub fn ablation_base_factor(
    base: &ExperimentConfig,
    values: &[f64],
    parallel: bool,
) -> Result<SweepTable> {
    require_parameter_free(base)?;
    let base = detached(base);
    let configs = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            cfg.optimizer.base_factor = v;
            (Value::from(v), cfg)
        })
        .collect();
    let rows = sweep(configs, parallel)?;
    let relative_spread = spread(&rows, |_| true);
    Ok(SweepTable {
        param: "optimizer.base_factor".into(),
        rows,
        relative_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub horizons: Vec<u64>,
    /// `gaps[i][k]`: gap of the averaged iterate at horizon `i`, seed `k`.
    pub gaps: Vec<Vec<Option<f64>>>,
    pub median_gaps: Vec<f64>,
    pub fit: RateFit,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Runs `base` at each horizon for `seeds` noise/init seeds and fits the
/// log-log slope of the median averaged-iterate gap.
pub fn rates(
    base: &ExperimentConfig,
    horizons: &[u64],
    seeds: u64,
    parallel: bool,
) -> Result<RateReport> {
    if seeds == 0 {
        return Err(Error::InvalidConfig("rates needs at least one seed".into()));
    }
    let base = detached(base);
    let jobs: Vec<(usize, ExperimentConfig)> = horizons
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| {
            let base = &base;
            (0..seeds).map(move |k| {
                let mut cfg = base.clone();
                cfg.total_steps = t;
                cfg.eval_every = t;
                cfg.noise.seed = base.noise.seed.wrapping_add(k);
                cfg.run_seed = base.run_seed.wrapping_add(k);
                (i, cfg)
            })
        })
        .collect();
    let exec = |(i, cfg): (usize, ExperimentConfig)| -> Result<(usize, Option<f64>)> {
        let s = run(&cfg)?.summary;
        Ok((i, s.gap_avg.filter(|_| !s.diverged)))
    };
    let results: Vec<(usize, Option<f64>)> = if parallel {
        jobs.into_par_iter().map(exec).collect::<Result<_>>()?
    } else {
        jobs.into_iter().map(exec).collect::<Result<_>>()?
    };
    let mut gaps = vec![Vec::new(); horizons.len()];
    for (i, g) in results {
        gaps[i].push(g);
    }
    let median_gaps: Vec<f64> = gaps
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().flatten().cloned().collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                median(vals)
            }
        })
        .collect();
    let points: Vec<(u64, f64)> = horizons
        .iter()
        .cloned()
        .zip(median_gaps.iter().cloned())
        .collect();
    let fit = rate_fit(&points)?;
    Ok(RateReport {
        horizons: horizons.to_vec(),
        gaps,
        median_gaps,
        fit,
    })
}

/// Parses a CLI value: JSON if it parses, otherwise a bare string.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}
