//! Step-size multipliers applied on top of an optimizer's own step scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Cosine,
    CosineWarmup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_steps: u64,
    pub warmup_steps: u64,
    /// Final multiplier of the cosine phase.
    pub floor: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            total_steps: 1,
            warmup_steps: 0,
            floor: 0.0,
        }
    }
}

impl Schedule {
    pub fn constant(total_steps: u64) -> Self {
        Self {
            total_steps,
            ..Self::default()
        }
    }

    pub fn cosine(total_steps: u64, floor: f64) -> Self {
        Self {
            kind: ScheduleKind::Cosine,
            total_steps,
            warmup_steps: 0,
            floor,
        }
    }

    pub fn cosine_warmup(total_steps: u64, warmup_steps: u64, floor: f64) -> Self {
        Self {
            kind: ScheduleKind::CosineWarmup,
            total_steps,
            warmup_steps,
            floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidConfig(
                "schedule total_steps must be positive".into(),
            ));
        }
        if self.kind == ScheduleKind::CosineWarmup && self.warmup_steps >= self.total_steps {
            return Err(Error::InvalidConfig(
                "warmup_steps must be below total_steps".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            return Err(Error::InvalidConfig(
                "schedule floor must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Multiplier at step `t`, in `[0, 1]`.
    pub fn multiplier<T: Scalar>(&self, t: u64) -> Result<T> {
        if t >= self.total_steps {
            return Err(Error::StepOutOfRange {
                step: t,
                total: self.total_steps,
            });
        }
        let m = match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::Cosine => self.cosine_phase(t, self.total_steps - 1),
            ScheduleKind::CosineWarmup => {
                let w = self.warmup_steps;
                if t < w {
                    (t + 1) as f64 / w as f64
                } else {
                    self.cosine_phase(t - w, self.total_steps - 1 - w)
                }
            }
        };
        Ok(T::lit(m))
    }

    fn cosine_phase(&self, k: u64, span: u64) -> f64 {
        // single-point phase
        if span == 0 {
            return 1.0;
        }
        let frac = k as f64 / span as f64;
        self.floor + (1.0 - self.floor) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}
