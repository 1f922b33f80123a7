//! Neural ODE layers `ż = g(z)` and their reachability.
//!
//! Linear dynamics are collapsed to `ż = Az + c` and handled by the exact
//! star-based direct method. Nonlinear dynamics use fixed-step conservative
//! linearization on zonotopes.

mod dynamics;
mod linear;
mod nonlinear;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{StarSet, Zonotope};
use crate::math;

pub use dynamics::{IntervalMatrix, LinearOdeForm, NodeDynamics};
pub use linear::linear_reach;
pub use nonlinear::{nonlinear_reach, DEFAULT_MAX_ORDER, MAX_REFINEMENTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Only the set at `t_f`.
    FinalSet,
    /// The union over `[0, t_f]`, one set per step.
    Flowpipe,
}

/// Integration horizon and fixed step of a NODE layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeRepr", into = "TimeRepr")]
pub struct TimeConfig {
    t_f: f64,
    step: f64,
    output_mode: OutputMode,
}

#[derive(Serialize, Deserialize)]
struct TimeRepr {
    t_f: f64,
    step: f64,
    output_mode: OutputMode,
}

impl From<TimeConfig> for TimeRepr {
    fn from(t: TimeConfig) -> Self {
        TimeRepr {
            t_f: t.t_f,
            step: t.step,
            output_mode: t.output_mode,
        }
    }
}

impl TryFrom<TimeRepr> for TimeConfig {
    type Error = Error;
    fn try_from(r: TimeRepr) -> Result<Self> {
        TimeConfig::new(r.t_f, r.step, r.output_mode)
    }
}

impl TimeConfig {
    pub fn new(t_f: f64, step: f64, output_mode: OutputMode) -> Result<Self> {
        if !(t_f.is_finite() && t_f > 0.0) {
            return Err(Error::InvalidArgument(format!("final time {t_f} must be positive")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!("step {step} must be positive")));
        }
        if step > t_f * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("step {step} exceeds final time {t_f}")));
        }
        Ok(TimeConfig { t_f, step, output_mode })
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    pub fn with_output_mode(mut self, mode: OutputMode) -> Self {
        self.output_mode = mode;
        self
    }

    /// Step boundaries `0 = t_0 < … < t_N = t_f`; the last step may be short.
    pub fn grid(&self) -> Vec<f64> {
        let q = self.t_f / self.step;
        let n = if (q - math::floor(q + 0.5)).abs() <= 1e-9 * q.max(1.0) {
            math::floor(q + 0.5) as usize
        } else {
            math::ceil(q) as usize
        }
        .max(1);
        let mut t: Vec<f64> = (0..n).map(|k| k as f64 * self.step).collect();
        t.push(self.t_f);
        t
    }
}

/// A set produced by a NODE step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlowSet {
    Star(StarSet),
    Zonotope(Zonotope),
}

impl FlowSet {
    pub fn dim(&self) -> usize {
        match self {
            FlowSet::Star(s) => s.dim(),
            FlowSet::Zonotope(z) => z.dim(),
        }
    }

    /// Star form; zonotopes convert exactly.
    pub fn to_star(&self) -> StarSet {
        match self {
            FlowSet::Star(s) => s.clone(),
            FlowSet::Zonotope(z) => z.to_star(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        match self {
            FlowSet::Star(s) => s.contains(x),
            FlowSet::Zonotope(z) => z.contains(x),
        }
    }
}

/// One flowpipe entry: every trajectory is inside `set` for `t ∈ [t_lo, t_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub t_lo: f64,
    pub t_hi: f64,
    pub set: FlowSet,
    /// Whether the a-posteriori enclosure check passed; always true for the
    /// direct method.
    #[serde(default = "yes")]
    pub enclosure_verified: bool,
}

fn yes() -> bool {
    true
}

/// Reachable sets of a NODE layer in time order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Flowpipe {
    pub steps: Vec<FlowStep>,
}

impl Flowpipe {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&FlowStep> {
        self.steps.last()
    }

    /// Whether every step passed its enclosure check.
    pub fn all_verified(&self) -> bool {
        self.steps.iter().all(|s| s.enclosure_verified)
    }

    /// Steps whose time interval meets `t`.
    pub fn at_time(&self, t: f64) -> impl Iterator<Item = &FlowStep> {
        self.steps.iter().filter(move |s| s.t_lo <= t && t <= s.t_hi)
    }

    /// Builds the output for `mode` from interval-time sets and the set at `t_f`.
    pub(crate) fn assemble(mode: OutputMode, t_f: f64, steps: Vec<FlowStep>, last: FlowSet) -> Flowpipe {
        match mode {
            OutputMode::Flowpipe => Flowpipe { steps },
            OutputMode::FinalSet => Flowpipe {
                steps: vec![FlowStep {
                    t_lo: t_f,
                    t_hi: t_f,
                    set: last,
                    enclosure_verified: steps.iter().all(|s| s.enclosure_verified),
                }],
            },
        }
    }
}

/// A NODE layer: dynamics plus its time configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLayer {
    dynamics: NodeDynamics,
    time: TimeConfig,
    max_order: f64,
}

impl NodeLayer {
    pub fn new(dynamics: NodeDynamics, time: TimeConfig) -> Self {
        NodeLayer {
            dynamics,
            time,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    /// Overrides the zonotope order limit used by nonlinear reach.
    pub fn with_max_order(mut self, max_order: f64) -> Result<Self> {
        if !(max_order >= 1.0) {
            return Err(Error::InvalidArgument(format!("zonotope order {max_order} below 1")));
        }
        self.max_order = max_order;
        Ok(self)
    }

    pub fn dynamics(&self) -> &NodeDynamics {
        &self.dynamics
    }

    pub fn time(&self) -> &TimeConfig {
        &self.time
    }

    pub fn max_order(&self) -> f64 {
        self.max_order
    }

    pub fn with_time(mut self, time: TimeConfig) -> Self {
        self.time = time;
        self
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn method(&self) -> &'static str {
        if self.dynamics.is_linear() {
            "direct"
        } else {
            "zono-f"
        }
    }

    /// Reachable sets from `input`, converting to a zonotope for nonlinear
    /// dynamics.
    pub fn reach(&self, input: &StarSet) -> Result<Flowpipe> {
        if input.dim() != self.dim() {
            return Err(Error::shape(format!(
                "NODE of dimension {} applied to set of dimension {}",
                self.dim(),
                input.dim()
            )));
        }
        if self.dynamics.is_linear() {
            let form = self.dynamics.collapse_linear()?;
            linear_reach(&form, input, &self.time)
        } else {
            let z = input.to_zonotope()?;
            nonlinear_reach(&self.dynamics, &z, &self.time, self.max_order)
        }
    }
}
