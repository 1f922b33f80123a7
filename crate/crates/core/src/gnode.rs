//! GNODE models: ordered mixes of fully-connected and NODE layers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{IntervalBox, StarSet, DEFAULT_BRANCH_CAP, TAU_MEM};
use crate::layers::{FcLayer, ReachMode};
use crate::node::{Flowpipe, NodeLayer, OutputMode};
use crate::ode::{integrate, OdeOptions};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Fc(FcLayer),
    Node(NodeLayer),
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        match self {
            Layer::Fc(l) => l.input_dim(),
            Layer::Node(l) => l.dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Layer::Fc(l) => l.output_dim(),
            Layer::Node(l) => l.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Fc(_) => "fc",
            Layer::Node(_) => "node",
        }
    }
}

impl From<FcLayer> for Layer {
    fn from(l: FcLayer) -> Self {
        Layer::Fc(l)
    }
}

impl From<NodeLayer> for Layer {
    fn from(l: NodeLayer) -> Self {
        Layer::Node(l)
    }
}

/// An ordered sequence of layers with compatible dimensions.
///
/// Models without NODE layers are accepted as the degenerate case of a plain
/// feed-forward network.
#[derive(Clone, Debug, PartialEq)]
pub struct GnodeModel {
    layers: Vec<Layer>,
}

/// Position of a set inside a NODE flowpipe: produced by layer `layer` and
/// valid for `t ∈ [t_lo, t_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTag {
    pub layer: usize,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// A reach set together with the flowpipe steps it descends from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedSet {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TimeTag>,
    pub set: StarSet,
}

/// A simulated point with the NODE sample times it descends from.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedPoint {
    /// `(layer, t)` for each flowpipe-mode NODE passed.
    pub times: Vec<(usize, f64)>,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerResult {
    pub index: usize,
    pub kind: &'static str,
    pub method: &'static str,
    pub sets: Vec<TaggedSet>,
    /// One flowpipe per incoming set; NODE layers only.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flowpipes: Vec<Flowpipe>,
    /// Wall time in seconds; recorded only with the `std` feature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Per-layer reachable sets `R_1 … R_N` of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachResult {
    pub mode: ReachMode,
    pub input: StarSet,
    pub layers: Vec<LayerResult>,
}

impl ReachResult {
    /// `R_N`; empty when the input set was empty.
    pub fn final_sets(&self) -> &[TaggedSet] {
        self.layers.last().map_or(&[], |l| l.sets.as_slice())
    }

    pub fn methods(&self) -> Vec<&'static str> {
        let mut m: Vec<&'static str> = self.layers.iter().map(|l| l.method).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn total_seconds(&self) -> Option<f64> {
        self.layers.iter().map(|l| l.seconds).sum()
    }

    /// Interval hull of the final sets.
    pub fn final_box(&self) -> Result<IntervalBox> {
        let mut acc: Option<IntervalBox> = None;
        for s in self.final_sets() {
            let b = s.set.box_bounds()?;
            acc = Some(match acc {
                None => b,
                Some(a) => a.hull(&b)?,
            });
        }
        acc.ok_or(Error::EmptySet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReachOptions {
    pub mode: ReachMode,
    pub branch_cap: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            mode: ReachMode::ApproxStar,
            branch_cap: DEFAULT_BRANCH_CAP,
        }
    }
}

impl ReachOptions {
    pub fn new(mode: ReachMode) -> Self {
        ReachOptions {
            mode,
            ..Default::default()
        }
    }
}

/// Result of a concrete run.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub output: Vec<f64>,
    /// `(layer, samples)` for every NODE layer, samples as `(t, z(t))`.
    pub traces: Vec<(usize, crate::ode::Trace)>,
}

#[cfg(feature = "std")]
struct Timer(std::time::Instant);
#[cfg(feature = "std")]
impl Timer {
    fn start() -> Self {
        Timer(std::time::Instant::now())
    }
    fn seconds(&self) -> Option<f64> {
        Some(self.0.elapsed().as_secs_f64())
    }
}
#[cfg(not(feature = "std"))]
struct Timer;
#[cfg(not(feature = "std"))]
impl Timer {
    fn start() -> Self {
        Timer
    }
    fn seconds(&self) -> Option<f64> {
        None
    }
}

impl GnodeModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("model without layers"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer {} outputs {} values, layer {} expects {}",
                    k,
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                ))
                .at_layer(k + 1));
            }
        }
        Ok(GnodeModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_node_layers(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Node(_))).count()
    }

    pub fn num_fc_layers(&self) -> usize {
        self.layers.len() - self.num_node_layers()
    }

    /// Replaces every NODE's time configuration through `f`.
    pub fn map_time(
        &self,
        f: impl Fn(&crate::node::TimeConfig) -> Result<crate::node::TimeConfig>,
    ) -> Result<GnodeModel> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Node(n) => Ok(Layer::Node(n.clone().with_time(f(n.time())?))),
                other => Ok(other.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        GnodeModel::new(layers)
    }

    /// Layer-by-layer reachability from `r0`.
    pub fn reach(&self, r0: &StarSet, opts: &ReachOptions) -> Result<ReachResult> {
        if r0.dim() != self.input_dim() {
            return Err(Error::shape(format!(
                "model expects input dimension {}, set has {}",
                self.input_dim(),
                r0.dim()
            )));
        }
        let mut current = vec![TaggedSet {
            tags: Vec::new(),
            set: r0.clone(),
        }];
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let timer = Timer::start();
            let (sets, flowpipes, method) = self.reach_layer(i, layer, current, opts).map_err(|e| e.at_layer(i))?;
            layers.push(LayerResult {
                index: i,
                kind: layer.kind(),
                method,
                sets: sets.clone(),
                flowpipes,
                seconds: timer.seconds(),
            });
            current = sets;
        }
        Ok(ReachResult {
            mode: opts.mode,
            input: r0.clone(),
            layers,
        })
    }

    fn reach_layer(
        &self,
        index: usize,
        layer: &Layer,
        inputs: Vec<TaggedSet>,
        opts: &ReachOptions,
    ) -> Result<(Vec<TaggedSet>, Vec<Flowpipe>, &'static str)> {
        match layer {
            Layer::Fc(l) => {
                let method = if l.activation().is_linear() {
                    "affine"
                } else {
                    opts.mode.label()
                };
                let mut out = Vec::new();
                for t in inputs {
                    let cap = opts.branch_cap.saturating_sub(out.len());
                    for s in l.reach(core::slice::from_ref(&t.set), opts.mode, cap)? {
                        out.push(TaggedSet {
                            tags: t.tags.clone(),
                            set: s,
                        });
                    }
                    if out.len() > opts.branch_cap {
                        return Err(Error::BranchCap { cap: opts.branch_cap });
                    }
                }
                Ok((out, Vec::new(), method))
            }
            Layer::Node(n) => {
                let mut out = Vec::new();
                let mut pipes = Vec::with_capacity(inputs.len());
                for t in inputs {
                    let fp = match n.reach(&t.set) {
                        Ok(fp) => fp,
                        Err(Error::EmptySet) => continue,
                        Err(e) => return Err(e),
                    };
                    match n.time().output_mode() {
                        OutputMode::FinalSet => {
                            for st in &fp.steps {
                                out.push(TaggedSet {
                                    tags: t.tags.clone(),
                                    set: st.set.to_star(),
                                });
                            }
                        }
                        OutputMode::Flowpipe => {
                            for st in &fp.steps {
                                let mut tags = t.tags.clone();
                                tags.push(TimeTag {
                                    layer: index,
                                    t_lo: st.t_lo,
                                    t_hi: st.t_hi,
                                });
                                out.push(TaggedSet {
                                    tags,
                                    set: st.set.to_star(),
                                });
                            }
                        }
                    }
                    pipes.push(fp);
                }
                Ok((out, pipes, n.method()))
            }
        }
    }

    /// Concrete evaluation with RK45 for NODE layers; flowpipe-mode NODEs pass
    /// their state at `t_f` on.
    pub fn simulate(&self, x0: &[f64]) -> Result<Simulation> {
        self.check_input(x0)?;
        let mut x = x0.to_vec();
        let mut traces = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Fc(l) => x = l.eval(&x).map_err(|e| e.at_layer(i))?,
                Layer::Node(n) => {
                    let (end, samples) = integrate_node(n, &x).map_err(|e| e.at_layer(i))?;
                    traces.push((i, samples));
                    x = end;
                }
            }
        }
        Ok(Simulation { output: x, traces })
    }

    /// Concrete images at every layer, branching at flowpipe-mode NODEs into
    /// one point per sample time (spacing `h/2`).
    pub fn simulate_layers(&self, x0: &[f64]) -> Result<Vec<Vec<TaggedPoint>>> {
        self.check_input(x0)?;
        let mut current = vec![TaggedPoint {
            times: Vec::new(),
            x: x0.to_vec(),
        }];
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(current.len());
            for p in &current {
                match layer {
                    Layer::Fc(l) => next.push(TaggedPoint {
                        times: p.times.clone(),
                        x: l.eval(&p.x).map_err(|e| e.at_layer(i))?,
                    }),
                    Layer::Node(n) => {
                        let (end, samples) = integrate_node(n, &p.x).map_err(|e| e.at_layer(i))?;
                        match n.time().output_mode() {
                            OutputMode::FinalSet => next.push(TaggedPoint {
                                times: p.times.clone(),
                                x: end,
                            }),
                            OutputMode::Flowpipe => {
                                for (t, z) in samples {
                                    let mut times = p.times.clone();
                                    times.push((i, t));
                                    next.push(TaggedPoint { times, x: z });
                                }
                            }
                        }
                    }
                }
            }
            out.push(next.clone());
            current = next;
        }
        Ok(out)
    }

    fn check_input(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "model expects input dimension {}, point has {}",
                self.input_dim(),
                x0.len()
            )));
        }
        if !crate::math::all_finite(x0) {
            return Err(Error::NonFinite("input point".into()));
        }
        Ok(())
    }
}

/// RK45 run of one NODE layer with samples every half step.
pub fn integrate_node(n: &NodeLayer, z0: &[f64]) -> Result<(Vec<f64>, crate::ode::Trace)> {
    let tc = n.time();
    let grid = tc.grid();
    let mut samples = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        samples.push(w[0]);
        samples.push(0.5 * (w[0] + w[1]));
    }
    samples.push(tc.t_f());
    let d = n.dynamics();
    integrate(|z| d.eval(z), z0, tc.t_f(), &samples, &OdeOptions::default())
}

/// A simulated point missing from every compatible reach set.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainmentFailure {
    pub layer: usize,
    pub times: Vec<(usize, f64)>,
    pub point: Vec<f64>,
}

/// Checks simulated points against a reach result, layer by layer.
pub struct SoundnessChecker<'a> {
    result: &'a ReachResult,
    boxes: Vec<Vec<IntervalBox>>,
}

impl<'a> SoundnessChecker<'a> {
    pub fn new(result: &'a ReachResult) -> Result<Self> {
        let boxes = result
            .layers
            .iter()
            .map(|l| l.sets.iter().map(|s| s.set.cheap_box()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(SoundnessChecker { result, boxes })
    }

    /// Simulates `model` from `x0` and returns every point that no reach set
    /// with matching time tags contains.
    pub fn check(&self, model: &GnodeModel, x0: &[f64]) -> Result<Vec<ContainmentFailure>> {
        if self.result.layers.len() != model.layers().len() {
            return Err(Error::shape("reach result and model have different layer counts"));
        }
        let mut failures = Vec::new();
        for (i, points) in model.simulate_layers(x0)?.into_iter().enumerate() {
            for p in points {
                if !self.contains(i, &p)? {
                    failures.push(ContainmentFailure {
                        layer: i,
                        times: p.times,
                        point: p.x,
                    });
                }
            }
        }
        Ok(failures)
    }

    /// Whether layer `i`'s sets contain the tagged point.
    pub fn contains(&self, i: usize, p: &TaggedPoint) -> Result<bool> {
        let layer = &self.result.layers[i];
        for (s, b) in layer.sets.iter().zip(&self.boxes[i]) {
            if !tags_match(&s.tags, &p.times) || !box_admits(b, &p.x) {
                continue;
            }
            if s.set.contains(&p.x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn tags_match(tags: &[TimeTag], times: &[(usize, f64)]) -> bool {
    tags.len() == times.len()
        && tags.iter().zip(times).all(|(tag, (l, t))| {
            let eps = 1e-12 * t.abs().max(1.0);
            tag.layer == *l && tag.t_lo - eps <= *t && *t <= tag.t_hi + eps
        })
}

fn box_admits(b: &IntervalBox, x: &[f64]) -> bool {
    x.iter().zip(b.lower().iter().zip(b.upper())).all(|(v, (l, u))| {
        let tol = TAU_MEM * (1.0 + v.abs());
        *l - tol <= *v && *v <= *u + tol
    })
}

/// Human-readable one-line description of a model's layers, e.g.
/// `relu(64) | NODE[tanh(10)-fc(2)] | fc(10)`.
pub fn describe(model: &GnodeModel) -> String {
    let mut parts = Vec::new();
    for l in model.layers() {
        match l {
            Layer::Fc(f) => parts.push(describe_fc(f)),
            Layer::Node(n) => {
                let inner: Vec<String> = n.dynamics().layers().iter().map(describe_fc).collect();
                parts.push(format!("NODE[{}]", inner.join("-")));
            }
        }
    }
    parts.join(" | ")
}

/// `tanh(10)`, or runs of equal activations joined by `+` for per-neuron layers.
pub fn describe_fc(f: &FcLayer) -> String {
    let label = |a: crate::activation::Activation| {
        if a == crate::activation::Activation::Linear {
            "fc"
        } else {
            a.name()
        }
    };
    match f.activation() {
        crate::activation::LayerActivation::Uniform(_) => format!("{}({})", f.activation_label(), f.output_dim()),
        crate::activation::LayerActivation::PerNeuron(v) => {
            let mut runs: Vec<(&str, usize)> = Vec::new();
            for a in v {
                match runs.last_mut() {
                    Some((name, k)) if *name == label(*a) => *k += 1,
                    _ => runs.push((label(*a), 1)),
                }
            }
            runs.iter()
                .map(|(n, k)| format!("{n}({k})"))
                .collect::<Vec<_>>()
                .join("+")
        }
    }
}
