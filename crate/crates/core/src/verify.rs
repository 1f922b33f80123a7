//! Safety and classification-robustness checks on reach results.
//!
//! Reachability is sound but incomplete, so verdicts are three-valued: a
//! property `holds` when the reach sets prove it, is `violated` only when a
//! simulated input concretely breaks it, and is `unknown` otherwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::sampling::{boundary_in_box, corners, sample_star, uniform_in_box};
use crate::geometry::{HalfspaceSpec, IntervalBox, StarSet};
use crate::gnode::{GnodeModel, ReachOptions, ReachResult, TaggedSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Unknown,
    /// The nominal input is not classified as its label; robustness is not
    /// assessed.
    Misclassified,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Unknown => "unknown",
            Verdict::Misclassified => "misclassified",
        }
    }
}

/// A concrete input that breaks a property.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub input: Vec<f64>,
    /// The offending value: model output, or the state at `layer`/`time`.
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecResult {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Robustness: per-class output bounds. Safety: range of `normalᵀx` over
    /// the sets that meet the unsafe region.
    pub bounds: Vec<(f64, f64)>,
    /// Safety: the first layer and time interval whose set meets the unsafe
    /// region.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<(f64, f64)>,
}

/// Counterexample search budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FalsifyOptions {
    pub budget: usize,
    pub seed: u64,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        FalsifyOptions { budget: 1000, seed: 0 }
    }
}

/// An ∞-norm perturbation of a nominal input, optionally restricted to a
/// coordinate mask and clamped to a value range.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessQuery {
    nominal: Vec<f64>,
    epsilon: f64,
    label: usize,
    mask: Option<Vec<usize>>,
    clamp: Option<(f64, f64)>,
}

impl RobustnessQuery {
    pub fn new(nominal: Vec<f64>, epsilon: f64, label: usize) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("perturbation radius {epsilon}")));
        }
        if nominal.is_empty() || !crate::math::all_finite(&nominal) {
            return Err(Error::InvalidArgument(
                "nominal input must be finite and non-empty".into(),
            ));
        }
        Ok(RobustnessQuery {
            nominal,
            epsilon,
            label,
            mask: None,
            clamp: None,
        })
    }

    pub fn with_mask(mut self, mask: Vec<usize>) -> Result<Self> {
        if let Some(i) = mask.iter().find(|i| **i >= self.nominal.len()) {
            return Err(Error::InvalidArgument(format!("mask index {i} out of range")));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn with_clamp(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("clamp range [{lo}, {hi}]")));
        }
        self.clamp = Some((lo, hi));
        Ok(self)
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn mask(&self) -> Option<&[usize]> {
        self.mask.as_deref()
    }

    /// The perturbation box; unmasked coordinates stay fixed.
    pub fn input_box(&self) -> Result<IntervalBox> {
        let n = self.nominal.len();
        let mut active = vec![self.mask.is_none(); n];
        if let Some(m) = &self.mask {
            for i in m {
                active[*i] = true;
            }
        }
        let mut lo = self.nominal.clone();
        let mut hi = self.nominal.clone();
        for i in 0..n {
            if active[i] {
                lo[i] -= self.epsilon;
                hi[i] += self.epsilon;
            }
            if let Some((a, b)) = self.clamp {
                lo[i] = lo[i].clamp(a, b);
                hi[i] = hi[i].clamp(a, b);
            }
        }
        IntervalBox::new(lo, hi)
    }

    pub fn input_set(&self) -> Result<StarSet> {
        Ok(StarSet::from_box(&self.input_box()?))
    }
}

/// Which layers' sets a safety property constrains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetSelection {
    Final,
    Layer(usize),
    /// Every layer whose output dimension matches the property.
    Every,
}

/// A property checked on concrete runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Property {
    /// The output's argmax is `label` (ties count as robust).
    Classifies(usize),
    /// No selected layer value lies in the halfspace.
    Avoids(HalfspaceSpec, SetSelection),
}

fn argmax_violation(y: &[f64], label: usize) -> bool {
    y.iter().enumerate().any(|(j, v)| j != label && *v > y[label])
}

fn selected_layers(model: &GnodeModel, dim: usize, sel: SetSelection) -> Result<Vec<usize>> {
    let n = model.layers().len();
    let check = |i: usize| -> Result<usize> {
        if i >= n {
            return Err(Error::InvalidArgument(format!("layer {i} out of range")));
        }
        if model.layers()[i].output_dim() != dim {
            return Err(Error::shape(format!(
                "layer {i} has dimension {}, property has {dim}",
                model.layers()[i].output_dim()
            )));
        }
        Ok(i)
    };
    match sel {
        SetSelection::Final => Ok(vec![check(n - 1)?]),
        SetSelection::Layer(i) => Ok(vec![check(i)?]),
        SetSelection::Every => {
            let v: Vec<usize> = (0..n).filter(|i| model.layers()[*i].output_dim() == dim).collect();
            if v.is_empty() {
                return Err(Error::shape(format!("no layer has dimension {dim}")));
            }
            Ok(v)
        }
    }
}

/// Simulates `x0` and returns the violation it exhibits, if any.
pub fn evaluate(model: &GnodeModel, x0: &[f64], property: &Property) -> Result<Option<Witness>> {
    match property {
        Property::Classifies(label) => {
            let y = model.simulate(x0)?.output;
            if *label >= y.len() {
                return Err(Error::InvalidArgument(format!("label {label} out of range")));
            }
            Ok(argmax_violation(&y, *label).then(|| Witness {
                input: x0.to_vec(),
                point: y,
                layer: None,
                time: None,
            }))
        }
        Property::Avoids(h, sel) => {
            let layers = selected_layers(model, h.dim(), *sel)?;
            let sim = model.simulate_layers(x0)?;
            for i in layers {
                for p in &sim[i] {
                    if h.contains(&p.x) {
                        return Ok(Some(Witness {
                            input: x0.to_vec(),
                            point: p.x.clone(),
                            layer: Some(i),
                            time: p.times.last().map(|(_, t)| *t),
                        }));
                    }
                }
            }
            Ok(None)
        }
    }
}

/// Candidate inputs from `r0`: corners and faces of the predicate box first,
/// then uniform points.
fn candidates(r0: &StarSet, budget: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if r0.num_vars() == 0 {
        return Ok(vec![r0.center().to_vec()]);
    }
    if !r0.has_box_predicate() {
        return sample_star(r0, budget, rng);
    }
    let (lo, hi) = r0.predicate_box()?;
    let pbox = IntervalBox::new(lo, hi)?;
    let n_corner = (budget / 8).max(1).min(budget);
    let n_face = (budget / 4).min(budget - n_corner);
    let mut alphas = corners(&pbox, n_corner, rng);
    alphas.truncate(n_corner);
    alphas.extend(boundary_in_box(&pbox, n_face, rng));
    while alphas.len() < budget {
        alphas.push(uniform_in_box(&pbox, rng));
    }
    alphas.iter().map(|a| r0.point_at(a)).collect()
}

/// Seeded counterexample search over `r0`: corners, faces, then uniform
/// samples, each simulated and checked. Returns the first witness.
pub fn falsify(
    model: &GnodeModel,
    r0: &StarSet,
    property: &Property,
    opts: &FalsifyOptions,
) -> Result<Option<Witness>> {
    if opts.budget == 0 {
        return Err(Error::InvalidArgument("falsification budget must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for x in candidates(r0, opts.budget, &mut rng)? {
        if let Some(w) = evaluate(model, &x, property)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Maps the leading predicate variables of a descendant set back to an
/// input of `r0`, when they are admissible there.
///
/// Layers that only add variables keep the input's variables in front, so
/// an extreme point of the output set often points at a bad input.
fn pull_back(r0: &StarSet, set: &StarSet, direction: &[f64]) -> Option<Vec<f64>> {
    let m = r0.num_vars();
    if set.num_vars() < m {
        return None;
    }
    let (_, alpha) = set.minimize_over_predicate(&set.basis().vecmat(direction).ok()?).ok()?;
    let prefix = &alpha[..m];
    if !r0.predicate_holds(prefix, 1e-9) {
        return None;
    }
    r0.point_at(prefix).ok()
}

fn join_bounds(sets: &[TaggedSet], dim: usize) -> Result<Vec<(f64, f64)>> {
    let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    for s in sets {
        let bx = s.set.box_bounds()?;
        for (j, bj) in b.iter_mut().enumerate() {
            bj.0 = bj.0.min(bx.lower()[j]);
            bj.1 = bj.1.max(bx.upper()[j]);
        }
    }
    Ok(b)
}

/// Classification robustness of `model` around the query's nominal input.
///
/// Holds when the label's lower output bound exceeds every other class's
/// upper bound over all final sets.
pub fn check_robustness(
    model: &GnodeModel,
    q: &RobustnessQuery,
    opts: &ReachOptions,
    fopts: &FalsifyOptions,
) -> Result<SpecResult> {
    let k = model.output_dim();
    if k < 2 {
        return Err(Error::InvalidArgument("robustness needs at least two classes".into()));
    }
    if q.label >= k {
        return Err(Error::InvalidArgument(format!("label {} for {k} classes", q.label)));
    }
    let nominal = model.simulate(&q.nominal)?.output;
    if argmax_violation(&nominal, q.label) {
        return Ok(SpecResult {
            verdict: Verdict::Misclassified,
            witness: Some(Witness {
                input: q.nominal.clone(),
                point: nominal,
                layer: None,
                time: None,
            }),
            bounds: Vec::new(),
            layer: None,
            times: None,
        });
    }
    let r0 = q.input_set()?;
    let result = model.reach(&r0, opts)?;
    let sets = result.final_sets();
    if sets.is_empty() {
        return Err(Error::EmptySet);
    }
    let bounds = join_bounds(sets, k)?;
    let lb = bounds[q.label].0;
    let separated = (0..k).filter(|j| *j != q.label).all(|j| lb > bounds[j].1);
    if separated {
        return Ok(SpecResult {
            verdict: Verdict::Holds,
            witness: None,
            bounds,
            layer: None,
            times: None,
        });
    }
    let property = Property::Classifies(q.label);
    let mut guided = Vec::new();
    for j in (0..k).filter(|j| *j != q.label && bounds[*j].1 >= lb) {
        let mut dir = vec![0.0; k];
        dir[q.label] = 1.0;
        dir[j] = -1.0;
        guided.extend(sets.iter().filter_map(|s| pull_back(&r0, &s.set, &dir)));
    }
    let mut witness = None;
    for x in guided {
        if let Some(w) = evaluate(model, &x, &property)? {
            witness = Some(w);
            break;
        }
    }
    if witness.is_none() {
        witness = falsify(model, &r0, &property, fopts)?;
    }
    Ok(SpecResult {
        verdict: if witness.is_some() {
            Verdict::Violated
        } else {
            Verdict::Unknown
        },
        witness,
        bounds,
        layer: None,
        times: None,
    })
}

/// Safety against the unsafe halfspace `h` over the selected layers.
///
/// Holds when no selected set meets `h`; otherwise the first meeting set's
/// layer and time interval are reported and a counterexample is searched
/// for among simulations from the result's input set.
pub fn check_safety(
    model: &GnodeModel,
    result: &ReachResult,
    h: &HalfspaceSpec,
    selection: SetSelection,
    fopts: &FalsifyOptions,
) -> Result<SpecResult> {
    if result.layers.len() != model.layers().len() {
        return Err(Error::shape("reach result and model have different layer counts"));
    }
    let layers = selected_layers(model, h.dim(), selection)?;
    let mut hit: Option<(usize, (f64, f64))> = None;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut guided = Vec::new();
    for i in layers {
        for s in &result.layers[i].sets {
            if s.set.intersect_halfspace(h)?.is_none() {
                continue;
            }
            let (lo, hi) = s.set.linear_range(h.normal())?;
            range = (range.0.min(lo), range.1.max(hi));
            let times = s.tags.last().map_or((f64::NAN, f64::NAN), |t| (t.t_lo, t.t_hi));
            let earlier = match hit {
                None => true,
                Some((l, (t0, _))) => i < l || (i == l && times.0 < t0),
            };
            if earlier {
                hit = Some((i, times));
            }
            if let Some(x) = pull_back(&result.input, &s.set, h.normal()) {
                guided.push(x);
            }
        }
    }
    let Some((layer, times)) = hit else {
        return Ok(SpecResult {
            verdict: Verdict::Holds,
            witness: None,
            bounds: Vec::new(),
            layer: None,
            times: None,
        });
    };
    let property = Property::Avoids(h.clone(), selection);
    let mut witness = None;
    for x in guided {
        if let Some(w) = evaluate(model, &x, &property)? {
            witness = Some(w);
            break;
        }
    }
    if witness.is_none() {
        witness = falsify(model, &result.input, &property, fopts)?;
    }
    Ok(SpecResult {
        verdict: if witness.is_some() {
            Verdict::Violated
        } else {
            Verdict::Unknown
        },
        witness,
        bounds: vec![range],
        layer: Some(layer),
        times: (!times.0.is_nan()).then_some(times),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::gnode::Layer;
    use crate::layers::FcLayer;
    use crate::linalg::Matrix;
    use crate::node::{NodeDynamics, NodeLayer, OutputMode, TimeConfig};

    fn identity2() -> GnodeModel {
        GnodeModel::new(vec![Layer::Fc(
            FcLayer::new(Matrix::identity(2), vec![0.0, 0.0], Activation::Linear).unwrap(),
        )])
        .unwrap()
    }

    fn drift(c: f64, t_f: f64, mode: OutputMode) -> GnodeModel {
        let l = FcLayer::new(Matrix::zeros(1, 1), vec![c], Activation::Linear).unwrap();
        let n = NodeLayer::new(
            NodeDynamics::new(vec![l]).unwrap(),
            TimeConfig::new(t_f, 0.01, mode).unwrap(),
        );
        GnodeModel::new(vec![Layer::Node(n)]).unwrap()
    }

    #[test]
    fn identity_separates_at_small_radius() {
        let q = RobustnessQuery::new(vec![1.0, 0.0], 0.4, 0).unwrap();
        let r = check_robustness(&identity2(), &q, &ReachOptions::default(), &FalsifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!((r.bounds[0].0 - 0.6).abs() < 1e-12);
        assert!((r.bounds[1].1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn identity_breaks_at_large_radius() {
        let q = RobustnessQuery::new(vec![1.0, 0.0], 0.6, 0).unwrap();
        let r = check_robustness(&identity2(), &q, &ReachOptions::default(), &FalsifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = r.witness.unwrap();
        assert!((w.input[0] - 0.4).abs() < 1e-9 && (w.input[1] - 0.6).abs() < 1e-9);
        let y = identity2().simulate(&w.input).unwrap().output;
        assert!(y[1] > y[0]);
    }

    #[test]
    fn zero_radius_follows_nominal_class() {
        let q = RobustnessQuery::new(vec![1.0, 0.0], 0.0, 0).unwrap();
        let r = check_robustness(&identity2(), &q, &ReachOptions::default(), &FalsifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let q = RobustnessQuery::new(vec![1.0, 0.0], 0.0, 1).unwrap();
        let r = check_robustness(&identity2(), &q, &ReachOptions::default(), &FalsifyOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Misclassified);
    }

    #[test]
    fn mask_and_clamp_shape_the_box() {
        let q = RobustnessQuery::new(vec![0.0, 250.0, 7.0], 10.0, 0)
            .unwrap()
            .with_mask(vec![0, 1])
            .unwrap()
            .with_clamp(0.0, 255.0)
            .unwrap();
        let b = q.input_box().unwrap();
        assert_eq!(b.lower(), &[0.0, 240.0, 7.0]);
        assert_eq!(b.upper(), &[10.0, 255.0, 7.0]);
        assert!(RobustnessQuery::new(vec![0.0], 1.0, 0)
            .unwrap()
            .with_mask(vec![3])
            .is_err());
    }

    #[test]
    fn safety_disjoint_from_final_set() {
        let m = identity2();
        let r = m.reach(&StarSet::unit_box(2), &ReachOptions::default()).unwrap();
        let h = HalfspaceSpec::new(vec![1.0, 0.0], -2.0).unwrap();
        let s = check_safety(&m, &r, &h, SetSelection::Final, &FalsifyOptions::default()).unwrap();
        assert_eq!(s.verdict, Verdict::Holds);
    }

    #[test]
    fn frozen_flowpipe_stays_safe() {
        let m = drift(0.0, 1.0, OutputMode::Flowpipe);
        let r0 = StarSet::from_box(&IntervalBox::new(vec![0.0], vec![1.0]).unwrap());
        let r = m.reach(&r0, &ReachOptions::default()).unwrap();
        let h = HalfspaceSpec::new(vec![1.0], -1.0).unwrap();
        let s = check_safety(&m, &r, &h, SetSelection::Every, &FalsifyOptions::default()).unwrap();
        assert_eq!(s.verdict, Verdict::Holds);
    }

    #[test]
    fn drift_crosses_threshold() {
        let m = drift(1.0, 2.0, OutputMode::Flowpipe);
        let r = m.reach(&StarSet::point(vec![0.0]), &ReachOptions::default()).unwrap();
        let h = HalfspaceSpec::new(vec![-1.0], -1.5).unwrap();
        let s = check_safety(&m, &r, &h, SetSelection::Every, &FalsifyOptions::default()).unwrap();
        assert_eq!(s.verdict, Verdict::Violated);
        let w = s.witness.unwrap();
        // samples are h/2 apart
        assert!(w.time.unwrap() >= 1.5 - 1e-9 && w.time.unwrap() <= 1.505 + 1e-9);
        assert!(w.point[0] >= 1.5);
        let (t0, t1) = s.times.unwrap();
        assert!(t0 <= 1.5 && 1.5 <= t1 + 1e-9);
    }

    #[test]
    fn falsify_is_seeded() {
        let r0 = RobustnessQuery::new(vec![1.0, 0.0], 0.6, 0)
            .unwrap()
            .input_set()
            .unwrap();
        let p = Property::Classifies(0);
        let f = FalsifyOptions { budget: 1000, seed: 7 };
        let a = falsify(&identity2(), &r0, &p, &f).unwrap();
        let b = falsify(&identity2(), &r0, &p, &f).unwrap();
        assert!(a.is_some());
        assert_eq!(a, b);
        let h = HalfspaceSpec::new(vec![1.0, 0.0], -10.0).unwrap();
        let p = Property::Avoids(h, SetSelection::Final);
        assert!(falsify(&identity2(), &r0, &p, &f).unwrap().is_none());
    }
}
