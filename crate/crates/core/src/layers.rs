//! Fully-connected layers and their star-set reachability.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activation::{Activation, LayerActivation};
use crate::error::{Error, Result};
use crate::geometry::StarSet;
use crate::linalg::Matrix;
use crate::math;

/// Outward slack added to smooth-activation relaxation lines.
const RELAX_SLACK: f64 = 1e-12;
/// Bound widths below this are relaxed to a plain box variable.
const NARROW_WIDTH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachMode {
    /// One over-approximating star per input star.
    ApproxStar,
    /// Exhaustive branch enumeration; piecewise-linear activations only.
    ExactStar,
}

impl ReachMode {
    pub fn label(self) -> &'static str {
        match self {
            ReachMode::ApproxStar => "approx-star",
            ReachMode::ExactStar => "exact-star",
        }
    }
}

/// `x ↦ σ(Wx + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FcLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: LayerActivation,
}

impl FcLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: impl Into<LayerActivation>) -> Result<Self> {
        let activation = activation.into();
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::shape("layer with empty weight matrix"));
        }
        if weights.rows() != bias.len() {
            return Err(Error::shape(format!(
                "weight matrix has {} rows, bias has {} entries",
                weights.rows(),
                bias.len()
            )));
        }
        if !weights.is_finite() || !math::all_finite(&bias) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        activation.validate(weights.rows())?;
        Ok(FcLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> &LayerActivation {
        &self.activation
    }

    /// Short label in architecture notation: `fc` for linear, else the
    /// activation name, `mixed` for per-neuron activations.
    pub fn activation_label(&self) -> &'static str {
        match &self.activation {
            LayerActivation::Uniform(Activation::Linear) => "fc",
            LayerActivation::Uniform(a) => a.name(),
            LayerActivation::PerNeuron(_) => "mixed",
        }
    }

    /// Pre-activation `Wx + b`.
    pub fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.weights.matvec(x)?;
        for (yi, b) in y.iter_mut().zip(&self.bias) {
            *yi += b;
        }
        Ok(y)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.affine(x)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.activation.at(i).eval(*yi);
        }
        Ok(y)
    }

    pub fn supports(&self, mode: ReachMode) -> bool {
        match mode {
            ReachMode::ApproxStar => true,
            ReachMode::ExactStar => self
                .activation
                .all(self.output_dim())
                .all(Activation::is_piecewise_linear),
        }
    }

    /// Star reachability of a list of input stars.
    ///
    /// Empty input stars contribute nothing. Exact mode fails once the
    /// output list would exceed `branch_cap` stars.
    pub fn reach(&self, inputs: &[StarSet], mode: ReachMode, branch_cap: usize) -> Result<Vec<StarSet>> {
        if !self.supports(mode) {
            return Err(Error::Unsupported(format!(
                "exact-star reachability needs piecewise-linear activations, layer uses {}",
                self.activation
                    .all(self.output_dim())
                    .find(|a| !a.is_piecewise_linear())
                    .map_or("?", Activation::name)
            )));
        }
        let mut out = Vec::new();
        for s in inputs {
            if s.dim() != self.input_dim() {
                return Err(Error::shape(format!(
                    "layer expects dimension {}, set has {}",
                    self.input_dim(),
                    s.dim()
                )));
            }
            let y = s.affine_map(&self.weights, &self.bias)?;
            let result = match mode {
                ReachMode::ApproxStar => self.approx_activation(y).map(|s| vec![s]),
                ReachMode::ExactStar => self.exact_activation(y, branch_cap.saturating_sub(out.len())),
            };
            match result {
                Ok(stars) => out.extend(stars),
                Err(Error::EmptySet) => {}
                Err(e) => return Err(e),
            }
            if out.len() > branch_cap {
                return Err(Error::BranchCap { cap: branch_cap });
            }
        }
        Ok(out)
    }

    fn approx_activation(&self, mut s: StarSet) -> Result<StarSet> {
        for i in 0..self.output_dim() {
            s = approx_step(s, i, self.activation.at(i))?;
        }
        Ok(s)
    }

    fn exact_activation(&self, s: StarSet, cap: usize) -> Result<Vec<StarSet>> {
        let mut stars = vec![s];
        for i in 0..self.output_dim() {
            let act = self.activation.at(i);
            if act == Activation::Linear {
                continue;
            }
            let mut next = Vec::with_capacity(stars.len());
            for s in stars {
                next.extend(exact_step(s, i, act)?);
                if next.len() > cap {
                    return Err(Error::BranchCap { cap });
                }
            }
            stars = next;
        }
        Ok(stars)
    }
}

/// Bounds of dimension `i`, by LP unless the predicate bounds already settle
/// the question: a box predicate makes them exact, and for piecewise-linear
/// activations an interval that avoids every kink fixes the linear piece.
fn neuron_bounds(s: &StarSet, i: usize, kinks: Option<&[f64]>) -> Result<(f64, f64)> {
    if let Some((lo, hi)) = s.interval_bounds(i) {
        if s.has_box_predicate() && lo.is_finite() && hi.is_finite() {
            return Ok((lo, hi));
        }
        if let Some(k) = kinks {
            if lo.is_finite() && hi.is_finite() && !k.iter().any(|k| lo < *k && *k < hi) {
                return Ok((lo, hi));
            }
        }
    }
    s.bounds(i)
}

/// One approx-star activation step on neuron `i`.
pub fn approx_step(s: StarSet, i: usize, act: Activation) -> Result<StarSet> {
    match act {
        Activation::Linear => Ok(s),
        Activation::Relu => {
            let (lo, hi) = neuron_bounds(&s, i, Some(&[0.0]))?;
            Ok(relu_step_approx(s, i, lo, hi))
        }
        Activation::LeakyRelu(slope) => {
            let (lo, hi) = neuron_bounds(&s, i, Some(&[0.0]))?;
            Ok(leaky_step_approx(s, i, slope, lo, hi))
        }
        Activation::Satlin => {
            let (lo, hi) = neuron_bounds(&s, i, Some(&[0.0, 1.0]))?;
            Ok(satlin_step_approx(s, i, lo, hi))
        }
        Activation::Tanh | Activation::Sigmoid => {
            let (lo, hi) = neuron_bounds(&s, i, None)?;
            smooth_step_approx(s, i, act, lo, hi)
        }
    }
}

/// Adds `y ≤ a + k x` (or `≥` when `upper` is false) between dimension `x_dim`'s
/// current linear form and predicate variable `y_var`.
fn add_line(s: &mut StarSet, x: (f64, &[f64]), y_var: usize, k: f64, a: f64, upper: bool, slack: f64) {
    let (c, v) = x;
    let m = s.num_vars();
    let mut row = vec![0.0; m];
    let sign = if upper { 1.0 } else { -1.0 };
    for (r, vj) in row.iter_mut().zip(v) {
        *r = -sign * k * vj;
    }
    row[y_var] += sign;
    s.push_constraint(&row, sign * (a + k * c) + slack);
}

/// Introduces `y ∈ [ylo, yhi]` for dimension `i`, returns the old linear form
/// of `x_i` and the new variable index.
fn fresh_output(s: &mut StarSet, i: usize, ylo: f64, yhi: f64) -> (f64, Vec<f64>, usize) {
    let var = s.push_variable(ylo, yhi);
    let (c, v) = s.dimension_form(i);
    let x = (c, v.to_vec());
    s.bind_dimension(i, var);
    (x.0, x.1, var)
}

/// ReLU triangle relaxation on dimension `i` given its bounds.
pub fn relu_step_approx(mut s: StarSet, i: usize, lo: f64, hi: f64) -> StarSet {
    assert!(lo <= hi, "neuron bounds [{lo}, {hi}]");
    if lo >= 0.0 {
        return s;
    }
    if hi <= 0.0 {
        s.pin_dimension(i, 0.0);
        return s;
    }
    let (c, v, y) = fresh_output(&mut s, i, 0.0, hi);
    // y ≥ x
    add_line(&mut s, (c, &v), y, 1.0, 0.0, false, 0.0);
    // y ≤ hi (x − lo) / (hi − lo)
    let k = hi / (hi - lo);
    add_line(&mut s, (c, &v), y, k, -k * lo, true, 0.0);
    s
}

/// Leaky-ReLU relaxation: `y ≥ x`, `y ≥ γx`, below the chord.
pub fn leaky_step_approx(mut s: StarSet, i: usize, slope: f64, lo: f64, hi: f64) -> StarSet {
    assert!(lo <= hi, "neuron bounds [{lo}, {hi}]");
    if lo >= 0.0 {
        return s;
    }
    if hi <= 0.0 {
        s.scale_dimension(i, slope);
        return s;
    }
    let (c, v, y) = fresh_output(&mut s, i, slope * lo, hi);
    add_line(&mut s, (c, &v), y, 1.0, 0.0, false, 0.0);
    add_line(&mut s, (c, &v), y, slope, 0.0, false, 0.0);
    let k = (hi - slope * lo) / (hi - lo);
    add_line(&mut s, (c, &v), y, k, slope * lo - k * lo, true, 0.0);
    s
}

/// Convex hull of the clamp-to-`[0, 1]` graph over `[lo, hi]`.
pub fn satlin_step_approx(mut s: StarSet, i: usize, lo: f64, hi: f64) -> StarSet {
    assert!(lo <= hi, "neuron bounds [{lo}, {hi}]");
    if hi <= 0.0 {
        s.pin_dimension(i, 0.0);
        return s;
    }
    if lo >= 1.0 {
        s.pin_dimension(i, 1.0);
        return s;
    }
    if lo >= 0.0 && hi <= 1.0 {
        return s;
    }
    if lo < 0.0 && hi <= 1.0 {
        return relu_step_approx(s, i, lo, hi);
    }
    if lo >= 0.0 {
        // 0 ≤ lo < 1 < hi
        let (c, v, y) = fresh_output(&mut s, i, lo, 1.0);
        add_line(&mut s, (c, &v), y, 1.0, 0.0, true, 0.0);
        let k = (1.0 - lo) / (hi - lo);
        add_line(&mut s, (c, &v), y, k, lo - k * lo, false, 0.0);
        return s;
    }
    // lo < 0 < 1 < hi
    let (c, v, y) = fresh_output(&mut s, i, 0.0, 1.0);
    add_line(&mut s, (c, &v), y, 1.0 / hi, 0.0, false, 0.0);
    let k = 1.0 / (1.0 - lo);
    add_line(&mut s, (c, &v), y, k, -k * lo, true, 0.0);
    s
}

/// Secant/tangent relaxation of tanh or sigmoid on dimension `i`.
///
/// On a concave piece (`lo ≥ 0`) the secant bounds from below and the
/// tangents at both ends from above; a convex piece (`hi ≤ 0`) mirrors this.
/// Across the inflection point each side gets one line through its endpoint
/// whose slope is the smaller of the end tangent and the secant.
pub fn smooth_step_approx(mut s: StarSet, i: usize, act: Activation, lo: f64, hi: f64) -> Result<StarSet> {
    if !matches!(act, Activation::Tanh | Activation::Sigmoid) {
        return Err(Error::InvalidArgument(format!(
            "{} has no smooth relaxation",
            act.name()
        )));
    }
    assert!(lo <= hi, "neuron bounds [{lo}, {hi}]");
    let (flo, fhi) = (act.eval(lo), act.eval(hi));
    if lo == hi {
        s.pin_dimension(i, flo);
        return Ok(s);
    }
    let slack = RELAX_SLACK * (1.0 + lo.abs() + hi.abs());
    let (ylo, yhi) = (math::down(flo - slack), math::up(fhi + slack));
    if hi - lo < NARROW_WIDTH {
        fresh_output(&mut s, i, ylo, yhi);
        return Ok(s);
    }
    let (dlo, dhi) = (act.derivative(lo)?, act.derivative(hi)?);
    let secant = (fhi - flo) / (hi - lo);
    // the inflection point of both functions is at 0
    let (c, v, y) = fresh_output(&mut s, i, ylo, yhi);
    let x = (c, v.as_slice());
    if lo >= 0.0 {
        add_line(&mut s, x, y, secant, flo - secant * lo, false, slack);
        add_line(&mut s, x, y, dlo, flo - dlo * lo, true, slack);
        add_line(&mut s, x, y, dhi, fhi - dhi * hi, true, slack);
    } else if hi <= 0.0 {
        add_line(&mut s, x, y, secant, flo - secant * lo, true, slack);
        add_line(&mut s, x, y, dlo, flo - dlo * lo, false, slack);
        add_line(&mut s, x, y, dhi, fhi - dhi * hi, false, slack);
    } else {
        let kl = dlo.min(secant);
        let ku = dhi.min(secant);
        add_line(&mut s, x, y, kl, flo - kl * lo, false, slack);
        add_line(&mut s, x, y, ku, fhi - ku * hi, true, slack);
    }
    Ok(s)
}

/// Halfspace `sign · x_i ≤ offset` applied to a star without a feasibility check.
fn cut(s: &StarSet, i: usize, sign: f64, offset: f64) -> Option<StarSet> {
    let (c, v) = s.dimension_form(i);
    let row: Vec<f64> = v.iter().map(|x| sign * x).collect();
    let rhs = offset - sign * c;
    if row.iter().all(|r| *r == 0.0) {
        return if rhs >= 0.0 { Some(s.clone()) } else { None };
    }
    let mut out = s.clone();
    out.push_constraint(&row, rhs);
    Some(out)
}

/// One exact-star split on neuron `i`.
pub fn exact_step(s: StarSet, i: usize, act: Activation) -> Result<Vec<StarSet>> {
    let kinks: &[f64] = match act {
        Activation::Linear => return Ok(vec![s]),
        Activation::Relu | Activation::LeakyRelu(_) => &[0.0],
        Activation::Satlin => &[0.0, 1.0],
        other => {
            return Err(Error::Unsupported(format!(
                "exact-star reachability of {}",
                other.name()
            )))
        }
    };
    let (lo, hi) = neuron_bounds(&s, i, Some(kinks))?;
    let apply = |mut piece: StarSet, region: usize| -> StarSet {
        match (act, region) {
            (Activation::Relu, 0) => piece.pin_dimension(i, 0.0),
            (Activation::LeakyRelu(a), 0) => piece.scale_dimension(i, a),
            (Activation::Satlin, 0) => piece.pin_dimension(i, 0.0),
            (Activation::Satlin, 2) => piece.pin_dimension(i, 1.0),
            _ => {}
        }
        piece
    };
    // regions are the closed intervals between consecutive kinks
    let mut out = Vec::new();
    for region in 0..=kinks.len() {
        let left = if region == 0 {
            f64::NEG_INFINITY
        } else {
            kinks[region - 1]
        };
        let right = if region == kinks.len() {
            f64::INFINITY
        } else {
            kinks[region]
        };
        if hi < left || lo > right {
            continue;
        }
        let mut piece = Some(s.clone());
        if lo < left {
            piece = piece.and_then(|p| cut(&p, i, -1.0, -left));
        }
        if hi > right {
            piece = piece.and_then(|p| cut(&p, i, 1.0, right));
        }
        let Some(piece) = piece else { continue };
        let split = piece.num_constraints() > s.num_constraints();
        if split && piece.is_empty()? {
            continue;
        }
        out.push(apply(piece, region));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntervalBox;

    fn segment(lo: f64, hi: f64) -> StarSet {
        StarSet::from_box(&IntervalBox::new(vec![lo], vec![hi]).unwrap())
    }

    fn identity_layer(act: Activation) -> FcLayer {
        FcLayer::new(Matrix::identity(1), vec![0.0], act).unwrap()
    }

    #[test]
    fn relu_exact_splits_segment() {
        let out = identity_layer(Activation::Relu)
            .reach(&[segment(-1.0, 1.0)], ReachMode::ExactStar, 100)
            .unwrap();
        assert_eq!(out.len(), 2);
        let mut b: Vec<(f64, f64)> = out.iter().map(|s| s.bounds(0).unwrap()).collect();
        b.sort_by(|x, y| x.1.total_cmp(&y.1));
        assert_eq!(b[0], (0.0, 0.0));
        assert!(b[1].0.abs() < 1e-12 && (b[1].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relu_approx_contains_exact_branches() {
        let out = identity_layer(Activation::Relu)
            .reach(&[segment(-1.0, 1.0)], ReachMode::ApproxStar, 100)
            .unwrap();
        assert_eq!(out.len(), 1);
        let (lo, hi) = out[0].bounds(0).unwrap();
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        for x in [0.0, 0.25, 1.0] {
            assert!(out[0].contains(&[x]).unwrap());
        }
    }

    #[test]
    fn relu_triangle_on_graph() {
        // keep x alongside y to check the relation
        let s = StarSet::from_box(&IntervalBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap());
        let s = s
            .affine_map(
                &Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
                &[0.0, 0.0],
            )
            .unwrap();
        let r = relu_step_approx(s, 1, -1.0, 1.0);
        assert!(r.contains(&[-1.0, 0.0]).unwrap());
        assert!(r.contains(&[1.0, 1.0]).unwrap());
        assert!(!r.contains(&[1.0, -0.1]).unwrap());
    }

    #[test]
    fn relu_trivial_cases() {
        let s = segment(1.0, 3.0);
        assert_eq!(relu_step_approx(s.clone(), 0, 1.0, 3.0), s);
        let z = relu_step_approx(segment(-3.0, -1.0), 0, -3.0, -1.0);
        assert_eq!(z.bounds(0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn positive_input_passes_relu_unchanged() {
        let s = segment(0.5, 2.0);
        let out = identity_layer(Activation::Relu)
            .reach(std::slice::from_ref(&s), ReachMode::ApproxStar, 10)
            .unwrap();
        assert_eq!(out, vec![s]);
    }

    #[test]
    fn smooth_pins_degenerate_interval() {
        let t = smooth_step_approx(StarSet::point(vec![0.0]), 0, Activation::Tanh, 0.0, 0.0).unwrap();
        assert_eq!(t.center(), &[0.0]);
        let s = smooth_step_approx(StarSet::point(vec![0.0]), 0, Activation::Sigmoid, 0.0, 0.0).unwrap();
        assert_eq!(s.center(), &[0.5]);
    }

    #[test]
    fn exact_mode_rejects_tanh() {
        let r = identity_layer(Activation::Tanh).reach(&[segment(-1.0, 1.0)], ReachMode::ExactStar, 10);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let empty = StarSet::new(
            vec![0.0],
            Matrix::identity(1),
            Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![-1.0, -1.0],
            None,
        )
        .unwrap();
        for mode in [ReachMode::ApproxStar, ReachMode::ExactStar] {
            let out = identity_layer(Activation::Relu)
                .reach(std::slice::from_ref(&empty), mode, 10)
                .unwrap();
            assert!(out.is_empty());
        }
    }

    #[test]
    fn branch_cap_is_enforced() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let layer = FcLayer::new(w, vec![0.0; 3], Activation::Relu).unwrap();
        let s = StarSet::unit_box(2);
        assert!(matches!(
            layer.reach(&[s], ReachMode::ExactStar, 3),
            Err(Error::BranchCap { cap: 3 })
        ));
    }

    #[test]
    fn satlin_exact_has_three_pieces() {
        let out = identity_layer(Activation::Satlin)
            .reach(&[segment(-1.0, 2.0)], ReachMode::ExactStar, 10)
            .unwrap();
        assert_eq!(out.len(), 3);
    }
}
