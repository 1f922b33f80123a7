use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{HalfspaceSpec, IntervalBox, Zonotope, TAU_MEM};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linprog::{lp_feasible, lp_solve, LpOutcome, LpProblem, LpStatus};
use crate::math;

/// Star set `{c + Vα | Pα ≤ d, lb ≤ α ≤ ub}`.
///
/// `c` has length `n`, `V` is `n × m`, `P` is `k × m`. The optional predicate
/// bounds let box-shaped predicates skip the LP entirely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StarRepr", into = "StarRepr")]
pub struct StarSet {
    center: Vec<f64>,
    basis: Matrix,
    constraints: Matrix,
    rhs: Vec<f64>,
    pred_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct StarRepr {
    center: Vec<f64>,
    basis: Matrix,
    #[serde(rename = "P")]
    constraints: Matrix,
    #[serde(rename = "d")]
    rhs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred_lb: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred_ub: Option<Vec<f64>>,
}

impl From<StarSet> for StarRepr {
    fn from(s: StarSet) -> Self {
        let (pred_lb, pred_ub) = match s.pred_bounds {
            Some((l, u)) => (Some(l), Some(u)),
            None => (None, None),
        };
        StarRepr {
            center: s.center,
            basis: s.basis,
            constraints: s.constraints,
            rhs: s.rhs,
            pred_lb,
            pred_ub,
        }
    }
}

impl TryFrom<StarRepr> for StarSet {
    type Error = Error;
    fn try_from(r: StarRepr) -> Result<Self> {
        let bounds = match (r.pred_lb, r.pred_ub) {
            (Some(l), Some(u)) => Some((l, u)),
            (None, None) => None,
            _ => return Err(Error::shape("pred_lb and pred_ub must be given together")),
        };
        let m = r.basis.cols();
        let constraints = if r.constraints.rows() == 0 {
            Matrix::zeros(0, m)
        } else {
            r.constraints
        };
        StarSet::new(r.center, r.basis, constraints, r.rhs, bounds)
    }
}

impl StarSet {
    pub fn new(
        center: Vec<f64>,
        basis: Matrix,
        constraints: Matrix,
        rhs: Vec<f64>,
        pred_bounds: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::shape("star of dimension 0"));
        }
        if basis.rows() != n {
            return Err(Error::shape(format!(
                "basis has {} rows for center of length {}",
                basis.rows(),
                n
            )));
        }
        let m = basis.cols();
        if constraints.cols() != m && constraints.rows() != 0 {
            return Err(Error::shape(format!(
                "constraint matrix has {} columns, basis has {}",
                constraints.cols(),
                m
            )));
        }
        if constraints.rows() != rhs.len() {
            return Err(Error::shape(format!(
                "{} constraint rows but {} right-hand sides",
                constraints.rows(),
                rhs.len()
            )));
        }
        if let Some((l, u)) = &pred_bounds {
            if l.len() != m || u.len() != m {
                return Err(Error::shape("predicate bounds must have one entry per variable"));
            }
            if l.iter().zip(u).any(|(a, b)| a > b || a.is_nan() || b.is_nan()) {
                return Err(Error::InvalidArgument("predicate lower bound above upper bound".into()));
            }
        }
        if !math::all_finite(&center) || !basis.is_finite() || !constraints.is_finite() || !math::all_finite(&rhs) {
            return Err(Error::NonFinite("star data".into()));
        }
        let constraints = if constraints.rows() == 0 {
            Matrix::zeros(0, m)
        } else {
            constraints
        };
        Ok(StarSet {
            center,
            basis,
            constraints,
            rhs,
            pred_bounds,
        })
    }

    pub(crate) fn from_parts(
        center: Vec<f64>,
        basis: Matrix,
        constraints: Matrix,
        rhs: Vec<f64>,
        pred_bounds: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Self {
        debug_assert_eq!(basis.rows(), center.len());
        debug_assert_eq!(constraints.cols(), basis.cols());
        debug_assert_eq!(constraints.rows(), rhs.len());
        StarSet {
            center,
            basis,
            constraints,
            rhs,
            pred_bounds,
        }
    }

    /// One predicate variable per non-degenerate box dimension.
    pub fn from_box(b: &IntervalBox) -> Self {
        let center = b.center();
        let radius = b.radius();
        let active: Vec<usize> = (0..b.dim()).filter(|i| radius[*i] > 0.0).collect();
        let mut basis = Matrix::zeros(b.dim(), active.len());
        for (k, &i) in active.iter().enumerate() {
            basis[(i, k)] = radius[i];
        }
        let m = active.len();
        StarSet {
            center,
            basis,
            constraints: Matrix::zeros(0, m),
            rhs: Vec::new(),
            pred_bounds: Some((vec![-1.0; m], vec![1.0; m])),
        }
    }

    pub fn unit_box(n: usize) -> Self {
        StarSet::from_box(&IntervalBox::new(vec![-1.0; n], vec![1.0; n]).expect("n ≥ 1"))
    }

    pub fn point(x: Vec<f64>) -> Self {
        let n = x.len();
        StarSet {
            center: x,
            basis: Matrix::zeros(n, 0),
            constraints: Matrix::zeros(0, 0),
            rhs: Vec::new(),
            pred_bounds: Some((Vec::new(), Vec::new())),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_vars(&self) -> usize {
        self.basis.cols()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn constraints(&self) -> &Matrix {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn predicate_bounds(&self) -> Option<(&[f64], &[f64])> {
        self.pred_bounds.as_ref().map(|(l, u)| (l.as_slice(), u.as_slice()))
    }

    /// `c + Vα`.
    pub fn point_at(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.basis.matvec(alpha)?;
        for (xi, ci) in x.iter_mut().zip(&self.center) {
            *xi += ci;
        }
        Ok(x)
    }

    /// Whether `α` satisfies the predicate within `tol`.
    pub fn predicate_holds(&self, alpha: &[f64], tol: f64) -> bool {
        if alpha.len() != self.num_vars() {
            return false;
        }
        if let Some((l, u)) = &self.pred_bounds {
            if alpha
                .iter()
                .zip(l.iter().zip(u))
                .any(|(a, (l, u))| *a < l - tol || *a > u + tol)
            {
                return false;
            }
        }
        (0..self.num_constraints()).all(|i| math::dot(self.constraints.row(i), alpha) <= self.rhs[i] + tol)
    }

    /// Exact image under `x ↦ W x + b`.
    pub fn affine_map(&self, w: &Matrix, b: &[f64]) -> Result<StarSet> {
        if w.cols() != self.dim() || w.rows() != b.len() {
            return Err(Error::shape(format!(
                "affine map {}x{} with bias of length {} applied to star of dimension {}",
                w.rows(),
                w.cols(),
                b.len(),
                self.dim()
            )));
        }
        let mut center = w.matvec(&self.center)?;
        for (c, bi) in center.iter_mut().zip(b) {
            *c += bi;
        }
        Ok(StarSet {
            center,
            basis: w.matmul(&self.basis)?,
            constraints: self.constraints.clone(),
            rhs: self.rhs.clone(),
            pred_bounds: self.pred_bounds.clone(),
        })
    }

    /// Appends `(aᵀV) α ≤ b − aᵀc` without a feasibility check.
    pub(crate) fn with_halfspace_unchecked(&self, h: &HalfspaceSpec) -> Result<Option<StarSet>> {
        if h.dim() != self.dim() {
            return Err(Error::shape(format!(
                "halfspace of dimension {} against star of dimension {}",
                h.dim(),
                self.dim()
            )));
        }
        let row = self.basis.vecmat(h.normal())?;
        let rhs = h.offset() - math::dot(h.normal(), &self.center);
        if row.iter().all(|v| *v == 0.0) {
            return Ok(if rhs >= 0.0 { Some(self.clone()) } else { None });
        }
        let mut out = self.clone();
        out.constraints.push_row(&row)?;
        out.rhs.push(rhs);
        Ok(Some(out))
    }

    /// `S ∩ H`, or `None` when the intersection is empty.
    pub fn intersect_halfspace(&self, h: &HalfspaceSpec) -> Result<Option<StarSet>> {
        match self.with_halfspace_unchecked(h)? {
            Some(s) if s.num_constraints() > self.num_constraints() => Ok(if s.is_empty()? { None } else { Some(s) }),
            other => Ok(other),
        }
    }

    fn lp(&self, objective: Vec<f64>) -> Result<LpOutcome> {
        let m = self.num_vars();
        let (lo, hi) = match &self.pred_bounds {
            Some((l, u)) => (l.clone(), u.clone()),
            None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
        };
        let p = LpProblem::new(objective, self.constraints.clone(), self.rhs.clone())?.with_bounds(lo, hi)?;
        lp_solve(&p)
    }

    pub fn is_empty(&self) -> Result<bool> {
        if self.num_vars() == 0 || self.num_constraints() == 0 {
            return Ok(false);
        }
        let (lo, hi) = match &self.pred_bounds {
            Some((l, u)) => (l.clone(), u.clone()),
            None => (
                vec![f64::NEG_INFINITY; self.num_vars()],
                vec![f64::INFINITY; self.num_vars()],
            ),
        };
        Ok(lp_feasible(&self.constraints, &self.rhs, &lo, &hi)?.is_none())
    }

    /// Minimizes `wᵀα` over the predicate; returns the value and minimizer.
    pub(crate) fn minimize_over_predicate(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = self.num_vars();
        if m == 0 {
            return Ok((0.0, Vec::new()));
        }
        if self.num_constraints() == 0 {
            let Some((l, u)) = &self.pred_bounds else {
                if w.iter().all(|v| *v == 0.0) {
                    return Ok((0.0, vec![0.0; m]));
                }
                return Err(Error::Unbounded);
            };
            let mut alpha = vec![0.0; m];
            let mut value = 0.0;
            for j in 0..m {
                if w[j] == 0.0 {
                    alpha[j] = if l[j].is_finite() {
                        l[j]
                    } else if u[j].is_finite() {
                        u[j]
                    } else {
                        0.0
                    };
                    continue;
                }
                let a = if w[j] > 0.0 { l[j] } else { u[j] };
                if !a.is_finite() {
                    return Err(Error::Unbounded);
                }
                alpha[j] = a;
                value += w[j] * a;
            }
            return Ok((value, alpha));
        }
        if w.iter().all(|v| *v == 0.0) {
            let (lo, hi) = match &self.pred_bounds {
                Some((l, u)) => (l.clone(), u.clone()),
                None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
            };
            return match lp_feasible(&self.constraints, &self.rhs, &lo, &hi)? {
                Some(alpha) => Ok((0.0, alpha)),
                None => Err(Error::EmptySet),
            };
        }
        let out = self.lp(w.to_vec())?;
        match out.status {
            LpStatus::Optimal => Ok((out.value, out.witness)),
            LpStatus::Infeasible => Err(Error::EmptySet),
            LpStatus::Unbounded => Err(Error::Unbounded),
        }
    }

    /// Range of `objᵀx` over the set, by LP.
    pub fn linear_range(&self, obj: &[f64]) -> Result<(f64, f64)> {
        if obj.len() != self.dim() {
            return Err(Error::shape("objective length differs from star dimension"));
        }
        let w = self.basis.vecmat(obj)?;
        let offset = math::dot(obj, &self.center);
        let (lo, _) = self.minimize_over_predicate(&w)?;
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let (nhi, _) = self.minimize_over_predicate(&neg)?;
        Ok((offset + lo, offset - nhi))
    }

    /// Maximizer of `dᵀx` over the set.
    pub fn support_point(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let w: Vec<f64> = self.basis.vecmat(direction)?.iter().map(|v| -v).collect();
        let (_, alpha) = self.minimize_over_predicate(&w)?;
        self.point_at(&alpha)
    }

    /// Exact bounds of dimension `dim` over the set.
    pub fn bounds(&self, dim: usize) -> Result<(f64, f64)> {
        if dim >= self.dim() {
            return Err(Error::shape(format!("dimension {dim} out of range {}", self.dim())));
        }
        let c = self.center[dim];
        let row = self.basis.row(dim);
        if row.iter().all(|v| *v == 0.0) {
            return Ok((c, c));
        }
        let (lo, _) = self.minimize_over_predicate(row)?;
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        let (nhi, _) = self.minimize_over_predicate(&neg)?;
        let (lo, hi) = (c + lo, c - nhi);
        Ok((lo.min(hi), hi.max(lo)))
    }

    /// Sound bounds of dimension `dim` from the predicate bounds alone.
    pub fn interval_bounds(&self, dim: usize) -> Option<(f64, f64)> {
        let (l, u) = self.pred_bounds.as_ref()?;
        let mut lo = self.center[dim];
        let mut hi = lo;
        for (j, v) in self.basis.row(dim).iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let (a, b) = (v * l[j], v * u[j]);
            lo += a.min(b);
            hi += a.max(b);
        }
        if lo.is_nan() || hi.is_nan() {
            return None;
        }
        Some((lo, hi))
    }

    /// Tight axis-aligned bounds, by LP.
    pub fn box_bounds(&self) -> Result<IntervalBox> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..self.dim())
            .map(|i| self.bounds(i))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        IntervalBox::new(lo, hi)
    }

    /// Axis-aligned enclosure from predicate bounds, falling back to LP.
    pub fn cheap_box(&self) -> Result<IntervalBox> {
        if self.pred_bounds.is_some() {
            let iv: Option<Vec<(f64, f64)>> = (0..self.dim()).map(|i| self.interval_bounds(i)).collect();
            if let Some(iv) = iv {
                if iv.iter().all(|(l, u)| l.is_finite() && u.is_finite()) {
                    let (lo, hi) = iv.into_iter().unzip();
                    return IntervalBox::new(lo, hi);
                }
            }
        }
        self.box_bounds()
    }

    /// Tight bounds of each predicate variable; entries may be infinite.
    pub fn predicate_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.num_vars();
        if m == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        if self.num_constraints() == 0 {
            return Ok(match &self.pred_bounds {
                Some((l, u)) => (l.clone(), u.clone()),
                None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
            });
        }
        if self.is_empty()? {
            return Err(Error::EmptySet);
        }
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            lo[j] = match self.minimize_over_predicate(&e) {
                Ok((v, _)) => v,
                Err(Error::Unbounded) => f64::NEG_INFINITY,
                Err(err) => return Err(err),
            };
            e[j] = -1.0;
            hi[j] = match self.minimize_over_predicate(&e) {
                Ok((v, _)) => -v,
                Err(Error::Unbounded) => f64::INFINITY,
                Err(err) => return Err(err),
            };
            e[j] = 0.0;
            if let Some((l, u)) = &self.pred_bounds {
                lo[j] = lo[j].max(l[j]);
                hi[j] = hi[j].min(u[j]);
            }
            if lo[j] > hi[j] {
                // LP round-off on a (nearly) fixed variable
                let mid = 0.5 * (lo[j] + hi[j]);
                lo[j] = mid;
                hi[j] = mid;
            }
        }
        Ok((lo, hi))
    }

    /// The same set with explicit predicate bounds (computed by LP if absent).
    pub fn with_predicate_bounds(&self) -> Result<StarSet> {
        if self.pred_bounds.is_some() {
            return Ok(self.clone());
        }
        let (lo, hi) = self.predicate_box()?;
        let mut out = self.clone();
        out.pred_bounds = Some((lo, hi));
        Ok(out)
    }

    /// Membership within [`TAU_MEM`] on every constraint residual.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!(
                "point of dimension {} against star of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let tol = |v: f64| TAU_MEM * (1.0 + v.abs());
        for i in 0..self.dim() {
            if let Some((lo, hi)) = self.interval_bounds(i) {
                if x[i] < lo - tol(x[i]) || x[i] > hi + tol(x[i]) {
                    return Ok(false);
                }
            }
        }
        let m = self.num_vars();
        let mut a = Matrix::zeros(0, m);
        let mut b = Vec::new();
        for i in 0..self.dim() {
            let row = self.basis.row(i);
            let r = x[i] - self.center[i];
            if row.iter().all(|v| *v == 0.0) {
                if r.abs() > tol(x[i]) {
                    return Ok(false);
                }
                continue;
            }
            a.push_row(row)?;
            b.push(r + tol(x[i]));
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            a.push_row(&neg)?;
            b.push(-r + tol(x[i]));
        }
        if m == 0 {
            return Ok(true);
        }
        for i in 0..self.num_constraints() {
            a.push_row(self.constraints.row(i))?;
            b.push(self.rhs[i] + tol(self.rhs[i]));
        }
        let (lo, hi) = match &self.pred_bounds {
            Some((l, u)) => (
                l.iter().map(|v| v - tol(*v)).collect(),
                u.iter().map(|v| v + tol(*v)).collect(),
            ),
            None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
        };
        if a.rows() == 0 {
            return Ok(true);
        }
        Ok(lp_feasible(&a, &b, &lo, &hi)?.is_some())
    }

    /// Enclosing zonotope from the interval hull of the predicate.
    pub fn to_zonotope(&self) -> Result<Zonotope> {
        let (lo, hi) = self.predicate_box()?;
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::Unbounded);
        }
        let n = self.dim();
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
        let rad: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (u - l)).collect();
        let center = self.point_at(&mid)?;
        let cols: Vec<usize> = (0..self.num_vars())
            .filter(|j| rad[*j] > 0.0 && (0..n).any(|i| self.basis[(i, *j)] != 0.0))
            .collect();
        let mut gens = Matrix::zeros(n, cols.len());
        for (k, &j) in cols.iter().enumerate() {
            for i in 0..n {
                gens[(i, k)] = self.basis[(i, j)] * rad[j];
            }
        }
        Zonotope::new(center, gens)
    }

    /// Replaces dimension `dim` by the constant `value`.
    pub(crate) fn pin_dimension(&mut self, dim: usize, value: f64) {
        self.center[dim] = value;
        for v in self.basis.row_mut(dim) {
            *v = 0.0;
        }
    }

    /// Scales dimension `dim` by `s`.
    pub(crate) fn scale_dimension(&mut self, dim: usize, s: f64) {
        self.center[dim] *= s;
        for v in self.basis.row_mut(dim) {
            *v *= s;
        }
    }

    /// Adds a fresh predicate variable with bounds `[lo, hi]`; returns its index.
    pub(crate) fn push_variable(&mut self, lo: f64, hi: f64) -> usize {
        let m = self.num_vars();
        self.basis = self.basis.pad_columns(1);
        self.constraints = self.constraints.pad_columns(1);
        let (l, u) = self
            .pred_bounds
            .get_or_insert_with(|| (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]));
        l.push(lo);
        u.push(hi);
        m
    }

    /// Appends `row · α ≤ rhs`.
    pub(crate) fn push_constraint(&mut self, row: &[f64], rhs: f64) {
        self.constraints
            .push_row(row)
            .expect("constraint row width matches variable count");
        self.rhs.push(rhs);
    }

    /// Sets dimension `dim` to `α[var]`.
    pub(crate) fn bind_dimension(&mut self, dim: usize, var: usize) {
        self.center[dim] = 0.0;
        let row = self.basis.row_mut(dim);
        for v in row.iter_mut() {
            *v = 0.0;
        }
        row[var] = 1.0;
    }

    /// Row `dim` of the basis and center: `x_dim = c + row·α`.
    pub(crate) fn dimension_form(&self, dim: usize) -> (f64, &[f64]) {
        (self.center[dim], self.basis.row(dim))
    }

    /// Whether the predicate variables are all box-bounded with no extra rows.
    pub fn has_box_predicate(&self) -> bool {
        self.num_constraints() == 0 && self.pred_bounds.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_map_keeps_star() {
        let s = StarSet::unit_box(2);
        let t = s.affine_map(&Matrix::identity(2), &[0.0, 0.0]).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn point_star_affine() {
        let s = StarSet::point(vec![1.0, 2.0]);
        let t = s.affine_map(&mat(&[&[2.0, 0.0], &[0.0, 3.0]]), &[1.0, 1.0]).unwrap();
        assert_eq!(t.center(), &[3.0, 7.0]);
        assert_eq!(t.bounds(1).unwrap(), (7.0, 7.0));
    }

    #[test]
    fn rotated_box_bounds() {
        let s = StarSet::unit_box(2)
            .affine_map(&mat(&[&[1.0, 1.0], &[1.0, -1.0]]), &[0.0, 0.0])
            .unwrap();
        assert_eq!(s.bounds(0).unwrap(), (-2.0, 2.0));
        assert_eq!(s.bounds(1).unwrap(), (-2.0, 2.0));
        assert!(s.contains(&[1.9, 0.1]).unwrap());
        assert!(!s.contains(&[2.0, 0.5]).unwrap());
    }

    #[test]
    fn halfspace_cuts_segment() {
        let s = StarSet::unit_box(1);
        let h = HalfspaceSpec::new(vec![1.0], 0.0).unwrap();
        let cut = s.intersect_halfspace(&h).unwrap().unwrap();
        let (lo, hi) = cut.bounds(0).unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && hi.abs() < 1e-12);
        let far = HalfspaceSpec::new(vec![1.0], -2.0).unwrap();
        assert!(s.intersect_halfspace(&far).unwrap().is_none());
    }

    #[test]
    fn membership_basics() {
        let s = StarSet::unit_box(2);
        assert!(s.contains(&[0.0, 0.0]).unwrap());
        assert!(!s.contains(&[2.0, 0.0]).unwrap());
        assert!(matches!(s.contains(&[0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn unbounded_predicate_reports_error() {
        let s = StarSet::new(vec![0.0], Matrix::identity(1), mat(&[&[1.0]]), vec![1.0], None).unwrap();
        assert_eq!(s.bounds(0), Err(Error::Unbounded));
        assert_eq!(s.to_zonotope(), Err(Error::Unbounded));
    }

    #[test]
    fn empty_predicate_reports_error() {
        let s = StarSet::new(
            vec![0.0],
            Matrix::identity(1),
            mat(&[&[1.0], &[-1.0]]),
            vec![-1.0, -1.0],
            None,
        )
        .unwrap();
        assert!(s.is_empty().unwrap());
        assert_eq!(s.bounds(0), Err(Error::EmptySet));
        assert_eq!(s.to_zonotope(), Err(Error::EmptySet));
    }

    #[test]
    fn box_star_to_zonotope_is_exact() {
        let s = StarSet::unit_box(3);
        let z = s.to_zonotope().unwrap();
        assert_eq!(z.center(), s.center());
        assert_eq!(z.generators(), s.basis());
    }

    #[test]
    fn degenerate_box_dimensions_drop_variables() {
        let b = IntervalBox::new(vec![0.0, 1.0], vec![2.0, 1.0]).unwrap();
        let s = StarSet::from_box(&b);
        assert_eq!(s.num_vars(), 1);
        assert_eq!(s.bounds(1).unwrap(), (1.0, 1.0));
    }
}
