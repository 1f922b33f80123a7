//! Dense bounded-variable simplex for the small LPs behind star-set queries.
//!
//! Problems are `min cᵀx  s.t.  A x ≤ b,  lower ≤ x ≤ upper` with possibly
//! infinite bounds. The solver runs a two-phase primal simplex on a dense
//! tableau with Dantzig pricing, switching to Bland's rule once the iteration
//! count passes `5·(k+m)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Feasibility tolerance on scaled constraint residuals.
pub const TAU_LP: f64 = 1e-9;
/// Largest scaled residual tolerated in a returned witness. Looser than
/// `TAU_LP` to absorb round-off accumulated over long pivot sequences.
pub const TAU_WITNESS: f64 = 1e-7;
/// Largest scaled bound violation that a witness may be clamped away from.
pub const TAU_REPAIR: f64 = 1e-5;
/// Entries below this magnitude are never pivoted on.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Problem with free variables.
    pub fn new(objective: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self> {
        let m = objective.len();
        let p = LpProblem {
            lower: vec![f64::NEG_INFINITY; m],
            upper: vec![f64::INFINITY; m],
            objective,
            a,
            b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        self.lower = lower;
        self.upper = upper;
        self.validate()?;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.objective.len();
        if m == 0 {
            return Err(Error::InvalidArgument("LP needs at least one variable".into()));
        }
        if self.a.rows() != self.b.len() || (self.a.rows() > 0 && self.a.cols() != m) {
            return Err(Error::shape(format!(
                "LP with {} vars, {}x{} constraint matrix and rhs of length {}",
                m,
                self.a.rows(),
                self.a.cols(),
                self.b.len()
            )));
        }
        if self.lower.len() != m || self.upper.len() != m {
            return Err(Error::shape("LP bound vectors must match variable count"));
        }
        for j in 0..m {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::NonFinite("NaN variable bound".into()));
            }
            if self.lower[j] > self.upper[j] {
                return Err(Error::InvalidArgument(format!(
                    "variable {} has lower bound {} above upper bound {}",
                    j, self.lower[j], self.upper[j]
                )));
            }
        }
        if !self.a.is_finite() || !crate::math::all_finite(&self.b) || !crate::math::all_finite(&self.objective) {
            return Err(Error::NonFinite("LP data".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Objective value at the witness, lowered by the objective change of
    /// any bound repair so it stays below the optimum; `NaN` unless optimal.
    pub value: f64,
    /// Primal point; empty unless optimal.
    pub witness: Vec<f64>,
}

impl LpOutcome {
    fn infeasible() -> Self {
        LpOutcome {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            witness: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        LpOutcome {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            witness: Vec::new(),
        }
    }
}

/// Solves `p` to optimality, or reports infeasibility / unboundedness.
pub fn lp_solve(p: &LpProblem) -> Result<LpOutcome> {
    p.validate()?;
    let mut t = Tableau::new(p);
    if !t.phase_one()? {
        return Ok(LpOutcome::infeasible());
    }
    if !t.phase_two()? {
        return Ok(LpOutcome::unbounded());
    }
    let mut witness = t.values[..t.m].to_vec();
    let mut repair = 0.0;
    if check_witness(p, &witness).is_err() {
        // Round-off in the tableau: recompute the basic values from the
        // original columns and keep the result if it is cleaner.
        if t.resolve_basic_values().is_ok() {
            witness = t.values[..t.m].to_vec();
        }
        if check_witness(p, &witness).is_err() {
            repair = clamp_to_bounds(p, &mut witness)?;
        }
        check_witness(p, &witness)?;
    }
    let value = crate::math::dot(&p.objective, &witness) - repair;
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        value,
        witness,
    })
}

/// Feasibility of `A x ≤ b` within bounds; returns a witness when feasible.
pub fn lp_feasible(a: &Matrix, b: &[f64], lower: &[f64], upper: &[f64]) -> Result<Option<Vec<f64>>> {
    let m = lower.len();
    let p = LpProblem::new(vec![0.0; m], a.clone(), b.to_vec())?.with_bounds(lower.to_vec(), upper.to_vec())?;
    let out = lp_solve(&p)?;
    Ok(match out.status {
        LpStatus::Optimal => Some(out.witness),
        _ => None,
    })
}

/// Moves slightly out-of-bounds entries onto their bounds and returns the
/// largest possible objective change `Σ|c_j|·|Δx_j|`.
fn clamp_to_bounds(p: &LpProblem, x: &mut [f64]) -> Result<f64> {
    let mut change = 0.0;
    for (j, v) in x.iter_mut().enumerate() {
        let c = v.max(p.lower[j]).min(p.upper[j]);
        let moved = (c - *v).abs();
        if moved > TAU_REPAIR * (1.0 + v.abs()) {
            return Err(Error::Solver(format!(
                "witness violates bounds of variable {j}: {v} not in [{}, {}]",
                p.lower[j], p.upper[j]
            )));
        }
        change += p.objective[j].abs() * moved;
        *v = c;
    }
    Ok(change)
}

fn check_witness(p: &LpProblem, x: &[f64]) -> Result<()> {
    for (j, v) in x.iter().enumerate() {
        let scale = 1.0 + v.abs();
        if *v < p.lower[j] - TAU_WITNESS * scale || *v > p.upper[j] + TAU_WITNESS * scale {
            return Err(Error::Solver(format!(
                "witness violates bounds of variable {j}: {v} not in [{}, {}]",
                p.lower[j], p.upper[j]
            )));
        }
    }
    for i in 0..p.a.rows() {
        let row = p.a.row(i);
        let lhs = crate::math::dot(row, x);
        let scale = 1.0 + p.b[i].abs() + row.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>();
        if lhs - p.b[i] > TAU_WITNESS * scale {
            return Err(Error::Solver(format!(
                "witness violates row {i} by {} (numerically degenerate basis)",
                lhs - p.b[i]
            )));
        }
    }
    Ok(())
}

struct Tableau<'a> {
    p: &'a LpProblem,
    /// Original variables.
    m: usize,
    /// Rows.
    k: usize,
    /// Total columns: originals, slacks, artificials.
    ncols: usize,
    /// `B⁻¹ A_full`, k × ncols.
    t: Vec<f64>,
    /// Reduced costs.
    d: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    values: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// `(row, sign)` for each artificial column.
    art_rows: Vec<(usize, f64)>,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
}

impl<'a> Tableau<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let m = p.num_vars();
        let k = p.num_constraints();
        // Nonbasic originals start at the bound favoured by the objective.
        let mut values = vec![0.0; m + k];
        for j in 0..m {
            let (l, u, c) = (p.lower[j], p.upper[j], p.objective[j]);
            values[j] = if c > 0.0 {
                if l.is_finite() {
                    l
                } else if u.is_finite() {
                    u
                } else {
                    0.0
                }
            } else if c < 0.0 {
                if u.is_finite() {
                    u
                } else if l.is_finite() {
                    l
                } else {
                    0.0
                }
            } else if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            };
        }
        let residual: Vec<f64> = (0..k)
            .map(|i| p.b[i] - crate::math::dot(p.a.row(i), &values[..m]))
            .collect();
        let art_rows: Vec<(usize, f64)> = residual
            .iter()
            .enumerate()
            .filter(|(_, r)| **r < 0.0)
            .map(|(i, _)| (i, -1.0))
            .collect();
        let nart = art_rows.len();
        let ncols = m + k + nart;
        values.resize(ncols, 0.0);

        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        lo.extend_from_slice(&p.lower);
        hi.extend_from_slice(&p.upper);
        lo.resize(ncols, 0.0);
        hi.resize(ncols, f64::INFINITY);

        let mut t = vec![0.0; k * ncols];
        let mut basis = vec![0; k];
        let mut is_basic = vec![false; ncols];
        let mut art_of_row = vec![usize::MAX; k];
        for (a, (row, _)) in art_rows.iter().enumerate() {
            art_of_row[*row] = m + k + a;
        }
        for i in 0..k {
            let row = &mut t[i * ncols..(i + 1) * ncols];
            row[..m].copy_from_slice(p.a.row(i));
            row[m + i] = 1.0;
            if art_of_row[i] != usize::MAX {
                let a = art_of_row[i];
                row[a] = -1.0;
                // artificial basic with column -e_i: scale row by -1
                for v in row.iter_mut() {
                    *v = -*v;
                }
                basis[i] = a;
                values[a] = -residual[i];
            } else {
                basis[i] = m + i;
                values[m + i] = residual[i];
            }
            is_basic[basis[i]] = true;
        }

        let size = k + m;
        Tableau {
            p,
            m,
            k,
            ncols,
            t,
            d: vec![0.0; ncols],
            cost: vec![0.0; ncols],
            lo,
            hi,
            values,
            basis,
            is_basic,
            art_rows,
            iterations: 0,
            bland_after: 5 * size,
            max_iterations: 200 * size + 2000,
        }
    }

    fn set_costs(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        for j in 0..self.ncols {
            let mut dj = self.cost[j];
            for i in 0..self.k {
                let cb = self.cost[self.basis[i]];
                if cb != 0.0 {
                    dj -= cb * self.t[i * self.ncols + j];
                }
            }
            self.d[j] = dj;
        }
    }

    /// Returns false when the constraints are infeasible.
    fn phase_one(&mut self) -> Result<bool> {
        if self.art_rows.is_empty() {
            return Ok(true);
        }
        let mut cost = vec![0.0; self.ncols];
        for a in 0..self.art_rows.len() {
            cost[self.m + self.k + a] = 1.0;
        }
        self.set_costs(cost);
        let bounded = self.run()?;
        debug_assert!(bounded, "phase one is bounded below by zero");
        self.refresh_basic_values();
        let infeasibility: f64 = (self.m + self.k..self.ncols).map(|j| self.values[j]).sum();
        let scale = 1.0 + self.p.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if infeasibility > TAU_LP * scale {
            return Ok(false);
        }
        for j in self.m + self.k..self.ncols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if !self.is_basic[j] {
                self.values[j] = 0.0;
            }
        }
        Ok(true)
    }

    /// Returns false when the objective is unbounded below.
    fn phase_two(&mut self) -> Result<bool> {
        let mut cost = vec![0.0; self.ncols];
        cost[..self.m].copy_from_slice(&self.p.objective);
        self.set_costs(cost);
        self.iterations = 0;
        let bounded = self.run()?;
        self.refresh_basic_values();
        Ok(bounded)
    }

    fn run(&mut self) -> Result<bool> {
        let cmax = self.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let dtol = 1e-9 * (1.0 + cmax);
        loop {
            if self.iterations > self.max_iterations {
                return Err(Error::Solver(format!(
                    "iteration limit {} reached ({} rows, {} columns)",
                    self.max_iterations, self.k, self.ncols
                )));
            }
            let bland = self.iterations >= self.bland_after;
            self.iterations += 1;
            if self.iterations.is_multiple_of(64) {
                self.refresh_basic_values();
            }

            let Some((q, dir)) = self.price(dtol, bland) else {
                return Ok(true);
            };
            match self.ratio_test(q, dir, bland) {
                Step::Unbounded => return Ok(false),
                Step::Flip(theta) => {
                    self.shift(q, dir, theta);
                    self.values[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Step::Pivot { row, theta, to_upper } => {
                    self.shift(q, dir, theta);
                    let leaving = self.basis[row];
                    self.values[leaving] = if to_upper { self.hi[leaving] } else { self.lo[leaving] };
                    self.pivot(row, q);
                }
            }
        }
    }

    fn price(&self, dtol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.is_basic[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let x = self.values[j];
            let dir = if dj < -dtol && x < self.hi[j] {
                1.0
            } else if dj > dtol && x > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Harris two-pass ratio test: the first pass finds the longest step
    /// allowed when every bound is relaxed by `TAU_LP`, the second takes the
    /// largest pivot among rows blocking within it. Bland mode keeps the
    /// plain minimum ratio with lowest-index ties.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Step {
        let own = if dir > 0.0 {
            self.hi[q] - self.values[q]
        } else {
            self.values[q] - self.lo[q]
        };
        // (row, exact limit, relaxed limit, to_upper, |pivot|)
        let mut cands: Vec<(usize, f64, f64, bool, f64)> = Vec::new();
        for i in 0..self.k {
            let tiq = self.t[i * self.ncols + q];
            if tiq.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let delta = -dir * tiq;
            let (room, bound, upper) = if delta < 0.0 {
                (self.values[b] - self.lo[b], self.lo[b], false)
            } else {
                (self.hi[b] - self.values[b], self.hi[b], true)
            };
            if !bound.is_finite() {
                continue;
            }
            let slack = TAU_LP * (1.0 + bound.abs());
            cands.push((
                i,
                room.max(0.0) / delta.abs(),
                (room + slack).max(0.0) / delta.abs(),
                upper,
                tiq.abs(),
            ));
        }
        let best = if bland {
            cands
                .iter()
                .min_by(|x, y| x.1.total_cmp(&y.1).then(self.basis[x.0].cmp(&self.basis[y.0])))
        } else {
            let theta_max = cands.iter().fold(f64::INFINITY, |m, c| m.min(c.2));
            cands
                .iter()
                .filter(|c| c.1 <= theta_max)
                .max_by(|x, y| x.4.total_cmp(&y.4).then(y.1.total_cmp(&x.1)))
        };
        let theta = best.map_or(f64::INFINITY, |c| c.1);
        if own.is_finite() && own <= theta {
            return Step::Flip(own);
        }
        match best {
            None => Step::Unbounded,
            Some(&(row, theta, _, to_upper, _)) => Step::Pivot { row, theta, to_upper },
        }
    }

    fn shift(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.values[q] += dir * theta;
        for i in 0..self.k {
            let tiq = self.t[i * self.ncols + q];
            if tiq != 0.0 {
                let b = self.basis[i];
                self.values[b] -= dir * tiq * theta;
                if tiq.abs() <= PIVOT_TOL {
                    // the ratio test ignored this row; keep it inside its bounds
                    self.values[b] = self.values[b].max(self.lo[b]).min(self.hi[b]);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncols;
        let piv = self.t[r * n + q];
        for v in &mut self.t[r * n..(r + 1) * n] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_mut(n).chain(after.chunks_mut(n)) {
            let f = row[q];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (x, p) in self.d.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    /// Like `refresh_basic_values`, but factorises the basis afresh from the
    /// problem data instead of trusting the accumulated tableau.
    fn resolve_basic_values(&mut self) -> Result<()> {
        let k = self.k;
        let mut rhs = self.p.b.clone();
        for j in (0..self.ncols).filter(|j| !self.is_basic[*j]) {
            let x = self.values[j];
            if x != 0.0 {
                self.column_axpy(j, -x, &mut rhs);
            }
        }
        let mut b = Matrix::zeros(k, k);
        for (c, j) in self.basis.iter().enumerate() {
            let mut col = vec![0.0; k];
            self.column_axpy(*j, 1.0, &mut col);
            for (i, v) in col.into_iter().enumerate() {
                b[(i, c)] = v;
            }
        }
        let x = b.solve(&Matrix::column_vector(&rhs))?;
        if !x.is_finite() {
            return Err(Error::NonFinite("basis solve".into()));
        }
        for c in 0..k {
            self.values[self.basis[c]] = x[(c, 0)];
        }
        Ok(())
    }

    /// `acc += s · column j` of the original system `[A I ±E]`.
    fn column_axpy(&self, j: usize, s: f64, acc: &mut [f64]) {
        let (m, k) = (self.m, self.k);
        if j < m {
            for (i, r) in acc.iter_mut().enumerate() {
                *r += s * self.p.a[(i, j)];
            }
        } else if j < m + k {
            acc[j - m] += s;
        } else {
            let (row, sign) = self.art_rows[j - m - k];
            acc[row] += s * sign;
        }
    }

    /// Recomputes basic values from the nonbasic ones: `x_B = B⁻¹(b − N x_N)`,
    /// reading `B⁻¹` off the slack columns.
    fn refresh_basic_values(&mut self) {
        let (m, k, n) = (self.m, self.k, self.ncols);
        let mut rhs = self.p.b.clone();
        for j in 0..n {
            if self.is_basic[j] {
                continue;
            }
            let x = self.values[j];
            if x == 0.0 {
                continue;
            }
            if j < m {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= self.p.a[(i, j)] * x;
                }
            } else if j < m + k {
                rhs[j - m] -= x;
            } else {
                let (row, sign) = self.art_rows[j - m - k];
                rhs[row] -= sign * x;
            }
        }
        for i in 0..k {
            let row = &self.t[i * n + m..i * n + m + k];
            self.values[self.basis[i]] = crate::math::dot(row, &rhs);
        }
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, theta: f64, to_upper: bool },
}
