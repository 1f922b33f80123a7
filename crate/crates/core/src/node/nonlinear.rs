use alloc::vec;
use alloc::vec::Vec;

use super::{FlowSet, FlowStep, Flowpipe, NodeDynamics, TimeConfig};
use crate::error::{Error, Result};
use crate::geometry::{IntervalBox, Zonotope};
use crate::interval::Interval;
use crate::linalg::{affine_flow, exponential_integral, Matrix};
use crate::math;

/// Default zonotope order limit.
pub const DEFAULT_MAX_ORDER: f64 = 20.0;
/// Enclosure refinements per step before giving up.
pub const MAX_REFINEMENTS: usize = 10;
const ENLARGE_FACTOR: f64 = 1.5;
const ENLARGE_FLOOR: f64 = 1e-8;
const FLOW_SLACK: f64 = 1e-12;

/// Fixed-step conservative-linearization reachability on zonotopes.
///
/// Each step linearizes `g` at the set center `z*`, flows the linear part
/// exactly, and treats `g(z) − g(z*) − J(z − z*)` as a bounded input whose
/// box comes from the interval Jacobian over a candidate enclosure `Ω`.
/// The step is accepted once the resulting time-interval set lies in `Ω`.
pub fn nonlinear_reach(dynamics: &NodeDynamics, z0: &Zonotope, tc: &TimeConfig, max_order: f64) -> Result<Flowpipe> {
    let n = dynamics.dim();
    if z0.dim() != n {
        return Err(Error::shape("initial set dimension differs from the ODE"));
    }
    let grid = tc.grid();
    let mut z = z0.order_reduce(max_order);
    let mut steps = Vec::with_capacity(grid.len() - 1);
    for k in 0..grid.len() - 1 {
        let h = grid[k + 1] - grid[k];
        let (next, interval, verified) = step(dynamics, &z, h, max_order, grid[k])?;
        if !math::all_finite(next.center()) || !next.generators().is_finite() {
            return Err(Error::NonFinite(alloc::format!("reach set at t = {}", grid[k + 1])));
        }
        steps.push(FlowStep {
            t_lo: grid[k],
            t_hi: grid[k + 1],
            set: FlowSet::Zonotope(interval),
            enclosure_verified: verified,
        });
        z = next;
    }
    Ok(Flowpipe::assemble(
        tc.output_mode(),
        tc.t_f(),
        steps,
        FlowSet::Zonotope(z),
    ))
}

struct Linearization {
    center: Vec<f64>,
    f0: Vec<f64>,
    jac: Matrix,
    /// Entrywise `e^{|J| s}` integrated over `[0, h]`.
    abs_integral: Matrix,
}

/// Sets for one step given the remainder box `[e_c − e_r, e_c + e_r]`.
fn propagate(
    lin: &Linearization,
    z: &Zonotope,
    e_c: &[f64],
    e_r: &[f64],
    h: f64,
    max_order: f64,
) -> Result<(Zonotope, Zonotope)> {
    let n = z.dim();
    let drift_rate: Vec<f64> = lin.f0.iter().zip(e_c).map(|(a, b)| a + b).collect();
    let (phi, drift) = affine_flow(&lin.jac, &drift_rate, h)?;
    // work in y = z − z*, where the current set is centered at the origin
    let g0 = z.generators();
    let g1 = phi.matmul(g0)?;
    let rho = lin.abs_integral.matvec(e_r)?;

    let y_max = z.radius().iter().fold(0.0f64, |m, r| m.max(*r));
    let j_norm = lin.jac.norm_inf();
    let f_norm = math::norm_inf(&drift_rate);
    let bloat = if j_norm == 0.0 {
        // ż = const is interpolated exactly
        0.0
    } else {
        let mu = if f_norm == 0.0 {
            0.0
        } else {
            y_max.max(f_norm / j_norm.max(1.0 / h))
        };
        let m_norm = if mu > 0.0 { j_norm + f_norm / mu } else { j_norm };
        2.0 * math::exp_remainder(m_norm * h) * y_max.max(mu)
    };

    let slack: Vec<f64> = (0..n)
        .map(|i| FLOW_SLACK * (lin.center[i].abs() + y_max + drift[i].abs()))
        .collect();
    let next_center: Vec<f64> = (0..n).map(|i| lin.center[i] + drift[i]).collect();
    let next_box: Vec<f64> = (0..n).map(|i| rho[i] + slack[i]).collect();
    let next = Zonotope::new(next_center, g1.clone())?.add_box(&next_box)?;

    // convex hull of Y_k = ⟨0, G0⟩ and Y_{k+1} = ⟨d, G1⟩ with shared generators
    let half = 0.5;
    let hull_center: Vec<f64> = (0..n).map(|i| lin.center[i] + half * drift[i]).collect();
    let sum = g0.add(&g1)?.scale(half);
    let dif = g0.sub(&g1)?.scale(half);
    let d_col = Matrix::column_vector(&drift.iter().map(|d| -half * d).collect::<Vec<_>>());
    let gens = sum.hstack(&d_col)?.hstack(&dif)?;
    let hull_box: Vec<f64> = (0..n).map(|i| rho[i] + bloat + slack[i]).collect();
    let interval = Zonotope::new(hull_center, gens)?.add_box(&hull_box)?;
    Ok((next.order_reduce(max_order), interval.order_reduce(max_order)))
}

fn step(dynamics: &NodeDynamics, z: &Zonotope, h: f64, max_order: f64, t: f64) -> Result<(Zonotope, Zonotope, bool)> {
    let n = z.dim();
    let center = z.center().to_vec();
    let jac = dynamics.jacobian(&center)?;
    let lin = Linearization {
        f0: dynamics.eval(&center)?,
        abs_integral: exponential_integral(&jac.abs(), h)?,
        jac,
        center,
    };
    let mut e_c = vec![0.0; n];
    let mut e_r = vec![0.0; n];
    let mut omega: Option<IntervalBox> = None;
    for _ in 0..=MAX_REFINEMENTS {
        let (next, interval) = propagate(&lin, z, &e_c, &e_r, h, max_order)?;
        let hull = interval.interval_hull();
        if let Some(om) = &omega {
            if om.contains_box(&hull) {
                return Ok((next, interval, true));
            }
        }
        let grown = match &omega {
            None => hull.enlarge(ENLARGE_FACTOR, ENLARGE_FLOOR),
            Some(om) => om.hull(&hull)?.enlarge(ENLARGE_FACTOR, ENLARGE_FLOOR),
        };
        if !math::all_finite(grown.lower()) || !math::all_finite(grown.upper()) {
            break;
        }
        let (c, r) = remainder(dynamics, &lin, &grown)?;
        e_c = c;
        e_r = r;
        omega = Some(grown);
    }
    Err(Error::StepSize {
        time: t,
        attempts: MAX_REFINEMENTS,
    })
}

/// Center and radius of `(J_I(Ω) − J)(Ω − z*)`.
fn remainder(dynamics: &NodeDynamics, lin: &Linearization, omega: &IntervalBox) -> Result<(Vec<f64>, Vec<f64>)> {
    let jac_i = dynamics.interval_jacobian(omega)?;
    let dev: Vec<Interval> = omega
        .intervals()
        .iter()
        .zip(&lin.center)
        .map(|(iv, c)| *iv - Interval::point(*c))
        .collect();
    let e = jac_i.deviation_times(&lin.jac, &dev);
    let c: Vec<f64> = e.iter().map(Interval::mid).collect();
    let r: Vec<f64> = e
        .iter()
        .zip(&c)
        .map(|(iv, m)| math::up((iv.hi - m).max(m - iv.lo)))
        .collect();
    Ok((c, r))
}
