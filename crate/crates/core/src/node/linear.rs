use alloc::vec;
use alloc::vec::Vec;

use super::{FlowSet, FlowStep, Flowpipe, LinearOdeForm, TimeConfig};
use crate::error::{Error, Result};
use crate::geometry::StarSet;
use crate::linalg::{affine_flow, Matrix};
use crate::math;

/// Relative slack covering round-off in the matrix exponential.
const FLOW_SLACK: f64 = 1e-12;

/// Direct star reachability of `ż = Az + c`.
///
/// Point-in-time sets `S_{k+1} = e^{Ah} S_k + ∫₀ʰ e^{As} ds · c` are exact.
/// Each time-interval set encloses the segment joining `x_k` and `x_{k+1}`
/// for every shared predicate value, plus a remainder bound for the
/// curvature of `e^{Ms}` on the augmented state `(x, μ)`.
pub fn linear_reach(form: &LinearOdeForm, s0: &StarSet, tc: &TimeConfig) -> Result<Flowpipe> {
    let n = form.dim();
    if s0.dim() != n {
        return Err(Error::shape("initial set dimension differs from the ODE"));
    }
    if !form.a.is_finite() || !math::all_finite(&form.c) {
        return Err(Error::NonFinite("linear ODE coefficients".into()));
    }
    let grid = tc.grid();
    // declared predicate bounds avoid 2m LPs on large stars
    let (plo, phi) = match s0.predicate_bounds() {
        Some((l, u)) if l.iter().chain(u).all(|v| v.is_finite()) => (l.to_vec(), u.to_vec()),
        _ => s0.predicate_box()?,
    };
    let alpha_mag: Vec<f64> = plo.iter().zip(&phi).map(|(l, u)| l.abs().max(u.abs())).collect();
    if alpha_mag.iter().any(|a| !a.is_finite()) && tc.output_mode() == super::OutputMode::Flowpipe {
        return Err(Error::Unbounded);
    }
    let a_norm = form.a.norm_inf();
    let c_norm = math::norm_inf(&form.c);
    let mut steps = Vec::with_capacity(grid.len() - 1);
    let mut s = s0.clone();
    let mut cache: Option<(f64, Matrix, Vec<f64>)> = None;
    for k in 0..grid.len() - 1 {
        let h = grid[k + 1] - grid[k];
        let (phi_h, drift) = match &cache {
            Some((hc, p, d)) if *hc == h => (p.clone(), d.clone()),
            _ => {
                let (p, d) = affine_flow(&form.a, &form.c, h)?;
                cache = Some((h, p.clone(), d.clone()));
                (p, d)
            }
        };
        let next = s.affine_map(&phi_h, &drift)?;
        if tc.output_mode() == super::OutputMode::Flowpipe {
            let set = segment_enclosure(&s, &next, &alpha_mag, a_norm, c_norm, h)?;
            steps.push(FlowStep {
                t_lo: grid[k],
                t_hi: grid[k + 1],
                set: FlowSet::Star(set),
                enclosure_verified: true,
            });
        }
        s = next;
    }
    let t_f = tc.t_f();
    Ok(Flowpipe::assemble(tc.output_mode(), t_f, steps, FlowSet::Star(s)))
}

/// Star enclosing `{x_k(α) + λ(x_{k+1}(α) − x_k(α)) | λ ∈ [0,1]}` bloated by
/// the interpolation remainder.
fn segment_enclosure(
    sk: &StarSet,
    sk1: &StarSet,
    alpha_mag: &[f64],
    a_norm: f64,
    c_norm: f64,
    h: f64,
) -> Result<StarSet> {
    let n = sk.dim();
    let m = sk.num_vars();
    let x_max = sk.cheap_box()?.max_abs();
    // augmented state (x, μ) with ż = [[A, c/μ], [0, 0]] z
    let mu = if c_norm == 0.0 {
        0.0
    } else {
        x_max.max(c_norm / a_norm.max(1.0 / h))
    };
    let m_norm = if mu > 0.0 { a_norm + c_norm / mu } else { a_norm };
    let beta = math::exp_remainder(m_norm * h);
    let bloat = 2.0 * beta * x_max.max(mu);

    // midpoint star m(α) and difference δ(α) = d0 + Dα
    let center: Vec<f64> = sk
        .center()
        .iter()
        .zip(sk1.center())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let d0: Vec<f64> = sk1.center().iter().zip(sk.center()).map(|(a, b)| a - b).collect();
    let mid = sk.basis().add(sk1.basis())?.scale(0.5);
    let diff = sk1.basis().sub(sk.basis())?;
    let mut radius = vec![0.0; n];
    for (i, r) in radius.iter_mut().enumerate() {
        let cross: f64 = diff
            .row(i)
            .iter()
            .zip(alpha_mag)
            .map(|(d, a)| if *d == 0.0 { 0.0 } else { d.abs() * a })
            .sum();
        let scale = center[i].abs() + x_max + mu;
        *r = 0.5 * cross + bloat + FLOW_SLACK * scale;
    }
    let mut basis = mid.pad_columns(1 + n);
    for i in 0..n {
        basis[(i, m)] = d0[i];
        basis[(i, m + 1 + i)] = radius[i];
    }
    let constraints = sk.constraints().pad_columns(1 + n);
    let (mut lo, mut hi) = match sk.predicate_bounds() {
        Some((l, u)) => (l.to_vec(), u.to_vec()),
        None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
    };
    lo.push(-0.5);
    hi.push(0.5);
    lo.extend(std::iter::repeat_n(-1.0, n));
    hi.extend(std::iter::repeat_n(1.0, n));
    Ok(StarSet::from_parts(
        center,
        basis,
        constraints,
        sk.rhs().to_vec(),
        Some((lo, hi)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntervalBox;
    use crate::node::OutputMode;

    fn unit_interval() -> StarSet {
        StarSet::from_box(&IntervalBox::new(vec![0.0], vec![1.0]).unwrap())
    }

    #[test]
    fn frozen_dynamics_keep_the_set() {
        let f = LinearOdeForm::new(Matrix::zeros(1, 1), vec![0.0]).unwrap();
        let tc = TimeConfig::new(1.0, 0.25, OutputMode::Flowpipe).unwrap();
        let fp = linear_reach(&f, &unit_interval(), &tc).unwrap();
        assert_eq!(fp.len(), 4);
        for st in &fp.steps {
            let b = st.set.to_star().box_bounds().unwrap();
            assert!(b.lower()[0] <= 0.0 && b.lower()[0] > -1e-9);
            assert!(b.upper()[0] >= 1.0 && b.upper()[0] < 1.0 + 1e-9);
        }
    }

    #[test]
    fn pure_drift_translates() {
        let f = LinearOdeForm::new(Matrix::zeros(2, 2), vec![1.0, 0.0]).unwrap();
        let s0 = StarSet::from_box(&IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let tc = TimeConfig::new(1.0, 0.1, OutputMode::FinalSet).unwrap();
        let fp = linear_reach(&f, &s0, &tc).unwrap();
        assert_eq!(fp.len(), 1);
        let b = fp.steps[0].set.to_star().box_bounds().unwrap();
        assert!((b.lower()[0] - 1.0).abs() < 1e-12 && (b.upper()[0] - 2.0).abs() < 1e-12);
        assert!((b.upper()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spiral_point_matches_closed_form() {
        // e^{At} for A = [[a, b], [-b, a]] is e^{at} times a rotation
        let (a, b) = (-0.1, 2.0);
        let f = LinearOdeForm::new(Matrix::from_rows(&[vec![a, b], vec![-b, a]]).unwrap(), vec![0.0, 0.0]).unwrap();
        let tc = TimeConfig::new(1.0, 0.01, OutputMode::Flowpipe).unwrap();
        let fp = linear_reach(&f, &StarSet::point(vec![2.0, 0.0]), &tc).unwrap();
        for t in [0.005, 0.5, 0.999, 1.0] {
            let r = 2.0 * math::exp(a * t);
            let x = [r * math::cos(b * t), -r * math::sin(b * t)];
            assert!(fp.at_time(t).any(|s| s.set.contains(&x).unwrap()), "t = {t}");
        }
    }
}
