//! Adaptive Dormand–Prince RK45 integration with exact sample stops.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-10,
            rtol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// `(t, x)` samples in time order.
pub type Trace = Vec<(f64, Vec<f64>)>;

/// Integrates `ẋ = f(x)` from `x0` over `[0, t_f]`.
///
/// The integrator lands exactly on every time in `samples` (which must lie in
/// `[0, t_f]`) and records the state there. Returns the state at `t_f` and
/// the recorded `(t, x)` pairs in time order.
pub fn integrate<F>(f: F, x0: &[f64], t_f: f64, samples: &[f64], opts: &OdeOptions) -> Result<(Vec<f64>, Trace)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!("integration horizon {t_f}")));
    }
    if !math::all_finite(x0) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let mut stops: Vec<f64> = samples.iter().copied().filter(|t| *t >= 0.0 && *t <= t_f).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut record = Vec::with_capacity(stops.len());
    let mut next_stop = 0;
    while next_stop < stops.len() && stops[next_stop] <= 0.0 {
        record.push((stops[next_stop], x.clone()));
        next_stop += 1;
    }
    if t_f == 0.0 {
        return Ok((x, record));
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = f(&x)?;
    let mut h = initial_step(&x, &k[0], t_f, opts);
    let mut taken = 0usize;
    let mut tmp = vec![0.0; n];
    while t < t_f {
        taken += 1;
        if taken > opts.max_steps {
            return Err(Error::Integration(format!("step limit reached at t = {t}")));
        }
        let target = if next_stop < stops.len() { stops[next_stop] } else { t_f };
        let mut landing = false;
        if t + h >= target || target - (t + h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            landing = true;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = x[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            k[s] = f(&tmp)?;
        }
        // k[6] is f at the fifth-order solution (first-same-as-last)
        let mut err = 0.0f64;
        let mut x5 = vec![0.0; n];
        for i in 0..n {
            let mut y5 = x[i];
            let mut y4 = x[i];
            for s in 0..7 {
                y5 += h * B5[s] * k[s][i];
                y4 += h * B4[s] * k[s][i];
            }
            x5[i] = y5;
            let sc = opts.atol + opts.rtol * x[i].abs().max(y5.abs());
            let e = (y5 - y4) / sc;
            err = err.max(e.abs());
        }
        if !err.is_finite() || !math::all_finite(&x5) {
            if h < 1e-14 {
                return Err(Error::Integration(format!("non-finite state at t = {t}")));
            }
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t = if landing { target } else { t + h };
            x = x5;
            k[0] = k[6].clone();
            while next_stop < stops.len() && stops[next_stop] <= t {
                record.push((stops[next_stop], x.clone()));
                next_stop += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * libm::pow(err, -0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * t_f.max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
    }
    Ok((x, record))
}

fn sq(x: f64) -> f64 {
    x * x
}

fn initial_step(x: &[f64], f0: &[f64], t_f: f64, opts: &OdeOptions) -> f64 {
    let d0 = x.iter().map(|v| sq(v / (opts.atol + opts.rtol * v.abs()))).sum::<f64>();
    let d1 = x
        .iter()
        .zip(f0)
        .map(|(v, d)| sq(d / (opts.atol + opts.rtol * v.abs())))
        .sum::<f64>();
    let h = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * math::sqrt(d0 / d1)
    };
    h.min(t_f).max(1e-12 * t_f)
}
