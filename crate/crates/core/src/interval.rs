//! Closed real intervals with outward rounding.

use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::math::{down, up};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Largest absolute value.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// `s · self` for a real scalar.
    pub fn scale(&self, s: f64) -> Interval {
        if s >= 0.0 {
            Interval::new(down(s * self.lo), up(s * self.hi))
        } else {
            Interval::new(down(s * self.hi), up(s * self.lo))
        }
    }

    /// Image under a monotone non-decreasing function, widened by a few ulps to
    /// cover libm inaccuracy.
    pub fn monotone(&self, f: impl Fn(f64) -> f64) -> Interval {
        let lo = f(self.lo);
        let hi = f(self.hi);
        Interval::new(
            down(lo - 4.0 * f64::EPSILON * lo.abs()),
            up(hi + 4.0 * f64::EPSILON * hi.abs()),
        )
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(down(self.lo + o.lo), up(self.hi + o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::new(down(self.lo - o.hi), up(self.hi - o.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(down(lo), up(hi))
    }
}

/// `Σ_j w_j x_j + b` with real weights and interval arguments.
pub fn affine_row(w: &[f64], x: &[Interval], b: f64) -> Interval {
    w.iter()
        .zip(x)
        .fold(Interval::point(b), |acc, (wj, xj)| acc + xj.scale(*wj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplication_covers_sign_cases() {
        let a = Interval::new(-1.0, 2.0);
        let b = Interval::new(-3.0, 0.5);
        let p = a * b;
        assert!(p.lo <= -6.0 && p.hi >= 3.0);
        assert!(p.lo > -6.0 - 1e-12 && p.hi < 3.0 + 1e-12);
    }

    #[test]
    fn outward_rounding_keeps_point() {
        let x = Interval::point(0.1) + Interval::point(0.2);
        assert!(x.contains(0.1 + 0.2));
        assert!(x.lo < x.hi);
    }

    #[test]
    fn negative_scale_swaps() {
        let x = Interval::new(1.0, 2.0).scale(-2.0);
        assert!(x.lo <= -4.0 && x.hi >= -2.0);
    }
}
