use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr")]
pub struct IntervalBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for IntervalBox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        IntervalBox::new(r.lower, r.upper)
    }
}

impl IntervalBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::shape(format!(
                "box bounds of lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() {
                return Err(Error::NonFinite(format!("box bound {i}")));
            }
            if l > u {
                return Err(Error::InvalidArgument(format!(
                    "box lower bound {l} exceeds upper bound {u} in dimension {i}"
                )));
            }
        }
        Ok(IntervalBox { lower, upper })
    }

    /// Box of half-width `delta` around `center`.
    pub fn around(center: &[f64], delta: f64) -> Result<Self> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::InvalidArgument(format!("box radius {delta}")));
        }
        IntervalBox::new(
            center.iter().map(|c| c - delta).collect(),
            center.iter().map(|c| c + delta).collect(),
        )
    }

    pub fn from_intervals(iv: &[Interval]) -> Result<Self> {
        IntervalBox::new(iv.iter().map(|i| i.lo).collect(), iv.iter().map(|i| i.hi).collect())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn radius(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| Interval::new(*l, *u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Whether `other` lies inside `self`.
    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox> {
        if self.dim() != other.dim() {
            return Err(Error::shape("hull of boxes of different dimension"));
        }
        IntervalBox::new(
            self.lower.iter().zip(&other.lower).map(|(a, b)| a.min(*b)).collect(),
            self.upper.iter().zip(&other.upper).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    /// Scales half-widths by `factor` about the center and adds `floor` to each.
    pub fn enlarge(&self, factor: f64, floor: f64) -> IntervalBox {
        let c = self.center();
        let r = self.radius();
        let (lower, upper) = c
            .iter()
            .zip(&r)
            .map(|(c, r)| {
                let w = r * factor + floor;
                (c - w, c + w)
            })
            .unzip();
        IntervalBox { lower, upper }
    }

    /// Product of side lengths.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().chain(&self.upper).fold(0.0, |m, v| m.max(v.abs()))
    }
}
