use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// The region `{x | normalᵀ x ≤ offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HalfspaceRepr")]
pub struct HalfspaceSpec {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Deserialize)]
struct HalfspaceRepr {
    normal: Vec<f64>,
    offset: f64,
}

impl TryFrom<HalfspaceRepr> for HalfspaceSpec {
    type Error = Error;
    fn try_from(r: HalfspaceRepr) -> Result<Self> {
        HalfspaceSpec::new(r.normal, r.offset)
    }
}

impl HalfspaceSpec {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::shape("halfspace normal is empty"));
        }
        if !math::all_finite(&normal) || !offset.is_finite() {
            return Err(Error::NonFinite("halfspace".into()));
        }
        if normal.iter().all(|a| *a == 0.0) {
            return Err(Error::InvalidArgument("halfspace normal is zero".into()));
        }
        Ok(HalfspaceSpec { normal, offset })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        math::dot(&self.normal, x) <= self.offset
    }

    /// The closed complement `{x | -normalᵀ x ≤ -offset}`.
    pub fn complement(&self) -> HalfspaceSpec {
        HalfspaceSpec {
            normal: self.normal.iter().map(|a| -a).collect(),
            offset: -self.offset,
        }
    }
}
