use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{IntervalBox, StarSet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Zonotope `{c + Gβ | β ∈ [-1, 1]^p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZonoRepr", into = "ZonoRepr")]
pub struct Zonotope {
    center: Vec<f64>,
    generators: Matrix,
}

#[derive(Serialize, Deserialize)]
struct ZonoRepr {
    center: Vec<f64>,
    generators: Matrix,
}

impl From<Zonotope> for ZonoRepr {
    fn from(z: Zonotope) -> Self {
        ZonoRepr {
            center: z.center,
            generators: z.generators,
        }
    }
}

impl TryFrom<ZonoRepr> for Zonotope {
    type Error = Error;
    fn try_from(r: ZonoRepr) -> Result<Self> {
        let n = r.center.len();
        let g = if r.generators.rows() == 0 {
            Matrix::zeros(n, 0)
        } else {
            r.generators
        };
        Zonotope::new(r.center, g)
    }
}

impl Zonotope {
    pub fn new(center: Vec<f64>, generators: Matrix) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::shape("zonotope of dimension 0"));
        }
        if generators.rows() != center.len() {
            return Err(Error::shape(format!(
                "generator matrix has {} rows for center of length {}",
                generators.rows(),
                center.len()
            )));
        }
        if !math::all_finite(&center) || !generators.is_finite() {
            return Err(Error::NonFinite("zonotope data".into()));
        }
        Ok(Zonotope { center, generators })
    }

    pub fn from_box(b: &IntervalBox) -> Self {
        let r = b.radius();
        let active: Vec<usize> = (0..b.dim()).filter(|i| r[*i] > 0.0).collect();
        let mut g = Matrix::zeros(b.dim(), active.len());
        for (k, &i) in active.iter().enumerate() {
            g[(i, k)] = r[i];
        }
        Zonotope {
            center: b.center(),
            generators: g,
        }
    }

    pub fn point(x: Vec<f64>) -> Self {
        let n = x.len();
        Zonotope {
            center: x,
            generators: Matrix::zeros(n, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.cols()
    }

    /// Generators per dimension.
    pub fn order(&self) -> f64 {
        self.num_generators() as f64 / self.dim() as f64
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    /// Half-widths of the interval hull, `Σ_j |G_ij|`.
    pub fn radius(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.generators.row(i).iter().map(|g| g.abs()).sum())
            .collect()
    }

    pub fn interval_hull(&self) -> IntervalBox {
        let r = self.radius();
        let lo = self.center.iter().zip(&r).map(|(c, r)| math::down(c - r)).collect();
        let hi = self.center.iter().zip(&r).map(|(c, r)| math::up(c + r)).collect();
        IntervalBox::new(lo, hi).expect("radius is non-negative")
    }

    /// The same set as a star with box predicate `[-1, 1]^p`.
    pub fn to_star(&self) -> StarSet {
        let p = self.num_generators();
        StarSet::from_parts(
            self.center.clone(),
            self.generators.clone(),
            Matrix::zeros(0, p),
            Vec::new(),
            Some((vec![-1.0; p], vec![1.0; p])),
        )
    }

    pub fn affine_map(&self, w: &Matrix, b: &[f64]) -> Result<Zonotope> {
        if w.cols() != self.dim() || w.rows() != b.len() {
            return Err(Error::shape(format!(
                "affine map {}x{} with bias of length {} applied to zonotope of dimension {}",
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
        Ok(Zonotope {
            center,
            generators: w.matmul(&self.generators)?,
        })
    }

    pub fn translate(&self, v: &[f64]) -> Result<Zonotope> {
        if v.len() != self.dim() {
            return Err(Error::shape("translation of wrong length"));
        }
        Ok(Zonotope {
            center: self.center.iter().zip(v).map(|(a, b)| a + b).collect(),
            generators: self.generators.clone(),
        })
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if other.dim() != self.dim() {
            return Err(Error::shape("Minkowski sum of zonotopes of different dimension"));
        }
        Ok(Zonotope {
            center: self.center.iter().zip(&other.center).map(|(a, b)| a + b).collect(),
            generators: self.generators.hstack(&other.generators)?,
        })
    }

    /// Adds the centered box with half-widths `radius`.
    pub fn add_box(&self, radius: &[f64]) -> Result<Zonotope> {
        if radius.len() != self.dim() {
            return Err(Error::shape("box radius of wrong length"));
        }
        let active: Vec<usize> = (0..self.dim()).filter(|i| radius[*i] > 0.0).collect();
        let mut g = Matrix::zeros(self.dim(), active.len());
        for (k, &i) in active.iter().enumerate() {
            g[(i, k)] = radius[i];
        }
        Ok(Zonotope {
            center: self.center.clone(),
            generators: self.generators.hstack(&g)?,
        })
    }

    /// Girard reduction to at most `⌊n · max_order⌋` generators.
    ///
    /// The largest generators by Euclidean norm are kept and the rest are
    /// replaced by their axis-aligned bounding box.
    pub fn order_reduce(&self, max_order: f64) -> Zonotope {
        let n = self.dim();
        let p = self.num_generators();
        let limit = math::floor(n as f64 * max_order).max(n as f64) as usize;
        if p <= limit {
            return self.clone();
        }
        let keep = limit - n;
        let mut idx: Vec<usize> = (0..p).collect();
        let norms: Vec<f64> = (0..p).map(|j| math::norm2(&self.generators.column(j))).collect();
        idx.sort_by(|a, b| norms[*b].total_cmp(&norms[*a]).then(a.cmp(b)));
        let mut kept: Vec<usize> = idx[..keep].to_vec();
        kept.sort_unstable();
        let mut boxed = vec![0.0; n];
        for &j in &idx[keep..] {
            for (i, r) in boxed.iter_mut().enumerate() {
                *r += self.generators[(i, j)].abs();
            }
        }
        let mut g = self.generators.select_columns(&kept).pad_columns(n);
        for (i, r) in boxed.iter().enumerate() {
            g[(i, keep + i)] = *r;
        }
        Zonotope {
            center: self.center.clone(),
            generators: g,
        }
    }

    /// Membership within [`TAU_MEM`].
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::shape("point of wrong dimension"));
        }
        self.to_star().contains(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_diamond() {
        let g = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let z = Zonotope::new(vec![0.0, 1.0], g).unwrap();
        let h = z.interval_hull();
        assert!(h.lower()[0] <= -2.0 && h.upper()[1] >= 3.0);
        assert!(z.contains(&[0.0, 2.9]).unwrap());
        assert!(!z.contains(&[1.5, 2.9]).unwrap());
    }

    #[test]
    fn reduction_respects_order_and_encloses() {
        let cols = 9;
        let mut g = Matrix::zeros(2, cols);
        for j in 0..cols {
            let t = j as f64 * 0.3;
            g[(0, j)] = math::cos(t) * (1.0 + j as f64 * 0.1);
            g[(1, j)] = math::sin(t) * (1.0 + j as f64 * 0.1);
        }
        let z = Zonotope::new(vec![0.0, 0.0], g).unwrap();
        let r = z.order_reduce(2.0);
        assert_eq!(r.num_generators(), 4);
        let (hz, hr) = (z.interval_hull(), r.interval_hull());
        assert!(hr.contains_box(&hz));
        for j in 0..cols {
            let v = z.generators().column(j);
            assert!(r.contains(&v).unwrap());
        }
    }

    #[test]
    fn small_zonotope_is_not_reduced() {
        let z = Zonotope::from_box(&IntervalBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap());
        assert_eq!(z.order_reduce(1.0), z);
    }

    #[test]
    fn star_round_trip_keeps_bounds() {
        let z = Zonotope::new(
            vec![1.0, -1.0],
            Matrix::from_rows(&[vec![0.5, 0.2], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let back = z.to_star().to_zonotope().unwrap();
        assert_eq!(back.center(), z.center());
        assert_eq!(back.generators(), z.generators());
    }
}
