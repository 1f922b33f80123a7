//! Point sampling from boxes, zonotopes and star sets.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{IntervalBox, StarSet, Zonotope};
use crate::error::{Error, Result};

/// A uniform point of the box.
pub fn uniform_in_box<R: Rng + ?Sized>(b: &IntervalBox, rng: &mut R) -> Vec<f64> {
    b.lower()
        .iter()
        .zip(b.upper())
        .map(|(l, u)| if l < u { rng.gen_range(*l..=*u) } else { *l })
        .collect()
}

/// Corners of the box; at most `limit`, chosen at random beyond that.
pub fn corners<R: Rng + ?Sized>(b: &IntervalBox, limit: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = b.dim();
    let pick = |mask: &dyn Fn(usize) -> bool| -> Vec<f64> {
        (0..n)
            .map(|i| if mask(i) { b.upper()[i] } else { b.lower()[i] })
            .collect()
    };
    if n < 20 && (1usize << n) <= limit {
        return (0..1usize << n).map(|k| pick(&|i| (k >> i) & 1 == 1)).collect();
    }
    (0..limit)
        .map(|_| {
            let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            pick(&|i| bits[i])
        })
        .collect()
}

/// Points on the box boundary: one random face per sample, other
/// coordinates uniform.
pub fn boundary_in_box<R: Rng + ?Sized>(b: &IntervalBox, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut x = uniform_in_box(b, rng);
            let i = rng.gen_range(0..b.dim());
            x[i] = if rng.gen() { b.upper()[i] } else { b.lower()[i] };
            x
        })
        .collect()
}

/// Uniform points of a zonotope's generator cube, mapped into the set.
pub fn sample_zonotope<R: Rng + ?Sized>(z: &Zonotope, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let p = z.num_generators();
    (0..count)
        .map(|_| {
            let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut x = z.generators().matvec(&beta)?;
            for (xi, c) in x.iter_mut().zip(z.center()) {
                *xi += c;
            }
            Ok(x)
        })
        .collect()
}

/// Points of a star set.
///
/// Box predicates are sampled uniformly. General predicates use rejection
/// from the predicate's bounding box and fall back to random convex
/// combinations of LP extreme points when rejection stalls.
pub fn sample_star<R: Rng + ?Sized>(s: &StarSet, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let m = s.num_vars();
    if m == 0 {
        return Ok(vec![s.center().to_vec(); count]);
    }
    let (lo, hi) = s.predicate_box()?;
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::Unbounded);
    }
    let pbox = IntervalBox::new(lo, hi)?;
    let mut out = Vec::with_capacity(count);
    if s.has_box_predicate() {
        for _ in 0..count {
            out.push(s.point_at(&uniform_in_box(&pbox, rng))?);
        }
        return Ok(out);
    }
    let mut tries = 0usize;
    let budget = 50 * count + 100;
    while out.len() < count && tries < budget {
        tries += 1;
        let alpha = uniform_in_box(&pbox, rng);
        if s.predicate_holds(&alpha, 0.0) {
            out.push(s.point_at(&alpha)?);
        }
    }
    if out.len() == count {
        return Ok(out);
    }
    let vertices = extreme_predicates(s, 2 * m + 2, rng)?;
    while out.len() < count {
        let w: Vec<f64> = vertices
            .iter()
            .map(|_| -crate::math::ln(rng.gen_range(1e-12..1.0)))
            .collect();
        let total: f64 = w.iter().sum();
        let mut alpha = vec![0.0; m];
        for (v, wi) in vertices.iter().zip(&w) {
            for (a, vj) in alpha.iter_mut().zip(v) {
                *a += wi / total * vj;
            }
        }
        out.push(s.point_at(&alpha)?);
    }
    Ok(out)
}

/// Predicate optimizers in random directions.
fn extreme_predicates<R: Rng + ?Sized>(s: &StarSet, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let m = s.num_vars();
    (0..count)
        .map(|_| {
            let w: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            s.minimize_over_predicate(&w).map(|(_, a)| a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HalfspaceSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_samples_stay_inside() {
        let b = IntervalBox::new(vec![-1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(b.contains(&uniform_in_box(&b, &mut rng)));
        }
        assert_eq!(corners(&b, 16, &mut rng).len(), 4);
        for x in boundary_in_box(&b, 20, &mut rng) {
            assert!(b.contains(&x));
        }
    }

    #[test]
    fn constrained_star_samples_are_members() {
        let s = StarSet::unit_box(2)
            .intersect_halfspace(&HalfspaceSpec::new(vec![1.0, 1.0], -1.9).unwrap())
            .unwrap()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for x in sample_star(&s, 30, &mut rng).unwrap() {
            assert!(s.contains(&x).unwrap());
        }
    }
}
