//! 2-D projections of reach sets as polygon vertex lists.

use gnode_reach_core::gnode::{ReachResult, TaggedSet};
use gnode_reach_core::{Matrix, Result, StarSet};

/// Number of support directions sampled per polygon.
pub const DIRECTIONS: usize = 32;

/// Convex polygon, counter-clockwise, of the projection of `s` onto
/// coordinates `(i, j)`. Vertices are LP support points, so the polygon is
/// inscribed in the true projection and touches it in every sampled direction.
pub fn project(s: &StarSet, i: usize, j: usize) -> Result<Vec<[f64; 2]>> {
    let mut p = Matrix::zeros(2, s.dim());
    p[(0, i)] = 1.0;
    p[(1, j)] = 1.0;
    let flat = s.affine_map(&p, &[0.0, 0.0])?;
    let mut pts = Vec::with_capacity(DIRECTIONS);
    for k in 0..DIRECTIONS {
        let a = 2.0 * std::f64::consts::PI * k as f64 / DIRECTIONS as f64;
        let v = flat.support_point(&[a.cos(), a.sin()])?;
        pts.push([v[0], v[1]]);
    }
    Ok(convex_hull(pts))
}

/// Andrew's monotone chain; drops repeated and collinear points.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let scale = pts.iter().fold(1.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let tol = 1e-12 * scale;
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let area_tol = tol * scale;
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], *p) <= area_tol {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// CSV of `set,layer,t_lo,t_hi,vertex,x,y` rows for the final sets of `r`.
/// Sets outside any flowpipe get empty time columns.
pub fn projection_csv(r: &ReachResult, i: usize, j: usize) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["set", "layer", "t_lo", "t_hi", "vertex", "x", "y"])?;
    for (k, TaggedSet { tags, set }) in r.final_sets().iter().enumerate() {
        let (layer, lo, hi) = match tags.last() {
            Some(t) => (t.layer.to_string(), t.t_lo.to_string(), t.t_hi.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        for (v, p) in project(set, i, j)?.iter().enumerate() {
            w.write_record([
                k.to_string(),
                layer.clone(),
                lo.clone(),
                hi.clone(),
                v.to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gnode_reach_core::IntervalBox;

    #[test]
    fn square_projects_to_four_corners() {
        let s = StarSet::from_box(&IntervalBox::new(vec![0.0, 5.0, -1.0], vec![1.0, 6.0, 1.0]).unwrap());
        let mut poly = project(&s, 0, 2).unwrap();
        poly.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        assert_eq!(poly, vec![[0.0, -1.0], [0.0, 1.0], [1.0, -1.0], [1.0, 1.0]]);
    }

    #[test]
    fn hull_is_counter_clockwise_and_drops_interior() {
        let h = convex_hull(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 0.5],
            [2.0, 2.0],
            [0.0, 2.0],
            [1.0, 0.0],
        ]);
        assert_eq!(h, vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
    }

    #[test]
    fn point_set_gives_one_vertex() {
        assert_eq!(
            project(&StarSet::point(vec![1.0, 2.0]), 0, 1).unwrap(),
            vec![[1.0, 2.0]]
        );
    }
}
