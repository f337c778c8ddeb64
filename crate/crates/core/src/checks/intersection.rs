//! Exact triangle-triangle intersection between two meshes, with a uniform
//! grid for candidate pairs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{area_vector, corners};
use crate::{TriMesh, Vec3};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub intersects: bool,
    /// A point common to both meshes, from the first intersecting face pair
    /// in (face of A, face of B) order.
    pub witness: Option<[f64; 3]>,
    pub witness_faces: Option<(usize, usize)>,
    /// Lower bound on the distance between the meshes when they are disjoint.
    pub distance_lower_bound: Option<f64>,
}

#[derive(Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn of(t: &[Vec3; 3]) -> Self {
        Self {
            lo: t[0].inf(&t[1]).inf(&t[2]),
            hi: t[0].sup(&t[1]).sup(&t[2]),
        }
    }

    fn inflate(&self, d: f64) -> Self {
        let e = Vec3::repeat(d);
        Self {
            lo: self.lo - e,
            hi: self.hi + e,
        }
    }

    fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] && o.lo[k] <= self.hi[k])
    }
}

/// Segment `p + t (q - p)`, `t` in `[0, 1]`, against a triangle (non-coplanar
/// case). Returns the crossing point.
fn segment_triangle(p: &Vec3, q: &Vec3, tri: &[Vec3; 3]) -> Option<Vec3> {
    let dir = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= EPS * scale {
        return None;
    }
    let s = p - tri[0];
    let u = s.dot(&h) / det;
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) / det;
    let t = e2.dot(&qv) / det;
    let tol = 1e-12;
    if u < -tol || v < -tol || u + v > 1.0 + tol || t < -tol || t > 1.0 + tol {
        return None;
    }
    Some(p + dir * t)
}

/// Barycentric inclusion test for a point in the plane of `tri`.
fn point_in_triangle(p: &Vec3, tri: &[Vec3; 3]) -> bool {
    let n = area_vector(&tri[0], &tri[1], &tri[2]);
    let nn = n.norm_squared();
    (0..3).all(|i| {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        area_vector(&a, &b, p).dot(&n) >= -1e-12 * nn
    })
}

/// Closest points of two segments.
fn segment_segment(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return (*p1, *p2);
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

/// Closest point on a triangle to `p`.
fn closest_on_triangle(p: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let n = area_vector(&tri[0], &tri[1], &tri[2]);
    let nn = n.norm_squared();
    let proj = p - n * (n.dot(&(p - tri[0])) / nn);
    if point_in_triangle(&proj, tri) {
        return proj;
    }
    let mut best = tri[0];
    let mut best_d = f64::INFINITY;
    for i in 0..3 {
        let (c, _) = segment_segment(&tri[i], &tri[(i + 1) % 3], p, p);
        let d = (c - p).norm();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn triangle_distance(a: &[Vec3; 3], b: &[Vec3; 3]) -> f64 {
    let mut d = f64::INFINITY;
    for p in a {
        d = d.min((closest_on_triangle(p, b) - p).norm());
    }
    for p in b {
        d = d.min((closest_on_triangle(p, a) - p).norm());
    }
    for i in 0..3 {
        for j in 0..3 {
            let (x, y) = segment_segment(&a[i], &a[(i + 1) % 3], &b[j], &b[(j + 1) % 3]);
            d = d.min((x - y).norm());
        }
    }
    d
}

fn coplanar(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    let n = area_vector(&a[0], &a[1], &a[2]);
    let nl = n.norm();
    let size = (a[1] - a[0]).norm().max((b[1] - b[0]).norm());
    b.iter().all(|p| (n.dot(&(p - a[0])) / nl).abs() <= 1e-12 * size)
}

/// Intersection point of two triangles, if any.
pub fn triangle_intersection(a: &[Vec3; 3], b: &[Vec3; 3]) -> Option<Vec3> {
    if !Aabb::of(a).inflate(EPS).overlaps(&Aabb::of(b)) {
        return None;
    }
    if coplanar(a, b) {
        for p in a {
            if point_in_triangle(p, b) {
                return Some(*p);
            }
        }
        for p in b {
            if point_in_triangle(p, a) {
                return Some(*p);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = segment_segment(&a[i], &a[(i + 1) % 3], &b[j], &b[(j + 1) % 3]);
                if (x - y).norm() <= 1e-12 {
                    return Some(x);
                }
            }
        }
        return None;
    }
    for i in 0..3 {
        if let Some(p) = segment_triangle(&a[i], &a[(i + 1) % 3], b) {
            return Some(p);
        }
    }
    for i in 0..3 {
        if let Some(p) = segment_triangle(&b[i], &b[(i + 1) % 3], a) {
            return Some(p);
        }
    }
    None
}

type Cell = (i64, i64, i64);

struct Grid {
    cell: f64,
    bins: HashMap<Cell, Vec<usize>>,
}

impl Grid {
    fn key(&self, p: &Vec3) -> Cell {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        )
    }

    fn cells(&self, b: &Aabb) -> impl Iterator<Item = Cell> {
        let (l, h) = (self.key(&b.lo), self.key(&b.hi));
        (l.0..=h.0).flat_map(move |i| (l.1..=h.1).flat_map(move |j| (l.2..=h.2).map(move |k| (i, j, k))))
    }

    fn query(&self, b: &Aabb) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .cells(b)
            .filter_map(|c| self.bins.get(&c))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn mean_edge(mesh: &TriMesh) -> f64 {
    let x = mesh.vertices();
    let e = mesh.edges();
    e.iter().map(|[a, b]| (x[*a] - x[*b]).norm()).sum::<f64>() / e.len() as f64
}

/// Whether two meshes intersect, with a witness or a distance lower bound.
pub fn verify_intersection(mesh_a: &TriMesh, mesh_b: &TriMesh) -> Intersection {
    let ta: Vec<[Vec3; 3]> = mesh_a.faces().iter().map(|f| corners(mesh_a.vertices(), f)).collect();
    let tb: Vec<[Vec3; 3]> = mesh_b.faces().iter().map(|f| corners(mesh_b.vertices(), f)).collect();
    let cell = 2.0 * mean_edge(mesh_a).max(mean_edge(mesh_b));
    let mut grid = Grid {
        cell,
        bins: HashMap::new(),
    };
    let boxes_b: Vec<Aabb> = tb.iter().map(Aabb::of).collect();
    for (j, b) in boxes_b.iter().enumerate() {
        let cells: Vec<Cell> = grid.cells(&b.inflate(EPS)).collect();
        for c in cells {
            grid.bins.entry(c).or_default().push(j);
        }
    }
    let delta = cell;
    let mut lower = delta;
    for (i, a) in ta.iter().enumerate() {
        let box_a = Aabb::of(a);
        for j in grid.query(&box_a.inflate(EPS)) {
            if let Some(p) = triangle_intersection(a, &tb[j]) {
                return Intersection {
                    intersects: true,
                    witness: Some([p.x, p.y, p.z]),
                    witness_faces: Some((i, j)),
                    distance_lower_bound: None,
                };
            }
        }
        let near = box_a.inflate(delta);
        for j in grid.query(&near) {
            if near.overlaps(&boxes_b[j]) {
                lower = lower.min(triangle_distance(a, &tb[j]));
            }
        }
    }
    Intersection {
        intersects: false,
        witness: None,
        witness_faces: None,
        distance_lower_bound: Some(lower),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(p: [[f64; 3]; 3]) -> [Vec3; 3] {
        p.map(|c| Vec3::new(c[0], c[1], c[2]))
    }

    #[test]
    fn crossing_triangles() {
        let a = tri([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let b = tri([[0.2, 0.2, -1.0], [0.2, 0.2, 1.0], [0.3, 0.1, 1.0]]);
        let p = triangle_intersection(&a, &b).unwrap();
        assert!(p.z.abs() < 1e-12);
    }

    #[test]
    fn separated_triangles() {
        let a = tri([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let b = tri([[0.0, 0.0, 0.5], [1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]);
        assert!(triangle_intersection(&a, &b).is_none());
        assert!((triangle_distance(&a, &b) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn coplanar_overlap_and_touching_edge() {
        let a = tri([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let b = tri([[0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [2.0, 0.0, 0.0]]);
        assert!(triangle_intersection(&a, &b).is_some());
        let c = tri([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 0.0]]);
        assert!(triangle_intersection(&a, &c).is_some());
        let d = tri([[1.1, 0.0, 0.0], [2.0, 0.0, 0.0], [1.1, 1.0, 0.0]]);
        assert!(triangle_intersection(&a, &d).is_none());
    }
}
