//! Per-triangle and per-vertex geometric quantities shared by the solver,
//! the Steklov discretization and the curvature checks.

use crate::Vec3;

/// Twice the signed area vector of the triangle `(a, b, c)`.
#[inline]
pub fn area_vector(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * area_vector(a, b, c).norm()
}

/// Cotangent of the angle at `apex` between the rays to `p` and `q`.
#[inline]
pub fn cotangent(apex: &Vec3, p: &Vec3, q: &Vec3) -> f64 {
    let u = p - apex;
    let v = q - apex;
    u.dot(&v) / u.cross(&v).norm()
}

/// Interior angle at `apex`.
#[inline]
pub fn angle(apex: &Vec3, p: &Vec3, q: &Vec3) -> f64 {
    let u = p - apex;
    let v = q - apex;
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Triangle corners of face `f`.
#[inline]
pub fn corners(positions: &[Vec3], face: &[usize; 3]) -> [Vec3; 3] {
    [positions[face[0]], positions[face[1]], positions[face[2]]]
}

/// Area-weighted vertex normals (sum of incident face area vectors).
/// At boundary vertices only the incident faces contribute, so the normal is
/// one-sided there.
pub fn vertex_normals(positions: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut normals = vec![Vec3::zeros(); positions.len()];
    for f in faces {
        let [a, b, c] = corners(positions, f);
        let n = area_vector(&a, &b, &c);
        for &v in f {
            normals[v] += n;
        }
    }
    for n in &mut normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    normals
}

/// Barycentric vertex areas: a third of each incident face. Sums to the
/// total area exactly.
pub fn barycentric_areas(positions: &[Vec3], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut areas = vec![0.0; positions.len()];
    for f in faces {
        let [a, b, c] = corners(positions, f);
        let third = triangle_area(&a, &b, &c) / 3.0;
        for &v in f {
            areas[v] += third;
        }
    }
    areas
}

/// Mixed Voronoi vertex areas: the Voronoi region for non-obtuse triangles,
/// and the half/quarter split for obtuse ones. These also sum to the total
/// area.
pub fn mixed_areas(positions: &[Vec3], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut areas = vec![0.0; positions.len()];
    for f in faces {
        let p = corners(positions, f);
        let area = triangle_area(&p[0], &p[1], &p[2]);
        let obtuse = (0..3).find(|&i| {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            (b - a).dot(&(c - a)) < 0.0
        });
        match obtuse {
            Some(o) => {
                for (i, &v) in f.iter().enumerate() {
                    areas[v] += if i == o { 0.5 * area } else { 0.25 * area };
                }
            }
            None => {
                for i in 0..3 {
                    let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                    // Edge b-c is opposite a; it contributes to b and c.
                    let w = cotangent(&a, &b, &c) * (c - b).norm_squared() / 8.0;
                    areas[f[(i + 1) % 3]] += w;
                    areas[f[(i + 2) % 3]] += w;
                }
            }
        }
    }
    areas
}

/// Project `v` onto the plane orthogonal to the unit vector `n`.
#[inline]
pub fn tangential(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * n.dot(v)
}

/// An orthonormal pair spanning the plane orthogonal to the unit vector `n`.
pub fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = tangential(&axis, n).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}
