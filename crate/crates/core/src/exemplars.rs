//! Closed-form free-boundary minimal surfaces in the unit ball and a seeded
//! perturbation generator for solver inputs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{area_vector, corners, tangential, vertex_normals};
use crate::{ConvexAmbient, Error, Result, TriMesh, Vec3};

/// Structured polar triangulation of the unit disk in the plane `z = 0`:
/// a centre vertex and `n_radial` rings of `n_angular` vertices each.
pub fn equatorial_disk(n_radial: usize, n_angular: usize) -> Result<TriMesh> {
    if n_radial < 2 || n_angular < 8 {
        return Err(Error::InvalidArgument(format!(
            "equatorial disk needs n_radial >= 2 and n_angular >= 8, got ({n_radial}, {n_angular})"
        )));
    }
    let mut vertices = vec![Vec3::zeros()];
    for i in 1..=n_radial {
        let r = i as f64 / n_radial as f64;
        for j in 0..n_angular {
            let t = 2.0 * PI * j as f64 / n_angular as f64;
            let (s, c) = t.sin_cos();
            // The outer ring is placed by (cos, sin) alone so it sits on the circle.
            let p = if i == n_radial { Vec3::new(c, s, 0.0) } else { Vec3::new(r * c, r * s, 0.0) };
            vertices.push(p);
        }
    }
    let id = |ring: usize, j: usize| 1 + (ring - 1) * n_angular + (j % n_angular);
    let mut faces = Vec::with_capacity(n_angular * (2 * n_radial - 1));
    for j in 0..n_angular {
        faces.push([0, id(1, j), id(1, j + 1)]);
    }
    for ring in 1..n_radial {
        for j in 0..n_angular {
            let (a, b) = (id(ring, j), id(ring, j + 1));
            let (c, d) = (id(ring + 1, j), id(ring + 1, j + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    TriMesh::build(vertices, faces)
}

/// Parameters of the critical catenoid
/// `x(s, t) = c (cosh s cos t, cosh s sin t, s)`, `|s| <= s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatenoidParameters {
    /// Positive root of `t tanh t = 1`.
    pub s0: f64,
    /// Scale `(cosh^2 s0 + s0^2)^(-1/2)`.
    pub c: f64,
    /// Radius of each boundary circle, `c cosh s0`.
    pub boundary_radius: f64,
    /// Total boundary length `4 pi c cosh s0`.
    pub boundary_length: f64,
    /// Area `pi c^2 (2 s0 + sinh 2 s0)`.
    pub area: f64,
}

/// Bisection for the root of `t tanh t - 1` on `[1, 1.5]`.
pub fn critical_catenoid_parameters() -> Result<CatenoidParameters> {
    let f = |t: f64| t * t.tanh() - 1.0;
    let (mut lo, mut hi) = (1.0_f64, 1.5_f64);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return Err(Error::Precondition("catenoid root is not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s0 = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    if f(s0).abs() > 1e-13 {
        return Err(Error::Precondition(format!(
            "catenoid root finder stalled with residual {:e}",
            f(s0)
        )));
    }
    let c = 1.0 / (s0.cosh().powi(2) + s0 * s0).sqrt();
    let boundary_radius = c * s0.cosh();
    Ok(CatenoidParameters {
        s0,
        c,
        boundary_radius,
        boundary_length: 4.0 * PI * boundary_radius,
        area: PI * c * c * (2.0 * s0 + (2.0 * s0).sinh()),
    })
}

/// Tensor-grid triangulation of the critical catenoid with `n_s` intervals in
/// `s` and `n_theta` around. Boundary circles are normalized onto the unit
/// sphere.
pub fn critical_catenoid(n_s: usize, n_theta: usize) -> Result<TriMesh> {
    if n_s < 8 || n_theta < 16 {
        return Err(Error::InvalidArgument(format!(
            "critical catenoid needs n_s >= 8 and n_theta >= 16, got ({n_s}, {n_theta})"
        )));
    }
    let p = critical_catenoid_parameters()?;
    let mut vertices = Vec::with_capacity((n_s + 1) * n_theta);
    for i in 0..=n_s {
        let s = -p.s0 + 2.0 * p.s0 * i as f64 / n_s as f64;
        let s = if i == n_s { p.s0 } else { s };
        for j in 0..n_theta {
            let t = 2.0 * PI * j as f64 / n_theta as f64;
            let (st, ct) = t.sin_cos();
            let x = Vec3::new(p.c * s.cosh() * ct, p.c * s.cosh() * st, p.c * s);
            vertices.push(if i == 0 || i == n_s { x / x.norm() } else { x });
        }
    }
    let id = |i: usize, j: usize| i * n_theta + (j % n_theta);
    let mut faces = Vec::with_capacity(2 * n_s * n_theta);
    for i in 0..n_s {
        for j in 0..n_theta {
            let (a, b) = (id(i, j), id(i, j + 1));
            let (c, d) = (id(i + 1, j), id(i + 1, j + 1));
            // Alternate the diagonal so the grid has no preferred shear.
            if (i + j) % 2 == 0 {
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            } else {
                faces.push([a, b, c]);
                faces.push([b, d, c]);
            }
        }
    }
    TriMesh::build(vertices, faces)
}

/// Number of `s` intervals giving nearly square cells for `n_theta` angular
/// intervals (the parametrization is conformal).
pub fn conformal_catenoid_rings(n_theta: usize) -> Result<usize> {
    let p = critical_catenoid_parameters()?;
    let n = (n_theta as f64 * p.s0 / PI).round() as usize;
    Ok(n.max(8))
}

/// Sum of a few random low-frequency plane waves in each coordinate.
struct SmoothField {
    waves: Vec<(Vec3, f64, Vec3)>,
}

impl SmoothField {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let waves = (0..6)
            .map(|_| {
                let k = Vec3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                );
                let phase = rng.random_range(0.0..2.0 * PI);
                let amp = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                (k, phase, amp)
            })
            .collect();
        Self { waves }
    }

    fn eval(&self, x: &Vec3) -> Vec3 {
        self.waves
            .iter()
            .map(|(k, phase, amp)| amp * (k.dot(x) + phase).sin())
            .sum()
    }
}

/// Seeded smooth perturbation. Interior vertices move along their vertex
/// normals, boundary vertices move tangentially to the ambient boundary and
/// are projected back. The largest displacement before projection equals
/// `amplitude`. Faces that flip or collapse are rejected.
pub fn perturb(mesh: &TriMesh, ambient: &ConvexAmbient, amplitude: f64, seed: u64) -> Result<TriMesh> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    if amplitude == 0.0 {
        return Ok(mesh.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = SmoothField::new(&mut rng);
    let x = mesh.vertices();
    let normals = vertex_normals(x, mesh.faces());

    let mut disp = Vec::with_capacity(x.len());
    for (v, p) in x.iter().enumerate() {
        let g = field.eval(p);
        let d = if mesh.is_boundary_vertex(v) {
            let n = ambient.boundary_normal(p)?;
            tangential(&g, &n)
        } else {
            normals[v] * g.dot(&normals[v])
        };
        disp.push(d);
    }
    let sup = disp.iter().map(|d| d.norm()).fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(mesh.clone());
    }
    let scale = amplitude / sup;
    let mut moved = Vec::with_capacity(x.len());
    for (v, p) in x.iter().enumerate() {
        let q = p + disp[v] * scale;
        moved.push(if mesh.is_boundary_vertex(v) { ambient.project_to_boundary(&q)? } else { q });
    }
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = corners(x, f);
        let [a2, b2, c2] = corners(&moved, f);
        let before = area_vector(&a, &b, &c);
        let after = area_vector(&a2, &b2, &c2);
        if after.dot(&before) <= 1e-3 * before.norm_squared() {
            return Err(Error::PerturbationDegenerate(fi));
        }
    }
    mesh.with_vertices(moved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disk_basic_properties() {
        let m = equatorial_disk(8, 32).unwrap();
        assert_eq!(m.num_vertices(), 1 + 8 * 32);
        let t = m.topology().unwrap();
        assert_eq!((t.genus, t.boundary_components, t.euler_characteristic), (0, 1, 1));
        assert!(m.vertices().iter().all(|p| p.z == 0.0));
        for &b in &m.boundary_vertices() {
            assert!((m.vertices()[b].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disk_rejects_coarse_arguments() {
        assert!(equatorial_disk(1, 32).is_err());
        assert!(equatorial_disk(4, 7).is_err());
    }

    #[test]
    fn catenoid_parameters_match_bisection_oracle() {
        let p = critical_catenoid_parameters().unwrap();
        assert!((p.s0 * p.s0.tanh() - 1.0).abs() <= 1e-13);
        // Frozen from an independent double-precision bisection.
        assert!((p.s0 - 1.1996786402577337).abs() < 1e-14);
        assert!((p.c - 0.46048508825013396).abs() < 1e-14);
        assert!((p.boundary_radius - 0.8335565596009648).abs() < 1e-14);
        // With s0 tanh s0 = 1 the closed forms collapse to L = 4 pi / s0, A = L / 2.
        assert_relative_eq!(p.boundary_length, 4.0 * PI / p.s0, max_relative = 1e-13);
        assert_relative_eq!(p.area, 0.5 * p.boundary_length, max_relative = 1e-13);
    }

    #[test]
    fn catenoid_mesh_lies_on_sphere_at_boundary() {
        let m = critical_catenoid(12, 32).unwrap();
        let t = m.topology().unwrap();
        assert_eq!((t.genus, t.boundary_components, t.euler_characteristic), (0, 2, 0));
        for &b in &m.boundary_vertices() {
            assert!((m.vertices()[b].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturb_is_deterministic_and_bounded() {
        let ball = ConvexAmbient::unit_ball();
        let disk = equatorial_disk(8, 32).unwrap();
        let a = perturb(&disk, &ball, 0.05, 7).unwrap();
        let b = perturb(&disk, &ball, 0.05, 7).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        let max_disp = a
            .vertices()
            .iter()
            .zip(disk.vertices())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(max_disp <= 0.05 + 1e-15, "{max_disp}");
        assert!(max_disp > 0.01);
        assert_eq!(perturb(&disk, &ball, 0.0, 7).unwrap().vertices(), disk.vertices());
        for &v in &a.boundary_vertices() {
            assert!((a.vertices()[v].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_perturbation_is_rejected() {
        let ball = ConvexAmbient::unit_ball();
        let disk = equatorial_disk(8, 32).unwrap();
        assert!(matches!(perturb(&disk, &ball, 5.0, 1), Err(Error::PerturbationDegenerate(_))));
    }
}
