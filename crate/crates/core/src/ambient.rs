//! The strictly convex container domain M.
//!
//! Two kinds are supported: a round ball centred at the origin and a convex
//! level-set body `{phi <= 0}` drawn from a small built-in registry. The
//! boundary second fundamental form is taken with respect to the inward
//! normal, so convexity means positive values; normals returned by
//! [`ConvexAmbient::boundary_normal`] point outward.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::geometry::tangent_frame;
use crate::{Error, Result, Vec3};

const MAX_NEWTON_STEPS: usize = 50;
const ON_BOUNDARY_TOL: f64 = 1e-9;
const CONVEXITY_SAMPLES: usize = 16_384;

/// Serialized description of an ambient domain, e.g.
/// `{"kind":"ball","radius":1.0}` or
/// `{"kind":"level_set","name":"ellipsoid","semiaxes":[1,1,2]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientConfig {
    Ball {
        radius: f64,
    },
    LevelSet {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        semiaxes: Option<[f64; 3]>,
    },
}

impl AmbientConfig {
    pub fn unit_ball() -> Self {
        Self::Ball { radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Domain {
    Ball { radius: f64 },
    /// `phi(x) = sum (x_i / a_i)^2 - 1`.
    Ellipsoid { semiaxes: [f64; 3] },
}

/// How the convexity constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convexity {
    pub k: f64,
    /// Number of sampled boundary points (0 when `k` is exact).
    pub sample_size: usize,
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct ConvexAmbient {
    domain: Domain,
    convexity: Convexity,
}

impl ConvexAmbient {
    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidAmbient(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self {
            domain: Domain::Ball { radius },
            convexity: Convexity {
                k: 1.0 / radius,
                sample_size: 0,
                exact: true,
            },
        })
    }

    pub fn unit_ball() -> Self {
        Self::ball(1.0).expect("unit radius is valid")
    }

    pub fn ellipsoid(semiaxes: [f64; 3]) -> Result<Self> {
        if semiaxes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidAmbient(format!(
                "ellipsoid semiaxes must be positive, got {semiaxes:?}"
            )));
        }
        let mut amb = Self {
            domain: Domain::Ellipsoid { semiaxes },
            convexity: Convexity {
                k: f64::NAN,
                sample_size: CONVEXITY_SAMPLES,
                exact: false,
            },
        };
        let k = amb.sampled_min_curvature(CONVEXITY_SAMPLES);
        if !(k > 0.0) {
            return Err(Error::NotConvex(k));
        }
        amb.convexity.k = k;
        Ok(amb)
    }

    pub fn from_config(config: &AmbientConfig) -> Result<Self> {
        match config {
            AmbientConfig::Ball { radius } => Self::ball(*radius),
            AmbientConfig::LevelSet { name, semiaxes } => match name.as_str() {
                "ellipsoid" => Self::ellipsoid(semiaxes.ok_or_else(|| {
                    Error::InvalidAmbient("ellipsoid requires \"semiaxes\"".into())
                })?),
                other => Err(Error::InvalidAmbient(format!(
                    "unknown level set {other:?} (built-in: \"ellipsoid\")"
                ))),
            },
        }
    }

    pub fn config(&self) -> AmbientConfig {
        match &self.domain {
            Domain::Ball { radius } => AmbientConfig::Ball { radius: *radius },
            Domain::Ellipsoid { semiaxes } => AmbientConfig::LevelSet {
                name: "ellipsoid".into(),
                semiaxes: Some(*semiaxes),
            },
        }
    }

    /// Radius if this is a round ball.
    pub fn ball_radius(&self) -> Option<f64> {
        match self.domain {
            Domain::Ball { radius } => Some(radius),
            Domain::Ellipsoid { .. } => None,
        }
    }

    pub fn convexity(&self) -> Convexity {
        self.convexity
    }

    /// Lower bound `k` on the boundary second fundamental form.
    pub fn convexity_constant(&self) -> f64 {
        self.convexity.k
    }

    fn phi(&self, p: &Vec3) -> f64 {
        match &self.domain {
            Domain::Ball { radius } => p.norm_squared() - radius * radius,
            Domain::Ellipsoid { semiaxes } => {
                (0..3).map(|i| (p[i] / semiaxes[i]).powi(2)).sum::<f64>() - 1.0
            }
        }
    }

    fn grad_phi(&self, p: &Vec3) -> Vec3 {
        match &self.domain {
            Domain::Ball { .. } => 2.0 * p,
            Domain::Ellipsoid { semiaxes } => {
                Vec3::from_fn(|i, _| 2.0 * p[i] / (semiaxes[i] * semiaxes[i]))
            }
        }
    }

    fn hess_phi(&self) -> Matrix3<f64> {
        match &self.domain {
            Domain::Ball { .. } => Matrix3::identity() * 2.0,
            Domain::Ellipsoid { semiaxes } => Matrix3::from_diagonal(&Vec3::from_fn(|i, _| {
                2.0 / (semiaxes[i] * semiaxes[i])
            })),
        }
    }

    /// Approximate distance from `p` to the boundary (exact for the ball).
    pub fn boundary_offset(&self, p: &Vec3) -> f64 {
        match &self.domain {
            Domain::Ball { radius } => (p.norm() - radius).abs(),
            Domain::Ellipsoid { .. } => {
                let g = self.grad_phi(p).norm();
                if g == 0.0 {
                    f64::INFINITY
                } else {
                    self.phi(p).abs() / g
                }
            }
        }
    }

    /// Whether `p` lies in the closed domain.
    pub fn contains(&self, p: &Vec3) -> bool {
        self.phi(p) <= 0.0
    }

    /// Move `p` onto the boundary: radially for the ball (nearest point), by
    /// Newton steps along the gradient of `phi` for level sets.
    pub fn project_to_boundary(&self, p: &Vec3) -> Result<Vec3> {
        match &self.domain {
            Domain::Ball { radius } => {
                let r = p.norm();
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::ProjectionSingular(p.x, p.y, p.z));
                }
                Ok(p * (radius / r))
            }
            Domain::Ellipsoid { semiaxes } => {
                let scale = semiaxes.iter().cloned().fold(0.0, f64::max);
                let mut x = *p;
                for _ in 0..MAX_NEWTON_STEPS {
                    let g = self.grad_phi(&x);
                    let g2 = g.norm_squared();
                    if !(g2 > 1e-24 / (scale * scale)) || !g2.is_finite() {
                        return Err(Error::ProjectionSingular(p.x, p.y, p.z));
                    }
                    let f = self.phi(&x);
                    if f.abs() <= 1e-14 {
                        return Ok(x);
                    }
                    x -= g * (f / g2);
                }
                if self.phi(&x).abs() <= 1e-12 {
                    Ok(x)
                } else {
                    Err(Error::ProjectionNonConvergence(MAX_NEWTON_STEPS))
                }
            }
        }
    }

    fn require_on_boundary(&self, p: &Vec3) -> Result<()> {
        let off = self.boundary_offset(p);
        if off > ON_BOUNDARY_TOL {
            return Err(Error::NotOnBoundary(off));
        }
        Ok(())
    }

    /// Outward unit normal of the boundary at `p`.
    pub fn boundary_normal(&self, p: &Vec3) -> Result<Vec3> {
        self.require_on_boundary(p)?;
        Ok(self.normal_field(p))
    }

    /// Normalized gradient of `phi`, defined off the boundary as well.
    pub fn normal_field(&self, p: &Vec3) -> Vec3 {
        match &self.domain {
            Domain::Ball { .. } => p / p.norm(),
            Domain::Ellipsoid { .. } => self.grad_phi(p).normalize(),
        }
    }

    /// Weingarten map of the boundary with respect to the inward normal as a
    /// 3x3 matrix acting on the tangent plane at `p` (zero on the normal).
    /// For the ball it is the tangential projector divided by the radius.
    /// This is also the derivative of [`Self::normal_field`] along tangent
    /// directions.
    pub fn shape_matrix(&self, p: &Vec3) -> Matrix3<f64> {
        let g = self.grad_phi(p);
        let n = g / g.norm();
        let proj = Matrix3::identity() - n * n.transpose();
        match &self.domain {
            Domain::Ball { radius } => proj / *radius,
            Domain::Ellipsoid { .. } => proj * self.hess_phi() * proj / g.norm(),
        }
    }

    /// `h(u, u)` for a unit tangent `u` at the boundary point `p`.
    pub fn boundary_shape_operator(&self, p: &Vec3, u: &Vec3) -> Result<f64> {
        self.require_on_boundary(p)?;
        let n = self.normal_field(p);
        let normal_part = u.dot(&n);
        if normal_part.abs() > 1e-9 {
            return Err(Error::NotTangent(normal_part));
        }
        if (u.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "tangent must be a unit vector (|u| = {})",
                u.norm()
            )));
        }
        Ok(match &self.domain {
            Domain::Ball { radius } => 1.0 / radius,
            Domain::Ellipsoid { .. } => {
                (u.transpose() * self.hess_phi() * u)[0] / self.grad_phi(p).norm()
            }
        })
    }

    /// Principal curvatures `(min, max)` of the boundary at `p` (inward normal).
    pub fn principal_curvatures(&self, p: &Vec3) -> (f64, f64) {
        match &self.domain {
            Domain::Ball { radius } => (1.0 / radius, 1.0 / radius),
            Domain::Ellipsoid { .. } => {
                let g = self.grad_phi(p);
                let n = g.normalize();
                let (e1, e2) = tangent_frame(&n);
                let h = self.hess_phi();
                let gn = g.norm();
                let w = Matrix2::new(
                    (e1.transpose() * h * e1)[0] / gn,
                    (e1.transpose() * h * e2)[0] / gn,
                    (e2.transpose() * h * e1)[0] / gn,
                    (e2.transpose() * h * e2)[0] / gn,
                );
                sym2_eigenvalues(&w)
            }
        }
    }

    /// Boundary point in the direction of `dir` from the origin.
    fn radial_boundary_point(&self, dir: &Vec3) -> Vec3 {
        match &self.domain {
            Domain::Ball { radius } => dir.normalize() * *radius,
            Domain::Ellipsoid { semiaxes } => {
                let s: f64 = (0..3).map(|i| (dir[i] / semiaxes[i]).powi(2)).sum();
                dir / s.sqrt()
            }
        }
    }

    fn min_curvature_at(&self, z: f64, lon: f64) -> f64 {
        let z = z.clamp(-1.0, 1.0);
        let r = (1.0 - z * z).max(0.0).sqrt();
        let dir = Vec3::new(r * lon.cos(), r * lon.sin(), z);
        self.principal_curvatures(&self.radial_boundary_point(&dir)).0
    }

    /// Minimum principal curvature over a Halton sample of boundary points,
    /// polished by a local pattern search around the best samples.
    fn sampled_min_curvature(&self, samples: usize) -> f64 {
        let mut scored: Vec<(f64, f64, f64)> = (0..samples)
            .map(|i| {
                let z = 1.0 - 2.0 * radical_inverse(i as u64 + 1, 2);
                let lon = std::f64::consts::TAU * radical_inverse(i as u64 + 1, 3);
                (self.min_curvature_at(z, lon), z, lon)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = scored[0].0;
        for &(k0, z0, l0) in scored.iter().take(8) {
            let (mut z, mut lon, mut k) = (z0, l0, k0);
            let mut step = 0.05;
            while step > 1e-12 {
                let mut improved = false;
                for (dz, dl) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let cz = (z + dz).clamp(-1.0, 1.0);
                    let kc = self.min_curvature_at(cz, lon + dl);
                    if kc < k {
                        k = kc;
                        z = cz;
                        lon += dl;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.min(k);
        }
        best
    }

    /// Largest principal curvature of the boundary over the given boundary
    /// points.
    pub fn max_curvature_over(&self, points: &[Vec3]) -> f64 {
        points
            .iter()
            .map(|p| self.principal_curvatures(p).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Van der Corput radical inverse of `i` in `base`.
pub(crate) fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Eigenvalues `(min, max)` of a symmetric 2x2 matrix.
pub(crate) fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - rad, mean + rad)
}
