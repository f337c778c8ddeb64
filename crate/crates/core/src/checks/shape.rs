//! Per-vertex second fundamental form from quadric fits over the 2-ring.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::geometry::{barycentric_areas, tangent_frame, vertex_normals};
use crate::{Result, TriMesh, Vec3};

/// Minimum ratio of smallest to largest singular value of the scaled design
/// matrix before a fit is flagged.
const FIT_CONDITION: f64 = 1e-6;

/// Neighbourhood size from which cubic terms are added to the fit; they keep
/// the curvature error second order on one-sided stencils.
const CUBIC_MIN_POINTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeField {
    /// Unit normal of the fitted quadric at each vertex.
    pub normals: Vec<Vec3>,
    /// Symmetric shape operator in the orthonormal frame `frames[v]`.
    pub shape: Vec<Matrix2<f64>>,
    pub frames: Vec<(Vec3, Vec3)>,
    /// Sum of squared principal curvatures.
    pub norm_sq: Vec<f64>,
    /// Product of principal curvatures.
    pub gauss: Vec<f64>,
    /// Sum of principal curvatures, with respect to `normals`.
    pub mean: Vec<f64>,
    /// Vertices whose fit was rank deficient; their curvature is zeroed.
    pub flagged: Vec<bool>,
    pub boundary: Vec<bool>,
    /// Barycentric vertex areas used for quadrature.
    pub areas: Vec<f64>,
}

impl ShapeField {
    fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area fraction of flagged vertices.
    pub fn excluded_area_fraction(&self) -> f64 {
        let ex: f64 = self
            .areas
            .iter()
            .zip(&self.flagged)
            .filter(|(_, &f)| f)
            .map(|(a, _)| a)
            .sum();
        ex / self.total_area()
    }

    /// Area fraction of boundary vertices (excluded from sup-norms).
    pub fn boundary_area_fraction(&self) -> f64 {
        let b: f64 = self
            .areas
            .iter()
            .zip(&self.boundary)
            .filter(|(_, &f)| f)
            .map(|(a, _)| a)
            .sum();
        b / self.total_area()
    }

    /// Vertices admitted to sup-norm quantities.
    pub fn is_reliable_interior(&self, v: usize) -> bool {
        !self.flagged[v] && !self.boundary[v]
    }

    /// `sum_v A_v |h|^2_v` over unflagged vertices.
    pub fn integrate_norm_sq(&self) -> f64 {
        (0..self.areas.len())
            .filter(|&v| !self.flagged[v])
            .map(|v| self.areas[v] * self.norm_sq[v])
            .sum()
    }

    /// Principal curvatures at `v`, ascending.
    pub fn principal_curvatures(&self, v: usize) -> (f64, f64) {
        crate::ambient::sym2_eigenvalues(&self.shape[v])
    }
}

fn two_ring(mesh: &TriMesh, v: usize) -> Vec<usize> {
    let mut ring: Vec<usize> = mesh.neighbors(v).to_vec();
    for &w in mesh.neighbors(v) {
        ring.extend_from_slice(mesh.neighbors(w));
    }
    ring.sort_unstable();
    ring.dedup();
    ring.retain(|&w| w != v);
    ring
}

/// Least-squares fit of `h = a u^2 + b u w + c w^2 + d u + e w` (plus cubic
/// terms on large neighbourhoods) in the vertex tangent frame.
pub fn second_fundamental_form(mesh: &TriMesh) -> Result<ShapeField> {
    let x = mesh.vertices();
    let n = x.len();
    let vn = vertex_normals(x, mesh.faces());
    let mut field = ShapeField {
        normals: vn.clone(),
        shape: vec![Matrix2::zeros(); n],
        frames: Vec::with_capacity(n),
        norm_sq: vec![0.0; n],
        gauss: vec![0.0; n],
        mean: vec![0.0; n],
        flagged: vec![false; n],
        boundary: mesh.boundary_mask().to_vec(),
        areas: barycentric_areas(x, mesh.faces()),
    };
    for v in 0..n {
        let (e1, e2) = tangent_frame(&vn[v]);
        field.frames.push((e1, e2));
        let ring = two_ring(mesh, v);
        if ring.len() < 5 {
            field.flagged[v] = true;
            continue;
        }
        let rho = ring.iter().map(|&w| (x[w] - x[v]).norm()).sum::<f64>() / ring.len() as f64;
        let cols = if ring.len() >= CUBIC_MIN_POINTS { 9 } else { 5 };
        let mut a = DMatrix::<f64>::zeros(ring.len(), cols);
        let mut rhs = DVector::<f64>::zeros(ring.len());
        for (r, &w) in ring.iter().enumerate() {
            let d = (x[w] - x[v]) / rho;
            let (u, s, h) = (d.dot(&e1), d.dot(&e2), d.dot(&vn[v]));
            a[(r, 0)] = u * u;
            a[(r, 1)] = u * s;
            a[(r, 2)] = s * s;
            a[(r, 3)] = u;
            a[(r, 4)] = s;
            if cols == 9 {
                a[(r, 5)] = u * u * u;
                a[(r, 6)] = u * u * s;
                a[(r, 7)] = u * s * s;
                a[(r, 8)] = s * s * s;
            }
            rhs[r] = h;
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > FIT_CONDITION * smax) {
            field.flagged[v] = true;
            continue;
        }
        let Ok(coef) = svd.solve(&rhs, 0.0) else {
            field.flagged[v] = true;
            continue;
        };
        // Undo the length scaling: second-order terms pick up 1/rho.
        let (ca, cb, cc) = (coef[0] / rho, coef[1] / rho, coef[2] / rho);
        let (cd, ce) = (coef[3], coef[4]);
        let first = Matrix2::new(1.0 + cd * cd, cd * ce, cd * ce, 1.0 + ce * ce);
        let w = (1.0 + cd * cd + ce * ce).sqrt();
        let second = Matrix2::new(2.0 * ca, cb, cb, 2.0 * cc) / w;
        // Symmetric form I^{-1/2} II I^{-1/2} of the Weingarten map.
        let eig = first.symmetric_eigen();
        let inv_sqrt = eig.eigenvectors
            * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
            * eig.eigenvectors.transpose();
        let s = inv_sqrt * second * inv_sqrt;
        let s = (s + s.transpose()) * 0.5;
        field.normals[v] = (vn[v] - e1 * cd - e2 * ce).normalize();
        field.norm_sq[v] = s.norm_squared();
        field.gauss[v] = s.determinant();
        field.mean[v] = s.trace();
        field.shape[v] = s;
    }
    Ok(field)
}
