//! Discrete area minimization with free boundary on a convex container.
//!
//! Interior vertices move freely; boundary vertices move in the tangent plane
//! of the container boundary and are projected back. The descent direction is
//! the area gradient preconditioned by `K + eps M` (cotangent stiffness plus a
//! small lumped mass), projected onto the kernel of the linearized boundary
//! flux `C(x) = sum_b l_b n(x_b)`. Every free-boundary minimal surface has zero
//! flux, and keeping it at zero removes the translational instability of the
//! disk. Step lengths come from Armijo backtracking, so the area history is
//! monotone.

use nalgebra::{Matrix3, SMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    angle, area_vector, barycentric_areas, corners, mixed_areas, tangent_frame, tangential,
    triangle_area, vertex_normals,
};
use crate::linalg::{csc_from_triplets, reverse_cuthill_mckee, EnvelopeCholesky};
use crate::steklov::stiffness_triplets;
use crate::{ConvexAmbient, Error, Result, TriMesh, Vec3};

/// Backtracking line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRule {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Sup-norm tolerance on interior scalar mean curvature.
    pub tol_h: f64,
    /// Tolerance on the orthogonality defect, in radians.
    pub tol_orth: f64,
    /// Tangential smoothing of interior vertices every `smoothing_interval`
    /// iterations; a pass is kept only if it does not increase area.
    pub smoothing: bool,
    pub smoothing_interval: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_rule: StepRule::default(),
            tol_h: 1e-3,
            tol_orth: 0.017,
            smoothing: true,
            smoothing_interval: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.step_rule;
        let ok = self.tol_h > 0.0
            && self.tol_orth > 0.0
            && s.initial_step > 0.0
            && s.shrink > 0.0
            && s.shrink < 1.0
            && s.sufficient_decrease > 0.0
            && s.sufficient_decrease < 1.0
            && (!self.smoothing || self.smoothing_interval > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver configuration: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_h_sup: f64,
    pub final_orth_defect: f64,
    /// Area after feasibility restoration and after every accepted step.
    pub area_history: Vec<f64>,
    /// Norm of the boundary flux at exit.
    pub final_flux: f64,
    pub smoothing_passes_accepted: usize,
}

/// Exact gradient of total area with respect to every vertex position.
pub fn area_gradient(mesh: &TriMesh) -> Result<Vec<Vec3>> {
    area_gradient_of(mesh.vertices(), mesh.faces())
}

fn area_gradient_of(x: &[Vec3], faces: &[[usize; 3]]) -> Result<Vec<Vec3>> {
    let mut grad = vec![Vec3::zeros(); x.len()];
    for (fi, f) in faces.iter().enumerate() {
        let [a, b, c] = corners(x, f);
        let av = area_vector(&a, &b, &c);
        let len = av.norm();
        if !(len > 0.0) {
            return Err(Error::DegenerateFace { face: fi, area: 0.5 * len });
        }
        let n = av / len;
        grad[f[0]] += 0.5 * n.cross(&(c - b));
        grad[f[1]] += 0.5 * n.cross(&(a - c));
        grad[f[2]] += 0.5 * n.cross(&(b - a));
    }
    Ok(grad)
}

fn total_area(x: &[Vec3], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = corners(x, f);
            triangle_area(&a, &b, &c)
        })
        .sum()
}

/// Discrete mean curvature: gradient over mixed vertex area, and its component
/// along the vertex normal. Boundary entries are set to zero and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurvature {
    pub vector: Vec<Vec3>,
    pub scalar: Vec<f64>,
    pub interior: Vec<bool>,
}

impl MeanCurvature {
    /// Largest `|H|` over interior vertices.
    pub fn sup_interior(&self) -> f64 {
        self.scalar
            .iter()
            .zip(&self.interior)
            .filter(|(_, &i)| i)
            .map(|(h, _)| h.abs())
            .fold(0.0, f64::max)
    }
}

pub fn discrete_mean_curvature(mesh: &TriMesh) -> Result<MeanCurvature> {
    let x = mesh.vertices();
    let grad = area_gradient(mesh)?;
    let areas = mixed_areas(x, mesh.faces());
    let normals = vertex_normals(x, mesh.faces());
    let mut vector = vec![Vec3::zeros(); x.len()];
    let mut scalar = vec![0.0; x.len()];
    let mut interior = vec![false; x.len()];
    for v in 0..x.len() {
        if mesh.is_boundary_vertex(v) {
            continue;
        }
        if !(areas[v] > 0.0) {
            return Err(Error::ZeroVertexArea(v));
        }
        vector[v] = grad[v] / areas[v];
        scalar[v] = vector[v].dot(&normals[v]);
        interior[v] = true;
    }
    Ok(MeanCurvature {
        vector,
        scalar,
        interior,
    })
}

/// Outward conormal at each boundary vertex, in loop order: the normalized
/// sum of the in-face outward perpendiculars of its two boundary edges.
pub fn boundary_conormals(mesh: &TriMesh) -> Vec<(usize, Vec3)> {
    let x = mesh.vertices();
    // Face containing each directed boundary edge.
    let mut edge_face = std::collections::HashMap::new();
    for f in mesh.faces() {
        for i in 0..3 {
            edge_face.insert((f[i], f[(i + 1) % 3]), *f);
        }
    }
    let edge_conormal = |a: usize, b: usize| -> Vec3 {
        let f = edge_face[&(a, b)];
        let [p, q, r] = corners(x, &f);
        let n = area_vector(&p, &q, &r).normalize();
        let t = x[b] - x[a];
        // Faces run counterclockwise about n, so t x n points away from the face.
        t.cross(&n).normalize() * t.norm()
    };
    let mut out = Vec::new();
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for i in 0..n {
            let prev = lp[(i + n - 1) % n];
            let here = lp[i];
            let next = lp[(i + 1) % n];
            let nu = edge_conormal(prev, here) + edge_conormal(here, next);
            out.push((here, nu.normalize()));
        }
    }
    out
}

/// Largest angle between the discrete outward conormal and the outward
/// normal of the container over all boundary vertices.
pub fn orthogonality_defect(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<f64> {
    let x = mesh.vertices();
    let mut worst: f64 = 0.0;
    for (v, nu) in boundary_conormals(mesh) {
        if ambient.boundary_offset(&x[v]).abs() > 1e-6 {
            return Err(Error::NotOnBoundary(ambient.boundary_offset(&x[v])));
        }
        let n = ambient.normal_field(&x[v]);
        let ang = nu.cross(&n).norm().atan2(nu.dot(&n));
        worst = worst.max(ang);
    }
    Ok(worst)
}

/// Reduced coordinates: three per interior vertex, two per boundary vertex
/// (a frame of the container's tangent plane).
struct Layout {
    start: Vec<usize>,
    frames: Vec<Option<(Vec3, Vec3)>>,
    dim: usize,
}

impl Layout {
    fn new(mesh: &TriMesh, x: &[Vec3], ambient: &ConvexAmbient) -> Self {
        let mut start = Vec::with_capacity(x.len());
        let mut frames = Vec::with_capacity(x.len());
        let mut dim = 0;
        for (v, p) in x.iter().enumerate() {
            start.push(dim);
            if mesh.is_boundary_vertex(v) {
                frames.push(Some(tangent_frame(&ambient.normal_field(p))));
                dim += 2;
            } else {
                frames.push(None);
                dim += 3;
            }
        }
        Self { start, frames, dim }
    }

    /// Basis vectors of vertex `v`'s reduced coordinates.
    fn basis(&self, v: usize) -> Vec<Vec3> {
        match self.frames[v] {
            Some((e1, e2)) => vec![e1, e2],
            None => vec![Vec3::x(), Vec3::y(), Vec3::z()],
        }
    }

    fn restrict(&self, full: &[Vec3]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (v, g) in full.iter().enumerate() {
            for (k, e) in self.basis(v).iter().enumerate() {
                out[self.start[v] + k] = e.dot(g);
            }
        }
        out
    }

    fn extend(&self, reduced: &[f64]) -> Vec<Vec3> {
        (0..self.start.len())
            .map(|v| {
                self.basis(v)
                    .iter()
                    .enumerate()
                    .map(|(k, e)| e * reduced[self.start[v] + k])
                    .sum()
            })
            .collect()
    }
}

/// Boundary flux `sum_b l_b n(x_b)`, with `l_b` the lumped boundary length.
fn flux(mesh: &TriMesh, x: &[Vec3], ambient: &ConvexAmbient) -> Vec3 {
    let mut c = Vec3::zeros();
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for i in 0..n {
            let (prev, here, next) = (lp[(i + n - 1) % n], lp[i], lp[(i + 1) % n]);
            let l = 0.5 * ((x[here] - x[prev]).norm() + (x[next] - x[here]).norm());
            c += ambient.normal_field(&x[here]) * l;
        }
    }
    c
}

/// Exact Jacobian of [`flux`] in reduced coordinates, as 3 dense rows.
fn flux_jacobian(mesh: &TriMesh, x: &[Vec3], ambient: &ConvexAmbient, layout: &Layout) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; layout.dim]; 3];
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for i in 0..n {
            let (prev, here, next) = (lp[(i + n - 1) % n], lp[i], lp[(i + 1) % n]);
            let l = 0.5 * ((x[here] - x[prev]).norm() + (x[next] - x[here]).norm());
            let dn: Matrix3<f64> = ambient.shape_matrix(&x[here]);
            let nh = ambient.normal_field(&x[here]);
            let np = ambient.normal_field(&x[prev]);
            let nn = ambient.normal_field(&x[next]);
            let up = (x[here] - x[prev]).normalize();
            let un = (x[here] - x[next]).normalize();
            for (k, e) in layout.basis(here).iter().enumerate() {
                // Each incident edge carries half its length to both ends.
                let col = dn * e * l + (nh + np) * (0.5 * up.dot(e)) + (nh + nn) * (0.5 * un.dot(e));
                for r in 0..3 {
                    rows[r][layout.start[here] + k] = col[r];
                }
            }
        }
    }
    rows
}

/// Factor of the reduced preconditioner `R^T ((K + eps M) (x) I_3) R`.
fn preconditioner(mesh: &TriMesh, x: &[Vec3], layout: &Layout) -> Result<EnvelopeCholesky> {
    let probe = mesh.with_vertices(x.to_vec())?;
    let ktrip = stiffness_triplets(&probe)?;
    let mass = barycentric_areas(x, mesh.faces());
    let area: f64 = mass.iter().sum();
    let eps = 1.0 / area;
    let mut vtrip = ktrip;
    for (v, m) in mass.iter().enumerate() {
        vtrip.push((v, v, eps * m));
    }
    // Merge duplicates at vertex level first.
    let kv = csc_from_triplets(x.len(), &vtrip);
    let bases: Vec<Vec<Vec3>> = (0..x.len()).map(|v| layout.basis(v)).collect();
    let mut trip = Vec::new();
    for (j, lane) in kv.col_iter().enumerate() {
        for (&i, &w) in lane.row_indices().iter().zip(lane.values()) {
            for (a, ea) in bases[i].iter().enumerate() {
                for (b, eb) in bases[j].iter().enumerate() {
                    let val = w * ea.dot(eb);
                    if val != 0.0 {
                        trip.push((layout.start[i] + a, layout.start[j] + b, val));
                    }
                }
            }
        }
    }
    let p = csc_from_triplets(layout.dim, &trip);
    // Order vertices by RCM, then expand to their slots.
    let adjacency: Vec<Vec<usize>> = (0..x.len()).map(|v| mesh.neighbors(v).to_vec()).collect();
    let vorder = reverse_cuthill_mckee(&adjacency, &[]);
    let mut order = Vec::with_capacity(layout.dim);
    for v in vorder {
        for k in 0..bases[v].len() {
            order.push(layout.start[v] + k);
        }
    }
    EnvelopeCholesky::factor(&p, order)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection onto the kernel of the flux Jacobian `J` in the
/// preconditioner metric: `d = d0 - Y (J Y)^{-1} J d0` with `Y = P^{-1} J^T`.
struct FluxProjector {
    y: Vec<Vec<f64>>,
    jy_inv: Matrix3<f64>,
    j: Vec<Vec<f64>>,
}

impl FluxProjector {
    fn new(chol: &EnvelopeCholesky, j: Vec<Vec<f64>>) -> Result<Self> {
        let y: Vec<Vec<f64>> = j.iter().map(|row| chol.solve(row)).collect();
        let jy = Matrix3::from_fn(|r, c| dot(&j[r], &y[c]));
        let jy_inv = jy
            .try_inverse()
            .ok_or_else(|| Error::Precondition("boundary flux constraint is degenerate".into()))?;
        Ok(Self { y, jy_inv, j })
    }

    /// Correction `-Y (J Y)^{-1} r` for a residual `r` in flux space.
    fn correction(&self, r: &Vec3) -> Vec<f64> {
        let w = self.jy_inv * r;
        let mut out = vec![0.0; self.y[0].len()];
        for (k, yk) in self.y.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(yk) {
                *o -= w[k] * v;
            }
        }
        out
    }

    fn project(&self, d: &mut [f64]) {
        let jd = Vec3::new(dot(&self.j[0], d), dot(&self.j[1], d), dot(&self.j[2], d));
        let corr = self.correction(&jd);
        for (a, b) in d.iter_mut().zip(corr) {
            *a += b;
        }
    }
}

fn retract(mesh: &TriMesh, x: &[Vec3], layout: &Layout, step: &[f64], ambient: &ConvexAmbient) -> Result<Vec<Vec3>> {
    let delta = layout.extend(step);
    x.iter()
        .zip(&delta)
        .enumerate()
        .map(|(v, (p, d))| {
            let q = p + d;
            if mesh.is_boundary_vertex(v) {
                ambient.project_to_boundary(&q)
            } else {
                Ok(q)
            }
        })
        .collect()
}

/// Smallest accepted ratio of twice the face area to its squared longest edge.
const MIN_FACE_SHAPE: f64 = 1e-6;

/// True if no face flipped relative to the reference normals or became a
/// sliver.
fn faces_valid(faces: &[[usize; 3]], x: &[Vec3], reference: &[Vec3]) -> bool {
    faces.par_iter().zip(reference.par_iter()).all(|(f, r)| {
        let [a, b, c] = corners(x, f);
        let n = area_vector(&a, &b, &c);
        let longest = (b - a)
            .norm_squared()
            .max((c - b).norm_squared())
            .max((a - c).norm_squared());
        n.dot(r) > 0.0 && n.norm() > MIN_FACE_SHAPE * longest
    })
}

fn face_vectors(faces: &[[usize; 3]], x: &[Vec3]) -> Vec<Vec3> {
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = corners(x, f);
            area_vector(&a, &b, &c)
        })
        .collect()
}

/// Drive the flux back to zero by a few projected Newton corrections.
fn restore_flux(
    mesh: &TriMesh,
    mut x: Vec<Vec3>,
    ambient: &ConvexAmbient,
    layout: &Layout,
    projector: &FluxProjector,
    tol: f64,
) -> Result<Option<Vec<Vec3>>> {
    for _ in 0..20 {
        let c = flux(mesh, &x, ambient);
        if !(c.norm() > tol) {
            return Ok((c.norm() <= tol).then_some(x));
        }
        let corr = projector.correction(&c);
        x = retract(mesh, &x, layout, &corr, ambient)?;
    }
    Ok((flux(mesh, &x, ambient).norm() <= tol).then_some(x))
}

struct State {
    h_sup: f64,
    defect: f64,
}

fn measure(mesh: &TriMesh, x: &[Vec3], ambient: &ConvexAmbient) -> Result<(TriMesh, State)> {
    let m = mesh.with_vertices(x.to_vec())?;
    let h_sup = discrete_mean_curvature(&m)?.sup_interior();
    let defect = orthogonality_defect(&m, ambient)?;
    Ok((m, State { h_sup, defect }))
}

/// Tangential Laplacian smoothing of interior vertices.
fn smooth(mesh: &TriMesh, x: &[Vec3]) -> Vec<Vec3> {
    let normals = vertex_normals(x, mesh.faces());
    (0..x.len())
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                return x[v];
            }
            let nb = mesh.neighbors(v);
            let avg: Vec3 = nb.iter().map(|&w| x[w]).sum::<Vec3>() / nb.len() as f64;
            x[v] + 0.5 * tangential(&(avg - x[v]), &normals[v])
        })
        .collect()
}

/// Projected, preconditioned gradient descent to a discrete free-boundary
/// minimal surface. Non-convergence within `max_iters` is reported, not an
/// error.
pub fn minimize_area(
    mesh: &TriMesh,
    ambient: &ConvexAmbient,
    config: &SolverConfig,
) -> Result<(TriMesh, ConvergenceReport)> {
    config.validate()?;
    if mesh.boundary_loops().is_empty() {
        return Err(Error::ClosedSurface);
    }
    let faces = mesh.faces();
    let mut x: Vec<Vec3> = mesh.vertices().to_vec();
    for &b in &mesh.boundary_vertices() {
        let off = ambient.boundary_offset(&x[b]);
        if off.abs() > 1e-6 {
            return Err(Error::NotOnBoundary(off));
        }
        x[b] = ambient.project_to_boundary(&x[b])?;
    }
    let length = mesh.boundary_length()?;
    let flux_tol = 1e-12 * length.max(1.0);

    let (mut current, mut state) = measure(mesh, &x, ambient)?;
    let done = |s: &State| s.h_sup <= config.tol_h && s.defect <= config.tol_orth;
    let mut area_history = Vec::new();
    let mut iterations = 0;
    let mut smoothing_passes = 0;
    let mut converged = done(&state);

    if !converged && flux(mesh, &x, ambient).norm() > flux_tol {
        let layout = Layout::new(mesh, &x, ambient);
        let chol = preconditioner(mesh, &x, &layout)?;
        let projector =
            FluxProjector::new(&chol, flux_jacobian(mesh, &x, ambient, &layout))?;
        x = restore_flux(mesh, x, ambient, &layout, &projector, flux_tol)?.ok_or_else(|| {
            Error::Precondition("could not restore zero boundary flux on the initial mesh".into())
        })?;
        let measured = measure(mesh, &x, ambient)?;
        current = measured.0;
        state = measured.1;
        converged = done(&state);
    }
    let mut area = total_area(&x, faces);
    area_history.push(area);
    let mut tau_prev = config.step_rule.initial_step;

    while !converged && iterations < config.max_iters {
        iterations += 1;
        let layout = Layout::new(mesh, &x, ambient);
        let chol = preconditioner(mesh, &x, &layout)?;
        let grad = area_gradient_of(&x, faces)?;
        let g = layout.restrict(&grad);
        let mut d: Vec<f64> = chol.solve(&g).into_iter().map(|v| -v).collect();
        let projector =
            FluxProjector::new(&chol, flux_jacobian(mesh, &x, ambient, &layout))?;
        projector.project(&mut d);
        let slope = dot(&g, &d);
        if !(slope < 0.0) || -slope <= 1e-15 * area {
            break;
        }
        let reference = face_vectors(faces, &x);
        let rule = &config.step_rule;
        let mut tau = (2.0 * tau_prev).min(rule.initial_step);
        let accepted = loop {
            if tau < 1e-14 {
                break None;
            }
            let step: Vec<f64> = d.iter().map(|v| v * tau).collect();
            let trial = retract(mesh, &x, &layout, &step, ambient)?;
            if faces_valid(faces, &trial, &reference) {
                if let Some(trial) = restore_flux(mesh, trial, ambient, &layout, &projector, flux_tol)? {
                    if faces_valid(faces, &trial, &reference) {
                        let a = total_area(&trial, faces);
                        if a <= area + rule.sufficient_decrease * tau * slope {
                            break Some((trial, a));
                        }
                    }
                }
            }
            tau *= rule.shrink;
        };
        let Some((next, next_area)) = accepted else {
            // A vanishing step is only acceptable at a numerically stationary point.
            if -slope <= 1e-12 * area {
                break;
            }
            return Err(Error::StepUnderflow(iterations));
        };
        tau_prev = tau;
        x = next;
        area = next_area;
        area_history.push(area);

        if config.smoothing && iterations % config.smoothing_interval == 0 {
            let candidate = smooth(mesh, &x);
            if faces_valid(faces, &candidate, &face_vectors(faces, &x)) {
                let a = total_area(&candidate, faces);
                if a <= area {
                    x = candidate;
                    area = a;
                    area_history.push(area);
                    smoothing_passes += 1;
                }
            }
        }
        let measured = measure(mesh, &x, ambient)?;
        current = measured.0;
        state = measured.1;
        converged = done(&state);
    }

    let report = ConvergenceReport {
        converged,
        iterations,
        final_h_sup: state.h_sup,
        final_orth_defect: state.defect,
        area_history,
        final_flux: flux(mesh, current.vertices(), ambient).norm(),
        smoothing_passes_accepted: smoothing_passes,
    };
    Ok((current, report))
}

/// Best-fit plane through the origin for a point cloud: returns the unit
/// normal and the largest distance of a point from the plane.
pub fn plane_fit(points: &[Vec3]) -> (Vec3, f64) {
    let mut cov = SMatrix::<f64, 3, 3>::zeros();
    for p in points {
        cov += p * p.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let n: Vec3 = eig.eigenvectors.column(imin).into_owned();
    let dist = points.iter().map(|p| p.dot(&n).abs()).fold(0.0, f64::max);
    (n, dist)
}

/// Sum of interior angles at each vertex (used for discrete geodesic
/// curvature).
pub(crate) fn angle_sums(x: &[Vec3], faces: &[[usize; 3]]) -> Vec<f64> {
    let mut sums = vec![0.0; x.len()];
    for f in faces {
        let p = corners(x, f);
        for i in 0..3 {
            sums[f[i]] += angle(&p[i], &p[(i + 1) % 3], &p[(i + 2) % 3]);
        }
    }
    sums
}
