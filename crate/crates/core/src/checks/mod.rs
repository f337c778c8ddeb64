//! Curvature quantities of a discrete surface and the eigenvalue, length,
//! curvature and instability bounds for free-boundary minimal surfaces,
//! evaluated with signed margins.
//!
//! Each bound check produces a [`CheckEntry`]. A check passes when its margin
//! is at least `-tolerance * scale`; checks that only make sense for
//! free-boundary minimal surfaces are skipped, with a reason, when the mesh
//! fails the minimality gate.

mod intersection;
mod shape;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ambient::Convexity;
use crate::geometry::tangential;
use crate::solver::{angle_sums, discrete_mean_curvature, orthogonality_defect, ConvergenceReport};
use crate::steklov::{dirichlet_energy, stiffness_matrix, DtnOperator, MULTIPLICITY_GAP};
use crate::{ConvexAmbient, Error, Result, Topology, TriMesh, Vec3};

pub use intersection::{triangle_intersection, verify_intersection, Intersection};
pub use shape::{second_fundamental_form, ShapeField};

/// Interior mean-curvature threshold of the minimality gate.
pub const GATE_H: f64 = 1e-3;
/// Orthogonality-defect threshold of the minimality gate, in radians.
pub const GATE_ORTH: f64 = 0.017;
/// Relative slack allowed on inequality margins.
pub const BOUND_TOLERANCE: f64 = 0.02;
/// Excluded-area fraction above which curvature integrals are unreliable.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;
/// Precondition on the orthogonality defect for the Gauss-Bonnet chain.
pub const GAUSS_BONNET_MAX_DEFECT: f64 = 0.05;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimality {
    pub h_sup: f64,
    pub orth_defect: f64,
    pub minimal: bool,
}

pub fn minimality(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<Minimality> {
    let h_sup = discrete_mean_curvature(mesh)?.sup_interior();
    let orth_defect = orthogonality_defect(mesh, ambient)?;
    Ok(Minimality {
        h_sup,
        orth_defect,
        minimal: h_sup <= GATE_H && orth_defect <= GATE_ORTH,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub value: Option<f64>,
    pub margin: Option<f64>,
    pub scale: Option<f64>,
    /// Pass iff `margin >= -tolerance * scale`.
    pub tolerance: f64,
    pub status: Status,
    pub reason: Option<String>,
}

impl CheckEntry {
    fn evaluate(name: &str, value: f64, margin: f64, scale: f64, tolerance: f64) -> Self {
        let pass = margin >= -tolerance * scale.abs();
        Self {
            name: name.into(),
            value: Some(value),
            margin: Some(margin),
            scale: Some(scale),
            tolerance,
            status: if pass { Status::Pass } else { Status::Fail },
            reason: None,
        }
    }

    fn skipped(name: &str, tolerance: f64, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: None,
            margin: None,
            scale: None,
            tolerance,
            status: Status::Skipped,
            reason: Some(reason.into()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

fn gate_reason(m: &Minimality) -> String {
    format!(
        "minimality gate not met: sup|H| = {:.3e} (limit {GATE_H:e}), orthogonality defect = {:.3e} rad (limit {GATE_ORTH})",
        m.h_sup, m.orth_defect
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalCurvature {
    pub value: f64,
    pub excluded_area_fraction: f64,
    pub reliable: bool,
}

fn total_curvature_from(field: &ShapeField) -> TotalCurvature {
    let excluded = field.excluded_area_fraction();
    TotalCurvature {
        value: field.integrate_norm_sq(),
        excluded_area_fraction: excluded,
        reliable: excluded <= MAX_EXCLUDED_FRACTION,
    }
}

/// `int |h|^2 da` by vertex-area quadrature.
pub fn total_curvature(mesh: &TriMesh) -> Result<TotalCurvature> {
    Ok(total_curvature_from(&second_fundamental_form(mesh)?))
}

/// Lumped length and unit tangent of the boundary curve at each boundary
/// vertex, in loop order.
fn boundary_tangents(mesh: &TriMesh) -> Vec<(usize, f64, Vec3)> {
    let x = mesh.vertices();
    let mut out = Vec::new();
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for i in 0..n {
            let (prev, here, next) = (lp[(i + n - 1) % n], lp[i], lp[(i + 1) % n]);
            let l = 0.5 * ((x[here] - x[prev]).norm() + (x[next] - x[here]).norm());
            out.push((here, l, x[next] - x[prev]));
        }
    }
    out
}

/// Unit projection of `u` into the tangent plane of the container at `p`.
fn boundary_tangent(ambient: &ConvexAmbient, p: &Vec3, u: &Vec3) -> Vec3 {
    tangential(u, &ambient.normal_field(p)).normalize()
}

/// `sum_b l_b h(u_b, u_b)` for the boundary tangent `u_b`, and the largest
/// sampled value of `h(u_b, u_b)`.
fn extrinsic_geodesic_curvature(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<(f64, f64)> {
    let x = mesh.vertices();
    let mut integral = 0.0;
    let mut max: f64 = 0.0;
    for (v, l, t) in boundary_tangents(mesh) {
        let p = ambient.project_to_boundary(&x[v])?;
        let u = boundary_tangent(ambient, &p, &t);
        let h = ambient.boundary_shape_operator(&p, &u)?;
        integral += l * h;
        max = max.max(h);
    }
    Ok((integral, max))
}

/// `sum_b (pi - angle sum at b)`.
fn intrinsic_geodesic_curvature(mesh: &TriMesh) -> f64 {
    let sums = angle_sums(mesh.vertices(), mesh.faces());
    mesh.boundary_vertices().iter().map(|&b| PI - sums[b]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussBonnet {
    pub half_total_curvature: f64,
    pub geodesic_curvature_intrinsic: f64,
    pub geodesic_curvature_extrinsic: f64,
    pub euler_characteristic: i64,
    /// `|1/2 int |h|^2 - (int k_g - 2 pi chi)|` with the intrinsic `k_g`.
    pub residual: f64,
    /// Same with the extrinsic `k_g`.
    pub extrinsic_residual: f64,
}

fn gauss_bonnet_from(mesh: &TriMesh, ambient: &ConvexAmbient, field: &ShapeField, chi: i64) -> Result<GaussBonnet> {
    let half = 0.5 * field.integrate_norm_sq();
    let kg_int = intrinsic_geodesic_curvature(mesh);
    let (kg_ext, _) = extrinsic_geodesic_curvature(mesh, ambient)?;
    let two_pi_chi = 2.0 * PI * chi as f64;
    Ok(GaussBonnet {
        half_total_curvature: half,
        geodesic_curvature_intrinsic: kg_int,
        geodesic_curvature_extrinsic: kg_ext,
        euler_characteristic: chi,
        residual: (half - (kg_int - two_pi_chi)).abs(),
        extrinsic_residual: (half - (kg_ext - two_pi_chi)).abs(),
    })
}

/// Gauss-Bonnet chain for a free-boundary minimal surface in flat space.
pub fn gauss_bonnet_residual(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<GaussBonnet> {
    let defect = orthogonality_defect(mesh, ambient)?;
    if defect > GAUSS_BONNET_MAX_DEFECT {
        return Err(Error::Precondition(format!(
            "orthogonality defect {defect:.3e} rad exceeds {GAUSS_BONNET_MAX_DEFECT} rad"
        )));
    }
    let field = second_fundamental_form(mesh)?;
    gauss_bonnet_from(mesh, ambient, &field, mesh.topology()?.euler_characteristic)
}

fn stability_from(
    mesh: &TriMesh,
    ambient: &ConvexAmbient,
    field: &ShapeField,
    f: &[f64],
) -> Result<f64> {
    let k = stiffness_matrix(mesh)?;
    let mut q = dirichlet_energy(&k, f);
    for v in 0..f.len() {
        if !field.flagged[v] {
            q -= field.areas[v] * field.norm_sq[v] * f[v] * f[v];
        }
    }
    let x = mesh.vertices();
    for (v, l, _) in boundary_tangents(mesh) {
        let p = ambient.project_to_boundary(&x[v])?;
        let n = boundary_tangent(ambient, &p, &field.normals[v]);
        q -= l * ambient.boundary_shape_operator(&p, &n)? * f[v] * f[v];
    }
    Ok(q)
}

/// Second variation of area for the normal variation `f N` in flat space:
/// `int |grad f|^2 - |h|^2 f^2 - int_boundary h(N, N) f^2`.
pub fn stability_form(mesh: &TriMesh, ambient: &ConvexAmbient, f: &[f64]) -> Result<f64> {
    if f.len() != mesh.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "expected {} values, got {}",
            mesh.num_vertices(),
            f.len()
        )));
    }
    stability_from(mesh, ambient, &second_fundamental_form(mesh)?, f)
}

fn instability_entry(q1: f64, k: f64, length: f64) -> CheckEntry {
    CheckEntry::evaluate("instability", q1, -k * length - q1, k * length, BOUND_TOLERANCE)
}

/// `delta^2(1) <= -k L`.
pub fn verify_instability(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<CheckEntry> {
    let gate = minimality(mesh, ambient)?;
    if !gate.minimal {
        return Ok(CheckEntry::skipped("instability", BOUND_TOLERANCE, gate_reason(&gate)));
    }
    let q1 = stability_form(mesh, ambient, &vec![1.0; mesh.num_vertices()])?;
    Ok(instability_entry(q1, ambient.convexity_constant(), mesh.boundary_length()?))
}

fn sigma1_entry(sigma1: f64, k: f64) -> CheckEntry {
    CheckEntry::evaluate("sigma1_lower_bound", sigma1, sigma1 - 0.5 * k, k, BOUND_TOLERANCE)
}

/// `sigma_1 >= k / 2`.
pub fn verify_sigma1_bound(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<CheckEntry> {
    let gate = minimality(mesh, ambient)?;
    if !gate.minimal {
        return Ok(CheckEntry::skipped("sigma1_lower_bound", BOUND_TOLERANCE, gate_reason(&gate)));
    }
    Ok(sigma1_entry(crate::steklov::sigma1(mesh)?, ambient.convexity_constant()))
}

fn length_entry(length: f64, k: f64, topo: &Topology) -> CheckEntry {
    let bound = 4.0 * PI * (topo.genus + topo.boundary_components) as f64 / k;
    CheckEntry::evaluate("length_upper_bound", length, bound - length, bound, BOUND_TOLERANCE)
}

/// `L <= 4 pi (g + gamma) / k`.
pub fn verify_length_bound(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<CheckEntry> {
    let gate = minimality(mesh, ambient)?;
    if !gate.minimal {
        return Ok(CheckEntry::skipped("length_upper_bound", BOUND_TOLERANCE, gate_reason(&gate)));
    }
    Ok(length_entry(mesh.boundary_length()?, ambient.convexity_constant(), &mesh.topology()?))
}

fn fs_entry(sigma1: f64, length: f64, topo: &Topology) -> CheckEntry {
    let bound = 2.0 * PI * (topo.genus + topo.boundary_components) as f64;
    let value = sigma1 * length;
    CheckEntry::evaluate("sigma1_length_upper_bound", value, bound - value, bound, BOUND_TOLERANCE)
}

/// `sigma_1 L <= 2 pi (g + gamma)`; holds for every metric, so it is not gated.
pub fn verify_fs_upper(mesh: &TriMesh) -> Result<CheckEntry> {
    Ok(fs_entry(crate::steklov::sigma1(mesh)?, mesh.boundary_length()?, &mesh.topology()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isoperimetric {
    /// `A / L`.
    pub ratio: f64,
    /// `|L - 2A/R| / L` for minimal meshes in a ball of radius `R`.
    pub ball_identity_residual: Option<f64>,
}

fn isoperimetric_from(area: f64, length: f64, radius: Option<f64>, minimal: bool) -> Isoperimetric {
    Isoperimetric {
        ratio: area / length,
        ball_identity_residual: radius
            .filter(|_| minimal)
            .map(|r| (length - 2.0 * area / r).abs() / length),
    }
}

pub fn verify_isoperimetric(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<Isoperimetric> {
    let gate = minimality(mesh, ambient)?;
    Ok(isoperimetric_from(
        mesh.area(),
        mesh.boundary_length()?,
        ambient.ball_radius(),
        gate.minimal,
    ))
}

fn total_curvature_bound_entry(half: f64, c_boundary: f64, length: f64, chi: i64) -> CheckEntry {
    let bound = c_boundary * length - 2.0 * PI * chi as f64;
    CheckEntry::evaluate("total_curvature_bound", half, bound - half, c_boundary * length, BOUND_TOLERANCE)
}

/// `1/2 int |h|^2 <= C L - 2 pi chi` with `C` the largest sampled boundary
/// curvature along the boundary curve.
pub fn total_curvature_bound(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<CheckEntry> {
    let gate = minimality(mesh, ambient)?;
    if !gate.minimal {
        return Ok(CheckEntry::skipped("total_curvature_bound", BOUND_TOLERANCE, gate_reason(&gate)));
    }
    let field = second_fundamental_form(mesh)?;
    let (_, c_boundary) = extrinsic_geodesic_curvature(mesh, ambient)?;
    Ok(total_curvature_bound_entry(
        0.5 * field.integrate_norm_sq(),
        c_boundary,
        mesh.boundary_length()?,
        mesh.topology()?.euler_characteristic,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    /// `int |h|^2` over vertices in the ball `B_r(Q)`.
    pub local_total_curvature: f64,
    /// `max_sigma sigma^2 sup_{B_{r - sigma}(Q)} |h|^2` over a 64-point grid.
    pub concentration: f64,
    pub empty: bool,
}

pub const CONCENTRATION_GRID: usize = 64;

fn concentration_from(mesh: &TriMesh, field: &ShapeField, q: &Vec3, r: f64) -> Concentration {
    let x = mesh.vertices();
    let dist: Vec<f64> = x.iter().map(|p| (p - q).norm()).collect();
    let inside: Vec<usize> = (0..x.len()).filter(|&v| dist[v] < r).collect();
    if inside.is_empty() {
        return Concentration {
            local_total_curvature: 0.0,
            concentration: 0.0,
            empty: true,
        };
    }
    let local = inside
        .iter()
        .filter(|&&v| !field.flagged[v])
        .map(|&v| field.areas[v] * field.norm_sq[v])
        .sum();
    let mut best: f64 = 0.0;
    for i in 0..CONCENTRATION_GRID {
        let sigma = r * i as f64 / (CONCENTRATION_GRID - 1) as f64;
        let sup = inside
            .iter()
            .filter(|&&v| dist[v] < r - sigma && field.is_reliable_interior(v))
            .map(|&v| field.norm_sq[v])
            .fold(0.0, f64::max);
        best = best.max(sigma * sigma * sup);
    }
    Concentration {
        local_total_curvature: local,
        concentration: best,
        empty: false,
    }
}

pub fn curvature_concentration(mesh: &TriMesh, q: &Vec3, r: f64) -> Result<Concentration> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    Ok(concentration_from(mesh, &second_fundamental_form(mesh)?, q, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub schema: u32,
    pub area: f64,
    pub length: f64,
    pub topology: Topology,
    pub convexity: Convexity,
    pub minimality: Minimality,
    pub sigma1: f64,
    pub sigma1_times_length: f64,
    pub multiplicity_gap: f64,
    pub total_curvature: TotalCurvature,
    pub boundary_area_fraction: f64,
    pub gauss_bonnet: Option<GaussBonnet>,
    pub stability_of_constant: f64,
    pub isoperimetric: Isoperimetric,
    pub checks: Vec<CheckEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
}

impl GeometryReport {
    /// True iff no evaluated check failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

/// Every check on one mesh, in a fixed order.
pub fn full_report(mesh: &TriMesh, ambient: &ConvexAmbient) -> Result<GeometryReport> {
    let topology = mesh.topology()?;
    let length = mesh.boundary_length()?;
    let area = mesh.area();
    let gate = minimality(mesh, ambient)?;
    let field = second_fundamental_form(mesh)?;
    let tc = total_curvature_from(&field);
    let k = ambient.convexity_constant();
    let sigma1 = DtnOperator::new(mesh)?.spectrum(2)?.eigenvalues[1];
    let q1 = stability_from(mesh, ambient, &field, &vec![1.0; mesh.num_vertices()])?;
    let gb = if gate.orth_defect <= GAUSS_BONNET_MAX_DEFECT {
        Some(gauss_bonnet_from(mesh, ambient, &field, topology.euler_characteristic)?)
    } else {
        None
    };
    let (_, c_boundary) = extrinsic_geodesic_curvature(mesh, ambient)?;
    let iso = isoperimetric_from(area, length, ambient.ball_radius(), gate.minimal);

    let reason = gate_reason(&gate);
    let gated = |entry: CheckEntry| -> CheckEntry {
        if gate.minimal {
            entry
        } else {
            CheckEntry::skipped(&entry.name, entry.tolerance, reason.clone())
        }
    };
    let mut checks = vec![
        gated(instability_entry(q1, k, length)),
        gated(sigma1_entry(sigma1, k)),
        gated(length_entry(length, k, &topology)),
        fs_entry(sigma1, length, &topology),
    ];
    checks.push(match (iso.ball_identity_residual, ambient.ball_radius()) {
        (Some(res), Some(_)) => CheckEntry::evaluate("ball_identity", res, -res, 1.0, 0.01),
        (_, None) => CheckEntry::skipped("ball_identity", 0.01, "container is not a round ball"),
        (None, Some(_)) => CheckEntry::skipped("ball_identity", 0.01, reason.clone()),
    });
    match &gb {
        Some(g) => {
            checks.push(gated(CheckEntry::evaluate(
                "gauss_bonnet_chain",
                g.residual,
                -g.residual,
                length,
                0.05,
            )));
            let gap = (g.geodesic_curvature_intrinsic - g.geodesic_curvature_extrinsic).abs();
            checks.push(gated(CheckEntry::evaluate(
                "geodesic_curvature_agreement",
                gap,
                -gap,
                g.geodesic_curvature_extrinsic.abs(),
                BOUND_TOLERANCE,
            )));
        }
        None => {
            let why = format!(
                "orthogonality defect {:.3e} rad exceeds {GAUSS_BONNET_MAX_DEFECT} rad",
                gate.orth_defect
            );
            checks.push(CheckEntry::skipped("gauss_bonnet_chain", 0.05, why.clone()));
            checks.push(CheckEntry::skipped("geodesic_curvature_agreement", BOUND_TOLERANCE, why));
        }
    }
    checks.push(gated(total_curvature_bound_entry(
        0.5 * tc.value,
        c_boundary,
        length,
        topology.euler_characteristic,
    )));
    if !tc.reliable {
        for c in checks.iter_mut().filter(|c| c.status != Status::Skipped) {
            if matches!(c.name.as_str(), "gauss_bonnet_chain" | "total_curvature_bound" | "instability") {
                c.reason = Some(format!(
                    "curvature unreliable: {:.1}% of area excluded",
                    100.0 * tc.excluded_area_fraction
                ));
            }
        }
    }

    Ok(GeometryReport {
        schema: SCHEMA_VERSION,
        area,
        length,
        topology,
        convexity: ambient.convexity(),
        minimality: gate,
        sigma1,
        sigma1_times_length: sigma1 * length,
        multiplicity_gap: MULTIPLICITY_GAP,
        total_curvature: tc,
        boundary_area_fraction: field.boundary_area_fraction(),
        gauss_bonnet: gb,
        stability_of_constant: q1,
        isoperimetric: iso,
        checks,
        convergence: None,
    })
}
