use std::f64::consts::PI;

use freebound::checks::{
    curvature_concentration, full_report, gauss_bonnet_residual, second_fundamental_form, stability_form,
    total_curvature, total_curvature_bound, verify_fs_upper, verify_instability, verify_intersection,
    verify_isoperimetric, verify_length_bound, verify_sigma1_bound, GeometryReport, Status,
};
use freebound::exemplars::{conformal_catenoid_rings, critical_catenoid, critical_catenoid_parameters, equatorial_disk, perturb};
use freebound::{ConvexAmbient, TriMesh, Vec3};

fn catenoid(n_theta: usize) -> TriMesh {
    critical_catenoid(conformal_catenoid_rings(n_theta).unwrap(), n_theta).unwrap()
}

fn disk() -> TriMesh {
    equatorial_disk(10, 64).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn catenoid_curvature_chain() {
    let ball = ConvexAmbient::unit_ball();
    let m = catenoid(128);
    let l = m.boundary_length().unwrap();
    let tc = total_curvature(&m).unwrap();
    assert!(tc.reliable);
    assert!(rel(tc.value, 2.0 * l) <= 0.05, "{} vs {}", tc.value, 2.0 * l);
    let gb = gauss_bonnet_residual(&m, &ball).unwrap();
    assert_eq!(gb.euler_characteristic, 0);
    assert!(rel(gb.half_total_curvature, l) <= 0.05);
    assert!(rel(gb.geodesic_curvature_intrinsic, l) <= 0.05);
    assert!(rel(gb.geodesic_curvature_extrinsic, l) <= 0.05);
    assert!(rel(gb.geodesic_curvature_intrinsic, gb.geodesic_curvature_extrinsic) <= 0.02);
    let q = stability_form(&m, &ball, &vec![1.0; m.num_vertices()]).unwrap();
    assert!(rel(q, -3.0 * l) <= 0.07, "{q}");
}

#[test]
fn catenoid_refinement_sequences() {
    let ball = ConvexAmbient::unit_ball();
    let meshes: Vec<TriMesh> = [32, 64, 128].iter().map(|&n| catenoid(n)).collect();
    let tc: Vec<f64> = meshes.iter().map(|m| total_curvature(m).unwrap().value).collect();
    assert!((tc[2] - tc[1]).abs() < (tc[1] - tc[0]).abs(), "{tc:?}");
    let gb: Vec<f64> = meshes[1..]
        .iter()
        .map(|m| gauss_bonnet_residual(m, &ball).unwrap().residual)
        .collect();
    assert!(gb[1] < gb[0], "{gb:?}");
}

#[test]
fn gauss_bonnet_requires_orthogonality() {
    let ball = ConvexAmbient::unit_ball();
    let m = catenoid(16);
    assert!(gauss_bonnet_residual(&m, &ball).is_err());
}

#[test]
fn shape_field_inequalities() {
    let m = catenoid(96);
    let f = second_fundamental_form(&m).unwrap();
    for v in 0..m.num_vertices() {
        if f.flagged[v] {
            continue;
        }
        assert!(f.norm_sq[v] >= 2.0 * f.gauss[v].abs() - 1e-9);
        if !f.boundary[v] {
            // Minimal: |h|^2 = -2K up to discretization.
            assert!((f.norm_sq[v] + 2.0 * f.gauss[v]).abs() <= 0.02 * f.norm_sq[v]);
        }
    }
    assert_eq!(f.excluded_area_fraction(), 0.0);
    assert!(f.boundary_area_fraction() > 0.0 && f.boundary_area_fraction() < 0.1);
}

#[test]
fn disk_bounds() {
    let ball = ConvexAmbient::unit_ball();
    let m = disk();
    let l = m.boundary_length().unwrap();
    let ins = verify_instability(&m, &ball).unwrap();
    assert!(ins.passed() && ins.margin.unwrap().abs() <= 1e-9);
    assert!(rel(ins.value.unwrap(), -2.0 * PI) <= 0.02);
    let s = verify_sigma1_bound(&m, &ball).unwrap();
    assert!(s.passed() && (s.margin.unwrap() - 0.5).abs() <= 0.02);
    let len = verify_length_bound(&m, &ball).unwrap();
    assert!((len.margin.unwrap() - (4.0 * PI - l)).abs() <= 1e-12);
    let fs = verify_fs_upper(&m).unwrap();
    assert!(fs.passed() && fs.margin.unwrap().abs() <= 0.02 * 2.0 * PI);
    let iso = verify_isoperimetric(&m, &ball).unwrap();
    assert!((iso.ratio - 0.5).abs() <= 0.01);
    assert!(iso.ball_identity_residual.unwrap() <= 0.01);
}

#[test]
fn catenoid_bounds() {
    let ball = ConvexAmbient::unit_ball();
    let m = catenoid(128);
    let p = critical_catenoid_parameters().unwrap();
    let l = m.boundary_length().unwrap();
    assert!(rel(l, p.boundary_length) <= 0.01);
    let ins = verify_instability(&m, &ball).unwrap();
    assert!(ins.passed() && rel(ins.margin.unwrap(), 2.0 * l) <= 0.1);
    let s = verify_sigma1_bound(&m, &ball).unwrap();
    assert!(s.passed() && (s.margin.unwrap() - 0.5).abs() <= 0.05);
    let len = verify_length_bound(&m, &ball).unwrap();
    assert!(len.passed() && (len.margin.unwrap() - (8.0 * PI - l)).abs() <= 1e-12);
    let fs = verify_fs_upper(&m).unwrap();
    assert!(fs.passed() && fs.value.unwrap() < 4.0 * PI);
    let iso = verify_isoperimetric(&m, &ball).unwrap();
    assert!(iso.ball_identity_residual.unwrap() <= 0.01);
    let tcb = total_curvature_bound(&m, &ball).unwrap();
    assert!(tcb.passed() && tcb.margin.unwrap().abs() <= 0.05 * l);
}

#[test]
fn bounds_in_a_ball_of_radius_two() {
    let ball = ConvexAmbient::ball(2.0).unwrap();
    let m = disk().scaled(2.0).unwrap();
    let l = m.boundary_length().unwrap();
    let q = stability_form(&m, &ball, &vec![1.0; m.num_vertices()]).unwrap();
    assert!(q <= -0.5 * l + 1e-9);
    assert!(verify_instability(&m, &ball).unwrap().passed());
    let s = verify_sigma1_bound(&m, &ball).unwrap();
    assert!(s.passed() && rel(s.value.unwrap(), 0.5) <= 0.02);
    let len = verify_length_bound(&m, &ball).unwrap();
    assert!(len.passed() && rel(len.value.unwrap(), 4.0 * PI) <= 0.01);
    assert!((len.margin.unwrap() + len.value.unwrap() - 8.0 * PI).abs() <= 1e-12);
    assert!(verify_isoperimetric(&m, &ball).unwrap().ball_identity_residual.unwrap() <= 0.01);
}

#[test]
fn fs_margin_is_scale_invariant() {
    let m = catenoid(48);
    let a = verify_fs_upper(&m).unwrap().margin.unwrap();
    let b = verify_fs_upper(&m.scaled(3.0).unwrap()).unwrap().margin.unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs());
}

#[test]
fn ellipsoid_total_curvature_bound() {
    // The equatorial section of the spheroid meets its boundary orthogonally.
    let e = ConvexAmbient::ellipsoid([1.0, 1.0, 2.0]).unwrap();
    let m = disk();
    let entry = total_curvature_bound(&m, &e).unwrap();
    assert!(entry.passed());
    assert!(rel(entry.scale.unwrap(), m.boundary_length().unwrap()) <= 1e-9);
    let report = full_report(&m, &e).unwrap();
    let ball_identity = report.checks.iter().find(|c| c.name == "ball_identity").unwrap();
    assert_eq!(ball_identity.status, Status::Skipped);
    assert!(report.all_passed());
}

#[test]
fn concentration_quantities() {
    let d = curvature_concentration(&disk(), &Vec3::new(0.2, 0.1, 0.0), 0.4).unwrap();
    assert!(d.local_total_curvature <= 1e-8 && d.concentration <= 1e-8 && !d.empty);

    let m = catenoid(96);
    let c = critical_catenoid_parameters().unwrap().c;
    let q = Vec3::new(c, 0.0, 0.0);
    let r = 0.3;
    let got = curvature_concentration(&m, &q, r).unwrap();
    assert!(got.local_total_curvature > 0.0 && got.concentration > 0.0);
    // The waist carries the largest curvature, |h|^2 = 2 / c^2.
    assert!(got.concentration <= 2.0 / (c * c) * r * r * 1.05);
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for r in [0.3, 0.2, 0.1, 0.05] {
        let g = curvature_concentration(&m, &q, r).unwrap();
        assert!(g.local_total_curvature <= prev.0 && g.concentration <= prev.1);
        prev = (g.local_total_curvature, g.concentration);
    }
    assert!(curvature_concentration(&m, &q, 0.0).is_err());
    let far = curvature_concentration(&m, &Vec3::new(5.0, 0.0, 0.0), 0.1).unwrap();
    assert!(far.empty && far.concentration == 0.0);
}

#[test]
fn disk_and_catenoid_intersect_near_the_waist() {
    let d = disk();
    let m = catenoid(64);
    let hit = verify_intersection(&d, &m);
    assert!(hit.intersects);
    let w = hit.witness.unwrap();
    let c = critical_catenoid_parameters().unwrap().c;
    assert!(w[2].abs() <= 1e-12);
    assert!((w[0].hypot(w[1]) - c).abs() <= 0.01, "{w:?}");
    assert_eq!(verify_intersection(&m, &d).intersects, true);
    assert!(verify_intersection(&m, &m).intersects);
}

#[test]
fn parallel_disks_are_disjoint() {
    let rho = (1.0f64 - 0.25).sqrt();
    let up = equatorial_disk(6, 32).unwrap().map_vertices(|p| Vec3::new(rho * p.x, rho * p.y, 0.5)).unwrap();
    let down = up.map_vertices(|p| Vec3::new(p.x, p.y, -0.5)).unwrap();
    let ab = verify_intersection(&up, &down);
    let ba = verify_intersection(&down, &up);
    assert!(!ab.intersects && !ba.intersects);
    let bound = ab.distance_lower_bound.unwrap();
    assert!(bound > 0.0 && bound <= 1.0 + 1e-12);
    // Neither disk is free boundary: both fail the orthogonality gate.
    let ball = ConvexAmbient::unit_ball();
    assert_eq!(verify_sigma1_bound(&up, &ball).unwrap().status, Status::Skipped);
}

#[test]
fn reports_and_gating() {
    let ball = ConvexAmbient::unit_ball();
    for m in [disk(), catenoid(128)] {
        let r = full_report(&m, &ball).unwrap();
        assert!(r.all_passed(), "{:#?}", r.checks);
        assert!(r.checks.iter().all(|c| c.status == Status::Pass));
        let back: GeometryReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
    let p = perturb(&disk(), &ball, 0.05, 7).unwrap();
    let r = full_report(&p, &ball).unwrap();
    for name in ["instability", "sigma1_lower_bound", "length_upper_bound", "ball_identity", "total_curvature_bound"] {
        let c = r.checks.iter().find(|c| c.name == name).unwrap();
        assert_eq!(c.status, Status::Skipped, "{name}");
        assert!(c.reason.is_some());
    }
}
