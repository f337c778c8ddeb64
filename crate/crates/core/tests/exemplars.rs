use freebound::exemplars::{
    conformal_catenoid_rings, critical_catenoid, critical_catenoid_parameters, equatorial_disk, perturb,
};
use freebound::solver::{discrete_mean_curvature, orthogonality_defect};
use freebound::{ConvexAmbient, TriMesh};

fn catenoid(n_theta: usize) -> TriMesh {
    critical_catenoid(conformal_catenoid_rings(n_theta).unwrap(), n_theta).unwrap()
}

#[test]
fn parameter_satisfies_root_equation() {
    let p = critical_catenoid_parameters().unwrap();
    assert!((p.s0 * p.s0.tanh() - 1.0).abs() <= 1e-13);
    assert!((p.c - 1.0 / (p.s0.cosh().powi(2) + p.s0 * p.s0).sqrt()).abs() <= 1e-15);
    assert!((p.boundary_radius - 0.8336).abs() < 1e-4);
    // The boundary circles sit on the unit sphere.
    assert!((p.boundary_radius.hypot(p.c * p.s0) - 1.0).abs() <= 1e-14);
}

#[test]
fn exemplar_boundaries_lie_on_the_sphere() {
    for m in [equatorial_disk(6, 24).unwrap(), catenoid(40)] {
        for b in m.boundary_vertices() {
            assert!((m.vertices()[b].norm() - 1.0).abs() <= 1e-12);
        }
    }
    let disk = equatorial_disk(6, 24).unwrap();
    assert!(disk.vertices().iter().all(|p| p.z == 0.0));
}

#[test]
fn catenoid_orthogonality_defect_vanishes_under_refinement() {
    let ball = ConvexAmbient::unit_ball();
    let defects: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| orthogonality_defect(&catenoid(n), &ball).unwrap())
        .collect();
    assert!(defects.windows(2).all(|w| w[1] < 0.7 * w[0]), "{defects:?}");
    assert!(defects[2] < 0.017);
}

#[test]
fn mean_curvature_decreases_with_refinement() {
    let ball = ConvexAmbient::unit_ball();
    let h: Vec<f64> = [24, 48, 96]
        .iter()
        .map(|&n| discrete_mean_curvature(&catenoid(n)).unwrap().sup_interior())
        .collect();
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    let mut disk = equatorial_disk(4, 16).unwrap();
    for _ in 0..3 {
        assert!(discrete_mean_curvature(&disk).unwrap().sup_interior() <= 1e-12);
        disk = disk.refine(&ball).unwrap();
    }
}

#[test]
fn perturbation_preserves_topology_and_boundary() {
    let ball = ConvexAmbient::unit_ball();
    for base in [equatorial_disk(8, 32).unwrap(), catenoid(48)] {
        let p = perturb(&base, &ball, 0.02, 3).unwrap();
        assert_eq!(p.topology().unwrap(), base.topology().unwrap());
        assert_eq!(p.faces(), base.faces());
        for b in p.boundary_vertices() {
            assert!((p.vertices()[b].norm() - 1.0).abs() <= 1e-12);
        }
        let moved = p
            .vertices()
            .iter()
            .zip(base.vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(moved > 0.0 && moved <= 0.02 + 1e-12, "{moved}");
    }
}

#[test]
fn perturbation_is_deterministic() {
    let ball = ConvexAmbient::unit_ball();
    let d = equatorial_disk(8, 32).unwrap();
    let a = perturb(&d, &ball, 0.05, 7).unwrap();
    let b = perturb(&d, &ball, 0.05, 7).unwrap();
    let c = perturb(&d, &ball, 0.05, 8).unwrap();
    assert!(a.vertices().iter().zip(b.vertices()).all(|(p, q)| p.iter().zip(q.iter()).all(|(x, y)| x.to_bits() == y.to_bits())));
    assert_ne!(a.vertices(), c.vertices());
    assert_eq!(perturb(&d, &ball, 0.0, 7).unwrap().vertices(), d.vertices());
    assert!(perturb(&d, &ball, -0.1, 7).is_err());
}
