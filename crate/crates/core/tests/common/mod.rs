//! Random meshes and the property bodies shared by the property suite and
//! the acceptance run.
#![allow(dead_code)]

use freebound::exemplars::equatorial_disk;
use freebound::solver::area_gradient;
use freebound::steklov::DtnOperator;
use freebound::{TriMesh, Vec3};
use nalgebra::DVector;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Parameters of a jittered disk: resolution, jitter seed values and scale.
#[derive(Debug, Clone)]
pub struct MeshSpec {
    pub n_r: usize,
    pub n_a: usize,
    pub jitter: Vec<[f64; 3]>,
    pub bend: f64,
    pub scale: f64,
}

impl MeshSpec {
    /// Disk with every vertex moved by up to a fifth of the ring spacing and
    /// bent out of plane.
    pub fn build(&self) -> TriMesh {
        let base = equatorial_disk(self.n_r, self.n_a).unwrap();
        let h = 0.2 / self.n_r as f64;
        let moved: Vec<Vec3> = base
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let j = self.jitter[i % self.jitter.len()];
                let q = p + Vec3::new(j[0], j[1], j[2]) * h;
                Vec3::new(q.x, q.y, q.z + self.bend * (q.x * q.x - 0.5 * q.y * q.y)) * self.scale
            })
            .collect();
        base.with_vertices(moved).unwrap()
    }
}

pub fn mesh_spec() -> impl Strategy<Value = MeshSpec> {
    (
        2usize..5,
        8usize..20,
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..64),
        -0.5f64..0.5,
        0.25f64..4.0,
    )
        .prop_map(|(n_r, n_a, jitter, bend, scale)| MeshSpec {
            n_r,
            n_a,
            jitter,
            bend,
            scale,
        })
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn area_of(x: &[Vec3], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| 0.5 * (x[f[1]] - x[f[0]]).cross(&(x[f[2]] - x[f[0]])).norm())
        .sum()
}

/// Central differences with step `1e-6` against the analytic gradient.
pub fn gradient_matches_differences(spec: &MeshSpec) -> Result<(), TestCaseError> {
    let m = spec.build();
    let g = area_gradient(&m).unwrap();
    let mut x = m.vertices().to_vec();
    let h = 1e-6 * spec.scale;
    let mut err: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for v in 0..x.len() {
        for k in 0..3 {
            let orig = x[v][k];
            x[v][k] = orig + h;
            let ap = area_of(&x, m.faces());
            x[v][k] = orig - h;
            let am = area_of(&x, m.faces());
            x[v][k] = orig;
            let fd = (ap - am) / (2.0 * h);
            err = err.max((fd - g[v][k]).abs());
            norm = norm.max(g[v][k].abs());
        }
    }
    check(err <= 1e-6 * norm, || format!("gradient error {err:e} vs scale {norm:e}"))
}

pub fn eigenvalues_scale(spec: &MeshSpec, rho: f64) -> Result<(), TestCaseError> {
    let m = spec.build();
    let a = DtnOperator::new(&m).unwrap().spectrum(4).unwrap();
    let b = DtnOperator::new(&m.scaled(rho).unwrap()).unwrap().spectrum(4).unwrap();
    for k in 1..4 {
        let want = a.eigenvalues[k] / rho;
        let e = (b.eigenvalues[k] - want).abs() / want;
        check(e <= 1e-10, || format!("sigma_{k}: relative error {e:e}"))?;
    }
    let la = m.boundary_length().unwrap();
    let lb = la * rho;
    let (pa, pb) = (a.eigenvalues[1] * la, b.eigenvalues[1] * lb);
    check((pa - pb).abs() <= 1e-10 * pa, || format!("sigma1 L: {pa} vs {pb}"))
}

pub fn dtn_symmetric_with_constant_kernel(spec: &MeshSpec) -> Result<(), TestCaseError> {
    let op = DtnOperator::new(&spec.build()).unwrap();
    let s = &op.schur;
    let scale = s.amax();
    let asym = (s - s.transpose()).amax();
    check(asym <= 1e-10 * scale.max(1.0), || format!("asymmetry {asym:e}"))?;
    let s1 = (s * DVector::from_element(s.nrows(), 1.0)).amax();
    check(s1 <= 1e-10 * scale.max(1.0), || format!("|S 1| = {s1:e}"))
}

pub fn spectrum_nonnegative_and_ordered(spec: &MeshSpec) -> Result<(), TestCaseError> {
    let op = DtnOperator::new(&spec.build()).unwrap();
    let m = op.len().min(8);
    let s = op.spectrum(m).unwrap().eigenvalues;
    check(s.iter().all(|v| *v >= -1e-8), || format!("negative eigenvalue in {s:?}"))?;
    check(s.windows(2).all(|w| w[0] <= w[1]), || format!("unordered {s:?}"))
}

pub fn rayleigh_bounds_sigma1(spec: &MeshSpec, values: &[f64]) -> Result<(), TestCaseError> {
    let op = DtnOperator::new(&spec.build()).unwrap();
    let s1 = op.spectrum(2).unwrap().eigenvalues[1];
    let mut g: Vec<f64> = (0..op.len()).map(|i| values[i % values.len()] + 0.01 * i as f64).collect();
    let total: f64 = op.mass.iter().sum();
    let mean = g.iter().zip(&op.mass).map(|(a, w)| a * w).sum::<f64>() / total;
    g.iter_mut().for_each(|a| *a -= mean);
    let rq = op.rayleigh_quotient(&g);
    check(rq >= s1 - 1e-10 * s1.abs().max(1.0), || format!("Rayleigh {rq} < sigma1 {s1}"))
}
