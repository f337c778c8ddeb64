//! Cotangent stiffness, lumped boundary mass, the discrete Dirichlet-to-Neumann
//! map and the Steklov spectrum.
//!
//! The DtN matrix is the Schur complement of the stiffness matrix onto the
//! boundary nodes. Interior nodes are ordered by reverse Cuthill-McKee seeded
//! at the nodes adjacent to the boundary, so those come last in the envelope
//! factor and each boundary column needs only a short forward solve.
//!
//! Boundary quantities are indexed by [`TriMesh::boundary_vertices`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::CscMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{corners, cotangent, triangle_area};
use crate::linalg::{csc_from_triplets, reverse_cuthill_mckee, EnvelopeCholesky};
use crate::{Error, Result, TriMesh};

/// Largest boundary size handled by the dense symmetric eigensolver under
/// [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 2000;

/// Relative gap below which neighbouring eigenvalues count as one cluster.
pub const MULTIPLICITY_GAP: f64 = 0.02;

/// Cotangent stiffness matrix `K` with `K_ij = -(cot a + cot b) / 2`.
pub fn stiffness_matrix(mesh: &TriMesh) -> Result<CscMatrix<f64>> {
    Ok(csc_from_triplets(mesh.num_vertices(), &stiffness_triplets(mesh)?))
}

pub(crate) fn stiffness_triplets(mesh: &TriMesh) -> Result<Vec<(usize, usize, f64)>> {
    let x = mesh.vertices();
    let mut trip = Vec::with_capacity(mesh.num_faces() * 9);
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = corners(x, f);
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let w = 0.5 * cotangent(&p[i], &p[j], &p[k]);
            if !w.is_finite() {
                return Err(Error::DegenerateFace {
                    face: fi,
                    area: triangle_area(&p[0], &p[1], &p[2]),
                });
            }
            let (a, b) = (f[j], f[k]);
            trip.push((a, b, -w));
            trip.push((b, a, -w));
            trip.push((a, a, w));
            trip.push((b, b, w));
        }
    }
    Ok(trip)
}

/// Lumped boundary mass: half the length of each incident boundary edge.
pub fn boundary_mass_matrix(mesh: &TriMesh) -> Result<Vec<f64>> {
    if mesh.boundary_loops().is_empty() {
        return Err(Error::ClosedSurface);
    }
    let x = mesh.vertices();
    let mut mass = Vec::new();
    for lp in mesh.boundary_loops() {
        let n = lp.len();
        for i in 0..n {
            let prev = lp[(i + n - 1) % n];
            let next = lp[(i + 1) % n];
            let here = lp[i];
            mass.push(0.5 * ((x[here] - x[prev]).norm() + (x[next] - x[here]).norm()));
        }
    }
    Ok(mass)
}

/// Factorized interior block of the stiffness matrix together with the
/// coupling to the boundary.
struct InteriorSystem {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    /// `local[v]`: index of `v` within `boundary` or `interior`.
    local: Vec<usize>,
    k: CscMatrix<f64>,
    chol: Option<EnvelopeCholesky>,
}

impl InteriorSystem {
    fn new(mesh: &TriMesh) -> Result<Self> {
        if mesh.boundary_loops().is_empty() {
            return Err(Error::ClosedSurface);
        }
        let k = stiffness_matrix(mesh)?;
        let boundary = mesh.boundary_vertices();
        let interior = mesh.interior_vertices();
        let mut local = vec![0; mesh.num_vertices()];
        for (i, &v) in boundary.iter().enumerate() {
            local[v] = i;
        }
        for (i, &v) in interior.iter().enumerate() {
            local[v] = i;
        }
        let chol = if interior.is_empty() {
            None
        } else {
            let mut trip = Vec::new();
            let mut adjacency = vec![Vec::new(); interior.len()];
            let mut seeds = Vec::new();
            for (i, &v) in interior.iter().enumerate() {
                let lane = k.col(v);
                let mut touches_boundary = false;
                for (&r, &val) in lane.row_indices().iter().zip(lane.values()) {
                    if mesh.is_boundary_vertex(r) {
                        touches_boundary = true;
                        continue;
                    }
                    trip.push((local[r], i, val));
                    if local[r] != i {
                        adjacency[i].push(local[r]);
                    }
                }
                if touches_boundary {
                    seeds.push(i);
                }
            }
            let kii = csc_from_triplets(interior.len(), &trip);
            let order = reverse_cuthill_mckee(&adjacency, &seeds);
            Some(EnvelopeCholesky::factor(&kii, order).map_err(|e| match e {
                Error::NotPositiveDefinite(i) => Error::NotPositiveDefinite(interior[i]),
                other => other,
            })?)
        };
        Ok(Self {
            boundary,
            interior,
            local,
            k,
            chol,
        })
    }

    /// Column `j` of `K_ib` as sparse `(interior index, value)` pairs.
    fn coupling_column(&self, mesh: &TriMesh, j: usize) -> Vec<(usize, f64)> {
        let lane = self.k.col(self.boundary[j]);
        lane.row_indices()
            .iter()
            .zip(lane.values())
            .filter(|(&r, _)| !mesh.is_boundary_vertex(r))
            .map(|(&r, &v)| (self.local[r], v))
            .collect()
    }

    fn schur(&self, mesh: &TriMesh) -> DMatrix<f64> {
        let nb = self.boundary.len();
        let mut s = DMatrix::<f64>::zeros(nb, nb);
        for (j, &b) in self.boundary.iter().enumerate() {
            let lane = self.k.col(b);
            for (&r, &v) in lane.row_indices().iter().zip(lane.values()) {
                if mesh.is_boundary_vertex(r) {
                    s[(self.local[r], j)] += v;
                }
            }
        }
        let Some(chol) = &self.chol else {
            return s;
        };
        let n = chol.dim();
        // Z_j = L^{-1} P K_ib e_j is zero before its first nonzero position.
        let tails: Vec<(usize, Vec<f64>)> = (0..nb)
            .into_par_iter()
            .map(|j| {
                let col = self.coupling_column(mesh, j);
                if col.is_empty() {
                    return (n, Vec::new());
                }
                let mut y = vec![0.0; n];
                let mut start = n;
                for &(i, v) in &col {
                    let p = chol.position(i);
                    y[p] += v;
                    start = start.min(p);
                }
                chol.forward_in_order(&mut y, start);
                (start, y.split_off(start))
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..nb)
            .into_par_iter()
            .map(|j| {
                let (sj, zj) = &tails[j];
                (0..nb)
                    .map(|k| {
                        let (sk, zk) = &tails[k];
                        let lo = (*sj).max(*sk);
                        if lo >= n {
                            return 0.0;
                        }
                        zj[lo - sj..]
                            .iter()
                            .zip(&zk[lo - sk..])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        for j in 0..nb {
            for k in 0..nb {
                s[(j, k)] -= rows[j][k];
            }
        }
        (&s + s.transpose()) * 0.5
    }

    fn extend(&self, mesh: &TriMesh, values: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; mesh.num_vertices()];
        for (j, &b) in self.boundary.iter().enumerate() {
            u[b] = values[j];
        }
        if let Some(chol) = &self.chol {
            let mut rhs = vec![0.0; self.interior.len()];
            for (j, &g) in values.iter().enumerate() {
                for (i, v) in self.coupling_column(mesh, j) {
                    rhs[i] -= v * g;
                }
            }
            let ui = chol.solve(&rhs);
            for (i, &v) in self.interior.iter().enumerate() {
                u[v] = ui[i];
            }
        }
        u
    }
}

/// Dense Schur complement `S = K_bb - K_bi K_ii^{-1} K_ib`.
pub fn dtn_schur(mesh: &TriMesh) -> Result<DMatrix<f64>> {
    let sys = InteriorSystem::new(mesh)?;
    Ok(sys.schur(mesh))
}

/// The discrete DtN map with its boundary mass, ready for spectral queries.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    pub boundary: Vec<usize>,
    pub schur: DMatrix<f64>,
    pub mass: Vec<f64>,
}

impl DtnOperator {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let sys = InteriorSystem::new(mesh)?;
        let schur = sys.schur(mesh);
        Ok(Self {
            boundary: sys.boundary,
            schur,
            mass: boundary_mass_matrix(mesh)?,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `g^T S g / g^T M g`.
    pub fn rayleigh_quotient(&self, g: &[f64]) -> f64 {
        let gv = DVector::from_column_slice(g);
        let num = gv.dot(&(&self.schur * &gv));
        let den: f64 = g.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum();
        num / den
    }

    pub fn spectrum(&self, m: usize) -> Result<SteklovSpectrum> {
        self.spectrum_with(m, EigenMethod::Auto)
    }

    /// Lowest `m` eigenpairs of `S u = sigma M u`. Constants are deflated with
    /// a Householder reflector before the eigensolve.
    pub fn spectrum_with(&self, m: usize, method: EigenMethod) -> Result<SteklovSpectrum> {
        let nb = self.len();
        if m == 0 || m > nb {
            return Err(Error::TooManyEigenpairs {
                requested: m,
                available: nb,
            });
        }
        let inv_sqrt: Vec<f64> = self.mass.iter().map(|w| 1.0 / w.sqrt()).collect();
        let a = DMatrix::from_fn(nb, nb, |i, j| self.schur[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);

        // Householder reflector H with H w = -|w| e_0, where w = M^{1/2} 1.
        let w = DVector::from_iterator(nb, self.mass.iter().map(|x| x.sqrt()));
        let wn = w.norm();
        let mut v = w.clone();
        v[0] += wn;
        let vn2 = v.norm_squared();
        let reflect = |x: &DVector<f64>| -> DVector<f64> { x - &v * (2.0 * v.dot(x) / vn2) };

        let sigma0 = w.dot(&(&a * &w)) / (wn * wn);
        let mut eigenvalues = vec![sigma0];
        let total_len: f64 = self.mass.iter().sum();
        let mut eigenfunctions = vec![vec![1.0 / total_len.sqrt(); nb]];

        if m > 1 {
            // Deflated block: rows/cols 1.. of H A H.
            let mut ha = a.clone();
            for mut col in ha.column_iter_mut() {
                let r = reflect(&col.clone_owned());
                col.copy_from(&r);
            }
            let mut hah = ha.transpose();
            for mut col in hah.column_iter_mut() {
                let r = reflect(&col.clone_owned());
                col.copy_from(&r);
            }
            let block = hah.view((1, 1), (nb - 1, nb - 1)).into_owned();
            let block = (&block + block.transpose()) * 0.5;
            let use_dense = match method {
                EigenMethod::Auto => nb <= DENSE_LIMIT,
                EigenMethod::Dense => true,
                EigenMethod::Iterative => false,
            };
            let pairs = if use_dense {
                lowest_dense(block, m - 1)
            } else {
                lowest_subspace_iteration(&block, m - 1)?
            };
            for (val, y) in pairs {
                let mut full = DVector::zeros(nb);
                full.rows_mut(1, nb - 1).copy_from(&y);
                let z = reflect(&full);
                let mut u: Vec<f64> = z.iter().zip(&inv_sqrt).map(|(zi, s)| zi * s).collect();
                let norm: f64 = u.iter().zip(&self.mass).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
                let peak = u.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
                let lead = u.iter().find(|x| x.abs() > 1e-8 * peak).copied().unwrap_or(1.0);
                let sign = if lead < 0.0 { -1.0 } else { 1.0 };
                for x in &mut u {
                    *x *= sign / norm;
                }
                eigenvalues.push(val);
                eigenfunctions.push(u);
            }
        }
        Ok(SteklovSpectrum {
            eigenvalues,
            eigenfunctions,
            boundary_vertices: self.boundary.clone(),
        })
    }
}

/// Eigensolver selection; `Auto` uses the dense solver up to [`DENSE_LIMIT`]
/// boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Iterative,
}

fn lowest_dense(block: DMatrix<f64>, m: usize) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(block);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    idx.into_iter()
        .take(m)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect()
}

/// Inverse subspace iteration with Rayleigh-Ritz on the deflated block, which
/// is positive definite for a connected mesh.
fn lowest_subspace_iteration(block: &DMatrix<f64>, m: usize) -> Result<Vec<(f64, DVector<f64>)>> {
    const MAX_ITERS: usize = 500;
    let n = block.nrows();
    let p = (2 * m + 8).min(n);
    let chol = block
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite(0))?;
    let scale = block.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut x = DMatrix::from_fn(n, p, |i, j| {
        crate::ambient::radical_inverse((i * p + j + 1) as u64, 3) - 0.5
    });
    for it in 0..MAX_ITERS {
        let y = chol.solve(&x);
        let q = y.qr().q();
        let h = q.transpose() * block * &q;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = &q * &eig.eigenvectors;
        let converged = idx.iter().take(m).all(|&i| {
            let v = ritz.column(i);
            let r = block * v - v * eig.eigenvalues[i];
            r.norm() <= 1e-11 * scale
        });
        if converged {
            return Ok(idx
                .into_iter()
                .take(m)
                .map(|i| (eig.eigenvalues[i], ritz.column(i).into_owned()))
                .collect());
        }
        x = ritz;
        if it + 1 == MAX_ITERS {
            break;
        }
    }
    Err(Error::EigenNonConvergence(MAX_ITERS))
}

/// Ascending Steklov eigenvalues with boundary eigenfunctions of unit
/// boundary-mass norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteklovSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    pub boundary_vertices: Vec<usize>,
}

impl SteklovSpectrum {
    pub fn sigma1(&self) -> Option<f64> {
        self.eigenvalues.get(1).copied()
    }

    /// Cluster sizes of the eigenvalues from index 1 on, grouping neighbours
    /// whose relative gap is below [`MULTIPLICITY_GAP`].
    pub fn multiplicities(&self) -> Vec<usize> {
        let vals = &self.eigenvalues[1.min(self.eigenvalues.len())..];
        let mut out = Vec::new();
        let mut i = 0;
        while i < vals.len() {
            let mut j = i + 1;
            while j < vals.len() && (vals[j] - vals[j - 1]).abs() <= MULTIPLICITY_GAP * vals[i].abs() {
                j += 1;
            }
            out.push(j - i);
            i = j;
        }
        out
    }
}

pub fn steklov_spectrum(mesh: &TriMesh, m: usize) -> Result<SteklovSpectrum> {
    DtnOperator::new(mesh)?.spectrum(m)
}

/// First nontrivial Steklov eigenvalue.
pub fn sigma1(mesh: &TriMesh) -> Result<f64> {
    let spec = steklov_spectrum(mesh, 2)?;
    Ok(spec.eigenvalues[1])
}

/// Discrete harmonic extension of boundary data together with how far the
/// interior values leave the boundary range.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicExtension {
    pub values: Vec<f64>,
    /// Largest excursion of an interior value outside `[min g, max g]`; zero
    /// when the discrete maximum principle holds.
    pub max_principle_violation: f64,
}

impl HarmonicExtension {
    pub fn satisfies_max_principle(&self) -> bool {
        self.max_principle_violation <= 1e-10
    }
}

pub fn harmonic_extension(mesh: &TriMesh, boundary_values: &[f64]) -> Result<HarmonicExtension> {
    let sys = InteriorSystem::new(mesh)?;
    if boundary_values.len() != sys.boundary.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} boundary values, got {}",
            sys.boundary.len(),
            boundary_values.len()
        )));
    }
    let values = sys.extend(mesh, boundary_values);
    let lo = boundary_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = boundary_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violation = sys
        .interior
        .iter()
        .map(|&v| (lo - values[v]).max(values[v] - hi).max(0.0))
        .fold(0.0, f64::max);
    Ok(HarmonicExtension {
        values,
        max_principle_violation: violation,
    })
}

/// `u^T K u`.
pub fn dirichlet_energy(k: &CscMatrix<f64>, u: &[f64]) -> f64 {
    let ku = crate::linalg::csc_mul_vec(k, u);
    ku.iter().zip(u).map(|(a, b)| a * b).sum()
}
