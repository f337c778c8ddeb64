//! Sparse assembly and an envelope (profile) Cholesky factorization.
//!
//! Meshes at desk scale give banded systems once reordered by reverse
//! Cuthill-McKee, and the envelope storage keeps every inner product of the
//! factorization contiguous. The factor also supports forward solves whose
//! right-hand side is supported on a trailing block of the ordering, which is
//! what the boundary Schur complement needs.

use std::collections::VecDeque;

use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::{Error, Result};

/// Assemble a square CSC matrix from `(row, col, value)` triplets; duplicates
/// are summed.
pub fn csc_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for &(i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CscMatrix::from(&coo)
}

/// Cuthill-McKee ordering seeded from `seeds`, returned reversed so that the
/// seeds end up last. Components not reached from the seeds are appended from
/// their lowest-degree vertex. Returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>], seeds: &[usize]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();

    let mut seed_list: Vec<usize> = seeds.to_vec();
    seed_list.sort_by_key(|&v| (adjacency[v].len(), v));
    for &s in &seed_list {
        if !visited[s] {
            visited[s] = true;
            queue.push_back(s);
        }
    }
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adjacency[v].len(), v));
    let mut next_root = 0;
    loop {
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (adjacency[w].len(), w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
        while next_root < n && visited[by_degree[next_root]] {
            next_root += 1;
        }
        if next_root == n {
            break;
        }
        let r = by_degree[next_root];
        visited[r] = true;
        queue.push_back(r);
    }
    order.reverse();
    order
}

/// Lower-triangular Cholesky factor `L` of `P A P^T`, stored row by row over
/// each row's envelope `first[i] ..= i`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    order: Vec<usize>,
    position: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factor the symmetric positive definite `a` under the ordering
    /// `order[new] = old`. Only the lower triangle of `a` (in the permuted
    /// indexing) is read, so `a` must store both triangles.
    pub fn factor(a: &CscMatrix<f64>, order: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "matrix must be square");
        assert_eq!(order.len(), n, "ordering must cover every row");
        let mut position = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (col, lane) in a.col_iter().enumerate() {
            let pj = position[col];
            for &row in lane.row_indices() {
                let pi = position[row];
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offsets[n]];
        for (col, lane) in a.col_iter().enumerate() {
            let pj = position[col];
            for (&row, &v) in lane.row_indices().iter().zip(lane.values()) {
                let pi = position[row];
                if pj <= pi {
                    data[offsets[pi] + (pj - first[pi])] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_start = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_start);
                let row_j = &head[offsets[j]..offsets[j + 1]];
                let row_i = &mut tail[..i - fi + 1];
                let dot: f64 = row_i[lo - fi..j - fi]
                    .iter()
                    .zip(&row_j[lo - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let diag_j = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / diag_j;
            }
            let row_i = &mut data[row_start..offsets[i + 1]];
            let (off, diag) = row_i.split_at_mut(i - fi);
            let d = diag[0] - off.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite(order[i]));
            }
            diag[0] = d.sqrt();
        }

        Ok(Self {
            order,
            position,
            first,
            offsets,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Position of original index `old` in the factor ordering.
    pub fn position(&self, old: usize) -> usize {
        self.position[old]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Solve `L y = b` in place for a right-hand side given in factor
    /// ordering whose entries before `start` vanish. Entries of `y` before
    /// `start` are zero as well.
    pub fn forward_in_order(&self, y: &mut [f64], start: usize) {
        let n = self.dim();
        for i in start..n {
            let fi = self.first[i];
            let lo = fi.max(start);
            let row = self.row(i);
            let dot: f64 = row[lo - fi..i - fi]
                .iter()
                .zip(&y[lo..i])
                .map(|(l, v)| l * v)
                .sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
    }

    fn backward_in_order(&self, x: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }

    /// Solve `A x = b` for `b` in the original indexing.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        let start = y.iter().position(|v| *v != 0.0).unwrap_or(n);
        self.forward_in_order(&mut y, start);
        self.backward_in_order(&mut y);
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// `y = A x` for a CSC matrix.
pub fn csc_mul_vec(a: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (col, lane) in a.col_iter().enumerate() {
        let xc = x[col];
        if xc == 0.0 {
            continue;
        }
        for (&row, &v) in lane.row_indices().iter().zip(lane.values()) {
            y[row] += v * xc;
        }
    }
    y
}

/// Row/column adjacency of the sparsity pattern (diagonal excluded).
pub fn pattern_adjacency(a: &CscMatrix<f64>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); a.nrows()];
    for (col, lane) in a.col_iter().enumerate() {
        for &row in lane.row_indices() {
            if row != col {
                adj[col].push(row);
            }
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random sparse SPD matrix: graph Laplacian of a random graph plus a
    /// positive diagonal.
    fn random_spd(n: usize, seed: u64) -> (CscMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] += rng.random_range(0.1..1.0);
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i {
                    let w = rng.random_range(0.1..2.0);
                    dense[(i, j)] -= w;
                    dense[(j, i)] -= w;
                    dense[(i, i)] += w;
                    dense[(j, j)] += w;
                }
            }
        }
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if dense[(i, j)] != 0.0 {
                    trip.push((i, j, dense[(i, j)]));
                }
            }
        }
        (csc_from_triplets(n, &trip), dense)
    }

    #[test]
    fn envelope_cholesky_solves_random_spd_systems() {
        for seed in 0..5 {
            let n = 60;
            let (a, dense) = random_spd(n, seed);
            let order = reverse_cuthill_mckee(&pattern_adjacency(&a), &[]);
            let chol = EnvelopeCholesky::factor(&a, order).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = chol.solve(&b);
            let reference = dense.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
            for i in 0..n {
                assert!((x[i] - reference[i]).abs() < 1e-10 * (1.0 + reference[i].abs()));
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = csc_from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            EnvelopeCholesky::factor(&a, vec![0, 1]),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn rcm_places_seeds_last_and_is_a_permutation() {
        let (a, _) = random_spd(40, 9);
        let adj = pattern_adjacency(&a);
        let order = reverse_cuthill_mckee(&adj, &[3, 17]);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..40).collect::<Vec<_>>());
        let tail: Vec<usize> = order[38..].to_vec();
        assert!(tail.contains(&3) && tail.contains(&17));
    }
}
