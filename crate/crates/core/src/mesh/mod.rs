//! Oriented triangle meshes with boundary.
//!
//! A [`TriMesh`] is validated once at construction and immutable afterwards.
//! Validation enforces an orientable 2-manifold with boundary: every edge has
//! one or two incident faces, adjacent faces agree on orientation, no face is
//! degenerate and every boundary component is a simple closed loop.

pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ambient::ConvexAmbient;
use crate::geometry::{corners, triangle_area};
use crate::{Error, Result, Vec3};

/// Faces whose doubled area falls below this multiple of their squared
/// longest edge are rejected as degenerate.
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    edges: Vec<[usize; 2]>,
    on_boundary: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

/// Genus, number of boundary components and Euler characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub genus: usize,
    pub boundary_components: usize,
    pub euler_characteristic: i64,
}

impl TriMesh {
    /// Validate `vertices` and `faces` and extract the boundary loops.
    pub fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = vertices.len();
        let mut referenced = vec![false; n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        vertex: v,
                        count: n,
                    });
                }
                referenced[v] = true;
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::RepeatedVertex(fi));
            }
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::UnreferencedVertex(v));
        }

        for (fi, f) in faces.iter().enumerate() {
            let [a, b, c] = corners(&vertices, f);
            let area = triangle_area(&a, &b, &c);
            let longest = (b - a)
                .norm_squared()
                .max((c - b).norm_squared())
                .max((a - c).norm_squared());
            if !(2.0 * area > DEGENERATE_RATIO * longest) {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }

        // Undirected edge -> incident (face, directed edge) list.
        let mut edge_map: HashMap<(usize, usize), Vec<(usize, usize, usize)>> =
            HashMap::with_capacity(faces.len() * 3 / 2 + 8);
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edge_map
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((fi, a, b));
            }
        }
        let mut edges: Vec<[usize; 2]> = edge_map.keys().map(|&(a, b)| [a, b]).collect();
        edges.sort_unstable();

        let mut boundary_next: Vec<Option<usize>> = vec![None; n];
        let mut on_boundary = vec![false; n];
        for e in &edges {
            let incident = &edge_map[&(e[0], e[1])];
            match incident.len() {
                1 => {
                    let (_, a, b) = incident[0];
                    if boundary_next[a].is_some() {
                        return Err(Error::NonManifoldVertex(a));
                    }
                    boundary_next[a] = Some(b);
                    on_boundary[a] = true;
                    on_boundary[b] = true;
                }
                2 => {
                    let (f0, a0, b0) = incident[0];
                    let (f1, a1, b1) = incident[1];
                    if a0 == a1 && b0 == b1 {
                        return Err(Error::InconsistentOrientation {
                            f0,
                            f1,
                            a: a0,
                            b: b0,
                        });
                    }
                }
                count => {
                    return Err(Error::NonManifoldEdge {
                        a: e[0],
                        b: e[1],
                        count,
                    })
                }
            }
        }

        check_vertex_fans(n, &faces)?;
        let boundary_loops = trace_boundary_loops(&boundary_next, &on_boundary)?;

        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e[0]].push(e[1]);
            neighbors[e[1]].push(e[0]);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        Ok(Self {
            vertices,
            faces,
            boundary_loops,
            edges,
            on_boundary,
            neighbors,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Boundary loops, each ordered along the boundary orientation induced by
    /// the faces. Loops are sorted by their smallest vertex index, and each loop
    /// starts at its smallest vertex index.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    /// Unique undirected edges `[a, b]` with `a < b`, sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.on_boundary
    }

    /// Sorted one-ring neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Boundary vertices in loop order (loops concatenated).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_loops.iter().flatten().copied().collect()
    }

    /// Interior vertices in ascending index order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.on_boundary[v])
            .collect()
    }

    /// Rebuild with new vertex positions and the same connectivity.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::build(vertices, self.faces.clone())
    }

    /// Apply `map` to every vertex position.
    pub fn map_vertices(&self, map: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        self.with_vertices(self.vertices.iter().map(map).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map_vertices(|p| p * factor)
    }

    pub fn topology(&self) -> Result<Topology> {
        let chi = self.num_vertices() as i64 - self.edges.len() as i64 + self.num_faces() as i64;
        let gamma = self.boundary_loops.len();
        let twice_genus = 2 - chi - gamma as i64;
        if twice_genus < 0 || twice_genus % 2 != 0 {
            return Err(Error::InvalidTopology {
                chi,
                boundary_components: gamma,
            });
        }
        Ok(Topology {
            genus: (twice_genus / 2) as usize,
            boundary_components: gamma,
            euler_characteristic: chi,
        })
    }

    pub fn area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = corners(&self.vertices, f);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Total length of all boundary loops. Closed meshes are rejected.
    pub fn boundary_length(&self) -> Result<f64> {
        if self.boundary_loops.is_empty() {
            return Err(Error::ClosedSurface);
        }
        Ok(self
            .boundary_loops
            .iter()
            .map(|l| loop_length(&self.vertices, l))
            .sum())
    }

    /// Uniform 1-to-4 subdivision. Midpoints of boundary edges are projected
    /// back onto the ambient boundary; interior midpoints stay on the chord.
    pub fn refine(&self, ambient: &ConvexAmbient) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.edges.len());
        let boundary_edges: std::collections::HashSet<(usize, usize)> = self
            .boundary_loops
            .iter()
            .flat_map(|l| {
                (0..l.len()).map(move |i| {
                    let (a, b) = (l[i], l[(i + 1) % l.len()]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        for e in &self.edges {
            let key = (e[0], e[1]);
            let mut m = 0.5 * (self.vertices[e[0]] + self.vertices[e[1]]);
            if boundary_edges.contains(&key) {
                m = ambient.project_to_boundary(&m)?;
            }
            midpoint.insert(key, vertices.len());
            vertices.push(m);
        }
        let mid = |a: usize, b: usize| midpoint[&(a.min(b), a.max(b))];
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            faces.push([a, ab, ca]);
            faces.push([ab, b, bc]);
            faces.push([ca, bc, c]);
            faces.push([ab, bc, ca]);
        }
        Self::build(vertices, faces)
    }
}

pub(crate) fn loop_length(vertices: &[Vec3], lp: &[usize]) -> f64 {
    (0..lp.len())
        .map(|i| (vertices[lp[(i + 1) % lp.len()]] - vertices[lp[i]]).norm())
        .sum()
}

/// Each vertex's incident faces must form a single edge-connected fan.
fn check_vertex_fans(n: usize, faces: &[[usize; 3]]) -> Result<()> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            incident[v].push(fi);
        }
    }
    for (v, fs) in incident.iter().enumerate() {
        if fs.len() <= 1 {
            continue;
        }
        // Link edges: the two other vertices of each incident face. The fan is
        // connected iff the link graph is connected.
        let mut parent: Vec<usize> = (0..fs.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut by_vertex: HashMap<usize, usize> = HashMap::new();
        for (slot, &fi) in fs.iter().enumerate() {
            for &w in faces[fi].iter().filter(|&&w| w != v) {
                if let Some(&other) = by_vertex.get(&w) {
                    let (ra, rb) = (find(&mut parent, slot), find(&mut parent, other));
                    parent[ra] = rb;
                } else {
                    by_vertex.insert(w, slot);
                }
            }
        }
        let root = find(&mut parent, 0);
        if (1..fs.len()).any(|s| find(&mut parent, s) != root) {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    Ok(())
}

fn trace_boundary_loops(next: &[Option<usize>], on_boundary: &[bool]) -> Result<Vec<Vec<usize>>> {
    let n = next.len();
    let mut visited = vec![false; n];
    let mut loops = Vec::new();
    for start in 0..n {
        if !on_boundary[start] || visited[start] {
            continue;
        }
        let mut lp = vec![start];
        visited[start] = true;
        let mut cur = start;
        loop {
            let nx = next[cur].ok_or(Error::OpenBoundary(cur))?;
            if nx == start {
                break;
            }
            if visited[nx] {
                return Err(Error::OpenBoundary(nx));
            }
            visited[nx] = true;
            lp.push(nx);
            cur = nx;
        }
        if lp.len() < 3 {
            return Err(Error::OpenBoundary(start));
        }
        loops.push(lp);
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> TriMesh {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        TriMesh::build(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn single_triangle_has_one_boundary_loop() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let m = TriMesh::build(v, vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.boundary_loops(), &[vec![0, 1, 2]]);
        assert_relative_eq!(m.area(), 0.5);
        let t = m.topology().unwrap();
        assert_eq!((t.genus, t.boundary_components, t.euler_characteristic), (0, 1, 1));
    }

    #[test]
    fn same_winding_on_shared_edge_is_rejected() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let err = TriMesh::build(v, vec![[0, 1, 2], [0, 3, 2]]).unwrap_err();
        assert!(matches!(err, Error::InconsistentOrientation { .. }), "{err}");
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let err = TriMesh::build(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, Error::NonManifoldEdge { count: 3, .. }), "{err}");
    }

    #[test]
    fn degenerate_and_out_of_range_faces_are_rejected() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        assert!(matches!(
            TriMesh::build(v.clone(), vec![[0, 1, 2]]),
            Err(Error::DegenerateFace { face: 0, .. })
        ));
        assert!(matches!(
            TriMesh::build(v.clone(), vec![[0, 1, 3]]),
            Err(Error::IndexOutOfRange { vertex: 3, .. })
        ));
        assert!(matches!(TriMesh::build(v, vec![]), Err(Error::EmptyMesh)));
    }

    #[test]
    fn bowtie_vertex_is_rejected() {
        // Two triangles touching only at vertex 0.
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(-1.0, -1.0, 0.0),
        ];
        let err = TriMesh::build(v, vec![[0, 1, 2], [0, 3, 4]]).unwrap_err();
        assert!(matches!(err, Error::NonManifoldVertex(0)), "{err}");
    }

    #[test]
    fn closed_mesh_has_no_boundary_length() {
        // Tetrahedron.
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let m = TriMesh::build(v, vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap();
        assert!(m.boundary_loops().is_empty());
        assert!(matches!(m.boundary_length(), Err(Error::ClosedSurface)));
        assert_eq!(m.topology().unwrap().euler_characteristic, 2);
    }

    #[test]
    fn scaling_laws_hold() {
        let m = square();
        let s = m.scaled(2.0).unwrap();
        assert_relative_eq!(s.area(), 4.0 * m.area(), max_relative = 1e-12);
        assert_relative_eq!(
            s.boundary_length().unwrap(),
            2.0 * m.boundary_length().unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rebuild_is_idempotent() {
        let m = square();
        let r = TriMesh::build(m.vertices().to_vec(), m.faces().to_vec()).unwrap();
        assert_eq!(r.boundary_loops(), m.boundary_loops());
        assert_eq!(r.edges(), m.edges());
        assert_eq!(r.faces(), m.faces());
    }

    #[test]
    fn boundary_loop_follows_face_orientation() {
        let m = square();
        assert_eq!(m.boundary_loops(), &[vec![0, 1, 2, 3]]);
        assert_eq!(m.interior_vertices(), Vec::<usize>::new());
    }
}
