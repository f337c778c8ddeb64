//! Discrete free-boundary minimal surfaces in convex domains of R^3.
//!
//! The crate builds triangle meshes of surfaces with boundary on a strictly
//! convex container (a round ball or a convex level-set body), relaxes them to
//! discrete free-boundary minimal surfaces, computes their Steklov spectrum
//! through the discrete Dirichlet-to-Neumann map, and evaluates the classical
//! curvature and eigenvalue bounds for such surfaces with signed margins.
//!
//! Module map:
//! - [`mesh`]: validated triangle meshes with boundary, topology and measures.
//! - [`ambient`]: the convex container, its boundary projection and curvature.
//! - [`exemplars`]: closed-form free-boundary minimal surfaces in the unit ball.
//! - [`solver`]: constrained discrete area minimization.
//! - [`steklov`]: stiffness matrix, Dirichlet-to-Neumann map, Steklov spectrum.
//! - [`checks`]: second fundamental form estimation and the bound checks.

pub mod ambient;
pub mod checks;
mod error;
pub mod exemplars;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod steklov;

pub use ambient::{AmbientConfig, ConvexAmbient};
pub use error::{Error, Result};
pub use mesh::{Topology, TriMesh};

/// 3-vectors used for positions, normals and gradients.
pub type Vec3 = nalgebra::Vector3<f64>;
