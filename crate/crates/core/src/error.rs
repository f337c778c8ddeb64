use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },
    #[error("face {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("vertex {0} is not referenced by any face")]
    UnreferencedVertex(usize),
    #[error("edge ({a}, {b}) is shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("inconsistent orientation: faces {f0} and {f1} traverse edge ({a}, {b}) in the same direction")]
    InconsistentOrientation {
        f0: usize,
        f1: usize,
        a: usize,
        b: usize,
    },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("vertex {0} is non-manifold (its incident faces form more than one fan)")]
    NonManifoldVertex(usize),
    #[error("boundary chain through vertex {0} does not close into a simple loop")]
    OpenBoundary(usize),
    #[error("invalid topology: chi = {chi} with {boundary_components} boundary loops gives no nonnegative integer genus")]
    InvalidTopology { chi: i64, boundary_components: usize },
    #[error("closed surface rejected: the mesh has no boundary")]
    ClosedSurface,

    #[error("point ({0}, {1}, {2}) is a singular point of the boundary projection")]
    ProjectionSingular(f64, f64, f64),
    #[error("boundary projection did not converge after {0} Newton steps")]
    ProjectionNonConvergence(usize),
    #[error("point is not on the domain boundary (offset {0:e})")]
    NotOnBoundary(f64),
    #[error("direction is not tangent to the domain boundary (normal component {0:e})")]
    NotTangent(f64),
    #[error("domain is not strictly convex (sampled minimum boundary curvature {0})")]
    NotConvex(f64),
    #[error("invalid ambient: {0}")]
    InvalidAmbient(String),

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("eigensolver did not converge after {0} iterations")]
    EigenNonConvergence(usize),
    #[error("requested {requested} eigenpairs but the mesh has only {available} boundary vertices")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("vertex {0} has zero area")]
    ZeroVertexArea(usize),
    #[error("line search step underflow at iteration {0}")]
    StepUnderflow(usize),
    #[error("perturbation degenerates face {0}")]
    PerturbationDegenerate(usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
