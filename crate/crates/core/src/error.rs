use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Euler relation violated: V + F = {lhs} but E + 2 = {rhs}")]
    EulerViolation { lhs: usize, rhs: usize },

    #[error("edge ({from}, {to}) is not shared by exactly two oppositely oriented faces")]
    DanglingEdge { from: usize, to: usize },

    #[error("face {face} is degenerate: {reason}")]
    DegenerateFace { face: usize, reason: String },

    #[error("vertex {vertex} lies on {faces} faces (need at least 3)")]
    VertexDegree { vertex: usize, faces: usize },

    #[error("incidence graph is not reducible: every remaining node has degree >= 4")]
    NotReducible,

    #[error("face {face} is not planar (residual {residual:.3e})")]
    NonPlanarFace { face: usize, residual: f64 },

    #[error("polyhedron is not convex: vertex {vertex} lies outside the plane of face {face}")]
    NotConvexPolyhedron { vertex: usize, face: usize },

    #[error("degenerate measurement: {0}")]
    DegenerateMeasurement(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("the first three vertices are collinear; no normalized frame exists")]
    CollinearFrame,

    #[error("measurement set is sufficient; no flex direction exists")]
    NoKernelDirection,

    #[error("Gauss-Newton projection did not converge within {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("no restart reached the residual tolerance")]
    NoConvergedRestarts,

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("parameters outside the validity region: {0}")]
    OutOfValidityRegion(String),

    #[error("face {0} is not a quadrilateral")]
    NonQuadFace(usize),

    #[error("infeasible radii: {0}")]
    InfeasibleRadii(String),

    #[error("polygon is not convex")]
    NotConvex,

    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),

    #[error("measurement pool exhausted at rank {achieved} below target {target}")]
    PoolInsufficient { achieved: usize, target: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
