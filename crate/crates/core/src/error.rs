use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell}: needs at least 3 vertices, got {count}")]
    TooFewVertices { cell: usize, count: usize },

    #[error("cell {cell}: vertex id {vertex} out of range ({n_vertices} vertices)")]
    VertexOutOfRange { cell: usize, vertex: usize, n_vertices: usize },

    #[error("cell {cell}: degenerate polygon (signed area {area:e})")]
    DegeneratePolygon { cell: usize, area: f64 },

    #[error("cell {cell}: vertex loop is clockwise")]
    NotCounterClockwise { cell: usize },

    #[error("edge ({0}, {1}) has zero length")]
    DegenerateEdge(usize, usize),

    #[error("edge ({0}, {1}) is shared by {2} cells")]
    NonManifoldEdge(usize, usize, usize),

    #[error("edge ({0}, {1}) is traversed in the same direction by two cells")]
    InconsistentOrientation(usize, usize),

    #[error("degenerate Voronoi cell for seed {seed}")]
    DegenerateVoronoiCell { seed: usize },

    #[error("mesh file line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("solution file line {line}: {msg}")]
    SolutionFormat { line: usize, msg: String },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("boundary edge {edge} is not covered by any boundary condition")]
    BoundaryCoverage { edge: usize },

    #[error("essential traction on interior edge {edge}")]
    EssentialOnInteriorEdge { edge: usize },

    #[error("non-finite value in {0}")]
    NotFinite(String),

    #[error("singular system (zero pivot or non-finite unknown at index {index})")]
    Singular { index: usize },

    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("the mesh has no cells")]
    EmptyMesh,

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Whether the error comes from the linear solve rather than from
    /// invalid input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Residual { .. } | Error::Factorization(_) | Error::NotFinite(_))
    }
}
