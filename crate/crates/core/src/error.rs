use std::path::PathBuf;

/// Errors produced by the simulator, solver and dataset layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A kernel was evaluated outside its domain (coincident points, R <= 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("trajectory leaves the valid region at frame {frame}: {reason}")]
    Trajectory { frame: usize, reason: String },

    #[error("duplicate voxel centers at indices {first} and {second}")]
    DuplicateVoxel { first: usize, second: usize },

    #[error("voxel {index} is not on the regular lattice")]
    OffLattice { index: usize },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular interaction system")]
    Singular,

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("missing channel cell (k = {k}, m = {m})")]
    MissingCell { k: usize, m: usize },

    #[error("simulation failed at subcarrier {k}, frame {m}: {source}")]
    Cell {
        k: usize,
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("split error: {0}")]
    Split(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
