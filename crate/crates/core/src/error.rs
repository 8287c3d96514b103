use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("meshing failed: {message} near ({x}, {y})")]
    Meshing { message: String, x: f64, y: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("eigensolver did not converge in {iterations} iterations, best residuals {residuals:?}")]
    NotConverged { iterations: usize, residuals: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point ({x}, {y}) is not in a fluid triangle")]
    Outside { x: f64, y: f64 },

    #[error("point location failed at {} nodes, first at {:?}", .nodes.len(), .first)]
    Location { nodes: Vec<usize>, first: [f64; 2] },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("rate fit error: {0}")]
    Fit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
