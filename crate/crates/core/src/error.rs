use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by mesh construction, discretization and the linear solve.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cell {cell} is not convex")]
    NonConvexCell { cell: usize },

    #[error("singular matrix in {context}")]
    SingularMatrix { context: String },

    #[error("insufficient quadrature order: rule exact to degree {have}, need {need}")]
    QuadratureOrder { have: usize, need: usize },

    #[error("boundary constraint rank {rank} on cell {cell} inconsistent with {boundary_edges} boundary edges (expected {expected})")]
    ConstraintRank {
        cell: usize,
        boundary_edges: usize,
        rank: usize,
        expected: usize,
    },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("matrix is not positive definite: p^T A p = {curvature:.3e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Process exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status for numerical failures (solver, factorization, mesh geometry).
pub const EXIT_SOLVER: i32 = 3;
/// Process exit status for file-system errors.
pub const EXIT_IO: i32 = 4;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Parse { .. } => EXIT_CONFIG,
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_SOLVER,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
