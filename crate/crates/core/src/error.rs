//! Error type shared by every module of the crate.

/// Failures reported by mesh construction, discretization setup and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("boundary classification: {0}")]
    Boundary(String),
    #[error(
        "polynomial degree k = {0} is out of scope: the method needs k >= 2 \
         (the lowest-order variant is not stable)"
    )]
    Degree(usize),
    #[error("singular {0}")]
    Singular(String),
    #[error("negative curvature detected: p'Ap = {0:e} (operator is not SPD)")]
    NegativeCurvature(f64),
    #[error("non-finite residual at iteration {0}")]
    NotFinite(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("matrix market: {0}")]
    MatrixMarket(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
