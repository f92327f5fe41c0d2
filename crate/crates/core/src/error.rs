use thiserror::Error;

use crate::io::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid domain {height}x{width}")]
    InvalidDomain { height: usize, width: usize },

    #[error("invalid stencil: {0}")]
    InvalidStencil(String),

    #[error("invalid relation map: {0}")]
    InvalidRelationMap(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("affinity matrix has no entries")]
    EmptyAffinity,

    #[error("matrix is not Hermitian at ({row}, {col})")]
    NotHermitian { row: usize, col: usize },

    #[error("pixel {pixel} has zero degree")]
    ZeroDegree { pixel: usize },

    #[error(
        "eigensolver did not converge within {applications} operator applications \
         (best residuals {residuals:?})"
    )]
    NotConverged {
        applications: usize,
        residuals: Vec<f64>,
    },

    #[error("dense eigensolver is limited to n <= {limit}, got n = {n}")]
    TooLargeForDense { n: usize, limit: usize },

    #[error("need at least {needed} eigenvectors, found {found}")]
    TooFewEigenvectors { needed: usize, found: usize },

    #[error("invalid ownership label between pixels {p} and {q}: {reason}")]
    InvalidOwnership {
        p: usize,
        q: usize,
        reason: &'static str,
    },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("shape {index} is fully occluded")]
    OccludedShape { index: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
