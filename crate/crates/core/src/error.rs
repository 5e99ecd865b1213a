use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("basis columns are linearly dependent (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("subspace basis and complement do not span the ambient space")]
    SingularComplement,

    #[error("probability {0} is outside (0, 1)")]
    InvalidProbability(f64),

    #[error("degrees of freedom must be at least 1")]
    InvalidDof,

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("point is not the projection of the given z (gap {gap:e})")]
    NotProjection { gap: f64 },

    #[error("piece {piece} has a singular matrix; the map is not a homeomorphism")]
    SingularPiece { piece: String },

    #[error("invalid conical subdivision: {0}")]
    InvalidSubdivision(String),

    #[error("point lies on a piece boundary in coordinates {coords:?}")]
    AmbiguousPiece { coords: Vec<usize> },

    #[error("too many pieces to enumerate ({switching} switching coordinates)")]
    TooManyPieces { switching: usize },

    #[error("normal map solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("singular linear system")]
    SingularSystem,

    #[error("Lemke's method ended on a secondary ray after {pivots} pivots")]
    RayTermination { pivots: usize },

    #[error("Lemke's method exceeded {pivots} pivots")]
    PivotLimit { pivots: usize },

    #[error("solution lies on a cell boundary in coordinates {coords:?}")]
    DegenerateSolution { coords: Vec<usize> },

    #[error("sample covariance is not positive definite: {0}")]
    CovarianceNotPd(Box<Error>),

    #[error("sample size {0} is too small")]
    SampleTooSmall(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
