use thiserror::Error;

/// Errors produced by the estimator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample needs at least {required} points, got {found}")]
    TooFewPoints { required: usize, found: usize },

    #[error("row {row} contains a non-finite coordinate")]
    NonFinite { row: usize },

    #[error("duplicate sample points at rows {}", format_pairs(.0))]
    DuplicatePoints(Vec<(usize, usize)>),

    #[error("neighbour rank {k} out of range (1..={available})")]
    NeighborOutOfRange { k: usize, available: usize },

    #[error("exclusion count {n_discr} too large for a sample of {n_points} points")]
    ExclusionTooLarge { n_discr: usize, n_points: usize },

    #[error("kernel evaluated at zero displacement")]
    ZeroDisplacement,

    #[error("zero-norm dipole vector")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram binning mismatch: {0} vs {1} bins")]
    BinningMismatch(usize, usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}={b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
