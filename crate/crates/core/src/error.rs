use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{axis} grid has {grid} points but the array has {array} elements; the grid must be at least as large")]
    GridTooCoarse {
        axis: &'static str,
        grid: usize,
        array: usize,
    },

    #[error("phase-shift entry {index} has modulus {modulus}, expected 1")]
    NonUnitModulus { index: usize, modulus: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("least squares needs at least {unknowns} pilots, got {pilots}")]
    Underdetermined { pilots: usize, unknowns: usize },

    #[error("reference channel has zero energy")]
    ZeroChannel,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
