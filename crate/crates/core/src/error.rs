use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("volume is empty")]
    EmptyVolume,
    #[error("building footprint outside the grid: {0}")]
    FootprintOutsideGrid(String),
    #[error("window of size {window} does not fit a {rows}x{cols} image")]
    WindowTooLarge { window: usize, rows: usize, cols: usize },
    #[error("window size {0} must be odd")]
    EvenWindow(usize),
    #[error("covariance matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("loaded covariance matrix is singular; increase the diagonal loading")]
    SingularMatrix,
    #[error("model order {order} must satisfy 1 <= order < {n_images}")]
    InvalidModelOrder { order: usize, n_images: usize },
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
    #[error("solver diverged at iteration {iteration}: objective {objective:e} exceeds 10x the initial {initial:e}")]
    Divergence {
        iteration: usize,
        objective: f64,
        initial: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph construction error: {0}")]
    GraphConstruction(String),
    #[error("iteration index {k} must be < {n}")]
    InvalidIteration { k: usize, n: usize },
    #[error("elevation maps are defined on different grids")]
    GridMismatch,
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<gridcut_maxflow::Error> for Error {
    fn from(e: gridcut_maxflow::Error) -> Self {
        Error::GraphConstruction(e.to_string())
    }
}
