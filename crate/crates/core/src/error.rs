use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("position x = {x} cm lies outside the slab [-{a}, {a}]")]
    OutsideDomain { x: f64, a: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("position x = {x} cm is not a grid node (spacing {spacing} cm)")]
    OffGrid { x: f64, spacing: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("tridiagonal factorization hit a zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("relative sensitivities need a nonzero response value")]
    ZeroResponse,

    #[error("correlation is undefined for a zero variance")]
    ZeroVariance,

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
