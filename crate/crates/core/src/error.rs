use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precision matrix is not positive definite for cell {cell:?}")]
    NotPositiveDefinite { cell: Vec<u32> },

    #[error("{cells} cells exceed the enumeration cap of {cap}")]
    EnumerationCap { cells: u128, cap: u128 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible graph specification: {0}")]
    Infeasible(String),

    #[error("graph rejection budget of {0} attempts exhausted")]
    RejectionBudget(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("response for {0} has a single class")]
    SingleClass(String),

    #[error("level {level} of discrete column {column} is never observed")]
    UnobservedLevel { column: String, level: u32 },

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("problem size {size} exceeds the reference solver cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("empty table")]
    EmptyTable,

    #[error("row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
