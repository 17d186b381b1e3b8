use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: component {index} = {value} has no real power {exponent}")]
    Domain {
        index: usize,
        value: f64,
        exponent: f64,
    },

    #[error("singular system: pivot {pivot} fell below the threshold")]
    SingularSystem { pivot: usize },

    #[error("negative component {index} = {value:e} before root extraction")]
    NegativePower { index: usize, value: f64 },

    #[error("index set became empty before convergence")]
    EmptyIndexSet,

    #[error("no feasible index set found")]
    Infeasible,

    #[error("oracle failed: {0}")]
    OracleFailure(String),

    #[error("tensor with (m, n) = ({order}, {dim}) needs {bytes} bytes, over the {budget} byte budget")]
    MemoryBudget {
        order: usize,
        dim: usize,
        bytes: u128,
        budget: u128,
    },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
