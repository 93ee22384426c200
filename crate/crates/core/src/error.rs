use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("multi-index {index:?} out of range for axis {axis} (size {size})")]
    IndexError { axis: usize, index: Vec<usize>, size: usize },
    #[error("grid needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("function is not convex along axis {axis}: gradient drops at position {position}")]
    NotConvex { axis: usize, position: usize },
    #[error("supremum is unbounded")]
    Unbounded,
    #[error("action grid is empty")]
    NoActions,
    #[error("no conjugate available for this cost descriptor")]
    NoConjugate,
    #[error("modulus must be positive: {0}")]
    BadModulus(f64),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("enumeration budget exceeded: n = {0} > 24")]
    BudgetExceeded(usize),
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("invalid function values: {0}")]
    BadValues(String),
}

pub type Result<T> = std::result::Result<T, Error>;
