use thiserror::Error;

/// Errors raised by the algebra, embedding, model and training layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operands disagree on channel count, depth, or array length.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Depth above the configured cap.
    #[error("depth {depth} exceeds the configured maximum {max}")]
    DepthCap { depth: usize, max: usize },

    /// Projection onto the Lyndon basis left a residual.
    #[error("tensor is not a Lie element: level {level} residual {residual:e}")]
    NotLie { level: usize, residual: f64 },

    /// Malformed query interval or partition.
    #[error("invalid interval: {0}")]
    Interval(String),

    /// Stream or continuous-channel description violates its invariants.
    #[error("invalid stream: {0}")]
    Stream(String),

    /// Path is not a well-formed realization.
    #[error("not a realization: {0}")]
    NotRealization(String),

    /// Requested a feature outside what the operation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// NaN or infinity met while computing.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A loss over a batch whose mask is all zero.
    #[error("degenerate batch: mask has no valid entries")]
    DegenerateBatch,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by numerics rather than input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NotLie { .. })
    }
}
