use thiserror::Error;

pub type Result<T> = std::result::Result<T, YmhdError>;

#[derive(Debug, Error)]
pub enum YmhdError {
    /// Shapes, groups or dimensions that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A value outside the domain of an operation (non-unit fiber point,
    /// non-tangent vector, radius too large, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// An iteration stopped before meeting its tolerance.
    #[error("{what} did not converge: residual {residual:.3e} after {iterations} iterations")]
    Convergence {
        what: String,
        residual: f64,
        iterations: usize,
    },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("format error in {source_name}: {msg}")]
    Format { source_name: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl YmhdError {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        YmhdError::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        YmhdError::Domain(msg.into())
    }
}
