use thiserror::Error;

/// Errors raised across the fitting pipeline.
#[derive(Debug, Error)]
pub enum TgarmaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("optimizer did not converge after {iterations} iterations (best log-density {best_value})")]
    NoConvergence {
        iterations: usize,
        best: Vec<f64>,
        best_value: f64,
    },

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl TgarmaError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TgarmaError::Config(_) => 2,
            TgarmaError::Data { .. } | TgarmaError::Io(_) => 3,
            _ => 4,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            TgarmaError::Domain(_) => "domain",
            TgarmaError::Dimension(_) => "dimension",
            TgarmaError::Numeric(_) => "numeric",
            TgarmaError::NoConvergence { .. } => "no_convergence",
            TgarmaError::Sampler(_) => "sampler",
            TgarmaError::Data { .. } => "data",
            TgarmaError::Config(_) => "config",
            TgarmaError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, TgarmaError>;
