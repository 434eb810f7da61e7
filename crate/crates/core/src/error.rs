use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: String,
        found: String,
    },

    #[error("system matrix A is not Schur stable (spectral radius {0:.6})")]
    NotSchurStable(f64),

    #[error("structural assumption violated: {0}")]
    Structural(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("signal `{signal}` is not persistently exciting of order {order}: rank {rank} < {required}")]
    NotPersistentlyExciting {
        signal: String,
        order: usize,
        rank: usize,
        required: usize,
    },

    #[error("constraint block `{block}` is inconsistent (relative residual {residual:.3e})")]
    InfeasibleConstraints { block: String, residual: f64 },

    #[error("infeasible controller gain: {0}")]
    InfeasibleGain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ground truth required: {0}")]
    MissingGroundTruth(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dimension(field: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for configuration and input problems, 3 for infeasibility
    /// (excitation or gain conditions), 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPersistentlyExciting { .. }
            | Error::InfeasibleConstraints { .. }
            | Error::InfeasibleGain(_)
            | Error::Structural(_)
            | Error::NotSchurStable(_) => 3,
            Error::Numerical(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
