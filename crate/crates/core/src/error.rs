use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the regulation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: String,
        found: String,
    },

    #[error("unsupported order {0}: discretization is only available for first-order models")]
    UnsupportedOrder(usize),

    #[error("order {order} is inconsistent with P2: {reason}")]
    OrderMismatch { order: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error(
        "resolvent (λI - A) is singular at λ = {lambda}: reciprocal condition estimate {rcond:.3e}"
    )]
    ResolventSingular { lambda: Complex64, rcond: f64 },

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("eigenvalue iteration failed to converge for a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("structural check failed: {0}")]
    Structure(String),

    #[error("no stable gain found in sweep:\n{table}")]
    NoStableGain { table: String },

    #[error("step size dt = {dt} exceeds the guard {max} for the highest signal frequency")]
    StepGuard { dt: f64, max: f64 },

    #[error("decay rate undefined: error stays below the noise floor {floor:.3e}")]
    UndefinedRate { floor: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(
        field: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::Dimension {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
