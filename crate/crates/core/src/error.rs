use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("combination weights sum to {sum}, expected 1 (within 1e-12)")]
    WeightSum { sum: f64 },

    #[error("steady-state denominator is {value}; step sizes are outside the stability region")]
    NonPositiveDenominator { value: f64 },

    #[error("config schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("config constraint violated at `{path}`: {message}")]
    Constraint { path: String, message: String },

    #[error("unknown builtin experiment `{0}`")]
    UnknownBuiltin(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn constraint(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Constraint {
            path: path.into(),
            message: message.into(),
        }
    }
}
