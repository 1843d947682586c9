use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("tensor is not in V: leading p x p block of the vertical flattening is singular (cond = {cond:e})")]
    NotInV { cond: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("bounds table contradiction at ({m},{n}): lower {lower} > upper {upper} (lower by {lower_rule}, upper by {upper_rule})")]
    Contradiction {
        m: usize,
        n: usize,
        lower: usize,
        upper: usize,
        lower_rule: String,
        upper_rule: String,
    },

    #[error("invalid budget: {0}")]
    Budget(String),

    #[error("parse error in field `{field}`: {msg}")]
    Parse { field: String, msg: String },

    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            msg: err.to_string(),
        }
    }
}
