use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{threshold:e}")]
    NotPsd { min_eigenvalue: f64, threshold: f64 },

    #[error("map is not completely positive: Choi eigenvalue {min_eigenvalue:e} below -{threshold:e}")]
    NotCp { min_eigenvalue: f64, threshold: f64 },

    #[error("value leaves the algebra: residual {residual:e} (allowed {allowed:e})")]
    NotBValued { residual: f64, allowed: f64 },

    #[error("operators do not form a module over the algebra: {what} residual {residual:e}")]
    NotABModule { what: &'static str, residual: f64 },

    #[error("module invariant violated: {what} residual {residual:e}")]
    ModuleInvariant { what: &'static str, residual: f64 },

    #[error("representation is not well defined: {0}")]
    NotWellDefined(String),

    #[error("functional is not well defined: residual {residual:e} (allowed {allowed:e})")]
    InvalidFunctional { residual: f64, allowed: f64 },

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("algebra closure did not stabilize after {passes} passes")]
    ClosureDidNotConverge { passes: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error ({invariant}): {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant,
            detail: detail.into(),
        }
    }
}
