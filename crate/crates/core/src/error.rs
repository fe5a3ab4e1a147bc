use thiserror::Error;

pub type Result<T, E = CoxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoxError {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{field} {message}, row {row}")]
    Validation {
        field: &'static str,
        row: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset has no observed events")]
    NoEvents,

    #[error("no subjects at risk at t = {0}")]
    EmptyRiskSet(f64),

    #[error("partial likelihood overflowed (non-finite value); consider rescaling covariates")]
    Overflow,

    #[error("information singular (check collinearity or separation)")]
    SingularInformation,

    #[error("coordinate {0} is separated (monotone likelihood); use CI inversion with infinite bounds")]
    Separated(usize),

    #[error("fit did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("CI bound not bracketable")]
    NotBracketable,

    #[error("all eigen-weights are zero")]
    ZeroWeights,
}

impl CoxError {
    /// True for errors caused by the user's input file or arguments rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            CoxError::Parse { .. }
                | CoxError::Validation { .. }
                | CoxError::Io { .. }
                | CoxError::InvalidArgument(_)
        )
    }
}
