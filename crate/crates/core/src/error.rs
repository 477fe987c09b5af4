use thiserror::Error;

use crate::factorgraph::VariableId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("factor {factor} lists variable {variable} more than once in its scope")]
    DuplicateScopeVariable { factor: usize, variable: usize },

    #[error("variable {variable} has domain size {first} in one factor and {second} in another")]
    InconsistentDomain {
        variable: usize,
        first: usize,
        second: usize,
    },

    #[error("table index {index} out of range for factor {factor} with {len} entries")]
    IndexOutOfRange {
        factor: usize,
        index: usize,
        len: usize,
    },

    #[error("negative table value {value} in factor {factor}")]
    NegativeValue { factor: usize, value: f64 },

    #[error("variable ids must be dense in [0, {count}); id {missing} never occurs")]
    NonDenseIds { count: usize, missing: usize },

    #[error("variable {variable} has domain size {size}; at least 2 states are required")]
    DomainTooSmall { variable: usize, size: usize },

    #[error("measure has zero partition sum and cannot be normalized")]
    ZeroMeasure,

    #[error("domain size mismatch on variable {0}")]
    DomainMismatch(VariableId),

    #[error("scope mismatch: {0}")]
    ScopeMismatch(String),

    #[error("variable {0} is not in the scope")]
    UnknownVariable(VariableId),

    #[error("cannot build a bounding box of an empty point set")]
    EmptyPointSet,

    #[error("box scopes overlap on variable {0}")]
    OverlappingScopes(VariableId),

    #[error("{what} needs {needed} units of work, above the limit of {limit}")]
    CapacityExceeded {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
