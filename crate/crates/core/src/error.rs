use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mechanism parameters: {0}")]
    InvalidParams(String),

    #[error("label {label} outside [1, {num_labels}]")]
    LabelOutOfRange { label: usize, num_labels: usize },

    #[error("mechanism mismatch: expected {expected}, found {found}")]
    MechanismMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("subset has {found} members, expected {expected}")]
    SubsetSize { expected: usize, found: usize },

    #[error("label-space mismatch: subset over {found} labels, parameters over {expected}")]
    LabelSpaceMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("gradient {index} has norm {norm} above Lipschitz bound {bound}")]
    LipschitzViolated { index: usize, norm: f64, bound: f64 },

    #[error("output space of size {size} exceeds enumeration limit {limit}")]
    EnumerationGuard { size: f64, limit: f64 },

    #[error("vector lies {distance} away from the span of the basis")]
    NotInSpan { distance: f64 },

    #[error("coordinate l1 norm {norm} exceeds bound {bound}")]
    L1BoundViolated { norm: f64, bound: f64 },

    #[error("basis is not orthonormal (max Gram deviation {deviation})")]
    NotOrthonormal { deviation: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("dataset is empty")]
    EmptyData,

    #[error("vector norm {norm} outside the unit ball")]
    OutsideUnitBall { norm: f64 },

    #[error("invalid hard instance: {0}")]
    InvalidInstance(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
