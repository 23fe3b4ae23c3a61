use thiserror::Error;

/// An argument outside a special function's domain.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{function}: argument {value} outside domain")]
pub struct DomainError {
    pub function: &'static str,
    pub value: f64,
}

impl DomainError {
    pub(crate) fn new(function: &'static str, value: f64) -> Self {
        Self { function, value }
    }
}
