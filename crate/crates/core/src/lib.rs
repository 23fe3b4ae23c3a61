//! Hierarchical binomial and beta-binomial models for evaluation scores,
//! with a NUTS sampler, convergence diagnostics and posterior comparison.
//!
//! `no_std` with `alloc`; file formats and the command line live in the
//! `hieval` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod compare;
pub mod dataset;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod gradient;
pub mod modelspec;
pub mod posterior;
pub mod sampler;
pub mod simulate;
pub mod special;
pub mod tape;

pub use dataset::{aggregate_cells, Cell, CellTable, EvalRecord, FactorIndex, ReasoningEffort};
pub use density::{
    build_layout, constrain, log_posterior, pointwise_log_lik, ConstrainedDraw, DensityError, ParameterLayout,
};
pub use error::DomainError;
pub use modelspec::{builtin_spec, validate_spec, LikelihoodFamily, ModelSpec, PriorSpec, SpecError};
