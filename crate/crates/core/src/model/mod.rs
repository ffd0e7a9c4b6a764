//! Domain types: kernels, mark and service laws, network models, event logs.

mod event;
mod kernel;
mod marks;
mod network;
mod service;

pub use event::{Event, EventKind, EventLog, PathSample, Snapshot};
pub use kernel::{kernel_l1, Kernel};
pub use marks::MarkDistribution;
pub use network::{
    stability_check, validate_network, ExcitationMode, NetworkModel, RateMap, ServiceSemantics,
    Stability,
};
pub use service::ServiceDistribution;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("divergent integral: power-law exponent {0} must exceed 1")]
    DivergentIntegral(f64),
    #[error("mark distribution must have positive support and finite mean: {0}")]
    NonpositiveMark(String),
    #[error("invalid service distribution: {0}")]
    InvalidService(String),
    #[error("coordinate {0} cannot reach a coordinate with positive departure rate")]
    UnreachableDeparture(usize),
    #[error("dimension mismatch in field `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("invalid rate map for coordinate {0}: {1}")]
    InvalidRateMap(usize, String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
