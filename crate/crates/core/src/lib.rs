//! Simulation and numerics for self-exciting birth-death processes.
//!
//! Three excitation modes share one model type: classical Hawkes (excitation
//! starts at arrival), delayed Hawkes (excitation starts at departure) and
//! ephemeral (excitation lasts while the particle is in the system).
//!
//! The crate provides
//! - two exact simulators: a branching-cluster engine ([`sim::cluster`]) and
//!   an intensity-thinning engine for routed networks ([`sim::thinning`]),
//! - transform numerics: the cluster fixed point and Volterra solvers
//!   ([`transform`]),
//! - moment ODEs and spectral closed forms for Markovian models ([`moments`]),
//! - cluster-size laws ([`cluster_stats`]),
//! - an experiment harness with its statistical utilities ([`experiments`]),
//! - JSON/CSV plumbing ([`io`]).

pub mod cluster_stats;
pub mod experiments;
pub mod io;
pub mod model;
pub mod moments;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod transform;

pub use model::{
    EventLog, ExcitationMode, Kernel, MarkDistribution, ModelError, NetworkModel, RateMap,
    ServiceDistribution, ServiceSemantics,
};
pub use rng::StreamKey;

/// Version of the JSON model/result schema.
pub const SCHEMA_VERSION: &str = "1";
