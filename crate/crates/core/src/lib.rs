//! Delay-aware content placement for device-to-device (D2D) caching networks.
//!
//! The crate estimates expected per-link file-transfer delays under Rayleigh
//! block fading, derives best-source tables from a caching state, and plans
//! cache contents with a greedy `<file, user>` pair selection that minimises
//! the weighted average delay. Baselines (most-popular caching and
//! exhaustive search), budgeted multi-cycle re-planning and a seeded
//! experiment runner are built on the same types.
//!
//! With the default `parallel` feature, link estimation, candidate scans,
//! exhaustive enumeration and sweep instances run on rayon. Results never
//! depend on the degree of parallelism.

pub mod baselines;
pub mod channel;
pub mod dynamic;
mod error;
pub mod experiments;
pub mod greedy;
pub mod io;
pub mod model;
mod par;
pub mod popularity;
pub mod rng;
pub mod source;

pub use error::{Error, Result};
pub use model::{
    CachingState, DelayMatrix, NodeId, PopularityMatrix, SourceTable, SystemConfig, Topology,
    UserPower, WeightVector,
};
