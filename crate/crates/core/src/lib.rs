//! Tree abstraction of a random wireless network: grid decomposition,
//! cut-based capacity regions, tree routing, the cooperating-cluster
//! message layer, and scaling-exponent experiments.

#![forbid(unsafe_code)]

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod regions;
pub mod routing;
pub mod scheme;
pub mod traffic;
pub mod treegraph;
pub mod util;

pub use error::{Error, Result};
