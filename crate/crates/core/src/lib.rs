//! Physical-layer key generation under a wait-then-attack injection
//! adversary, with per-round antenna-mode randomization as the defense.

pub mod adversary;
pub mod analysis;
pub mod antenna;
pub mod bitio;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod quantize;
pub mod randomness;
pub mod reconcile;
pub mod session;
pub mod special;
pub mod trace;

pub use error::{Error, Result};
