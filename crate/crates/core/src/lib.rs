//! Simulator of STAR-RIS-assisted two-BS downlink networks and a
//! multi-objective PPO trainer that trades coverage against capacity.

pub mod channel;
pub mod env;
pub mod error;
pub mod geometry;
pub mod moppo;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod starris;

pub use error::{CcoError, Result};
