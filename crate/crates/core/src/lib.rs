//! Decentralized transmission planning for slotted energy-harvesting networks
//! sharing a collision channel.
//!
//! An access point learns all battery levels only in SYNC slots and then hands
//! every node a non-stationary rule mapping its own battery level to a
//! transmission probability. Between SYNC slots the network is a
//! decentralized MDP solved over occupancy states; across SYNC slots an
//! average-reward MDP chains the windows together.

pub mod baseline;
pub mod bounds;
pub mod centralized;
pub mod config;
pub mod error;
pub mod external;
pub mod internal;
pub mod model;
pub mod occupancy;
pub mod reward;
pub mod simulator;
pub mod wcsp;

pub use error::{Error, Result};
