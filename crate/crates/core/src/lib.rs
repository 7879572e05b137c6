//! Three-party semi-honest secure computation over replicated secret shares,
//! driving a fixed-point transformer forward pass, plus the plaintext
//! reference engines, a command grammar and a kinematic UAV swarm simulator
//! used to evaluate it.

pub mod bench;
pub mod error;
pub mod net;
pub mod nn;
pub mod par;
pub mod plain;
pub mod proto;
pub mod ring;
pub mod sharing;
pub mod swarm;

pub use error::{Error, Result};
