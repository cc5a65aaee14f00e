//! Q-learning principals that learn contract terms.
//!
//! A single principal learns the tax rate on a project run by a
//! best-responding agent; two principals compete (or collude, depending on
//! how their rewards are blended) for one agent's effort. The crate provides
//! the learning primitives, both economic environments, the run loops and
//! sweeps, and the file formats the command-line tool writes.

pub mod contract_dual;
pub mod contract_single;
pub mod error;
pub mod experiments;
pub mod persistence;
pub mod qcore;

pub use error::{Error, Result};
