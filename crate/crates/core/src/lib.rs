#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Busy-cycle area functionals of GI/GI/1 queues.
//!
//! Exact cycle simulation, Monte Carlo tail estimation and comparison with
//! closed-form asymptotics.

pub mod asymptotics;
pub mod cycle;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod quad;
pub mod rng;

pub use dist::{DistributionSpec, TailClass};
pub use error::{Error, Result};
pub use rng::RandomStream;
