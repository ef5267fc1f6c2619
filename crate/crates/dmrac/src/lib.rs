//! Simulation laboratory for deep model reference adaptive control.
//!
//! An uncertain plant tracks a stable linear reference model under a
//! total control law whose adaptive term is produced on two time scales:
//! the outer weights of a deep feature network adapt pointwise in time by
//! a projection-bounded update law, while the inner feature layers are
//! retrained in batches from a replay buffer of kernel-qualified samples.
//! Alongside the closed loop, calculators for the ultimate-bound radius,
//! generalization tolerance, and training sample complexity turn the
//! accompanying analysis into runnable numbers.

pub mod adaptive;
pub mod bounds;
pub mod buffer;
pub mod config;
pub mod deepnet;
pub mod error;
pub mod numerics;
pub mod oracles;
pub mod plant;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
