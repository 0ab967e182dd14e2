//! Non-stationary multi-armed bandits that restart exploration only on
//! significant shifts.
//!
//! * [`env`]: oblivious reward environments with exactly known means.
//! * [`ground_truth`]: significant shifts, safe sets and regret yardsticks.
//! * [`meta`]: the adaptive restart policy and its doubling wrapper.
//! * [`baselines`]: oracle, safe-set and uniform reference policies.
//! * [`harness`]: seeded trials, experiments, scaling fits, diagnostics.
//! * [`config`]: experiment configuration files.

pub mod arms;
pub mod baselines;
pub mod config;
pub mod env;
mod error;
pub mod ground_truth;
pub mod harness;
pub mod meta;
pub mod policy;
pub mod rng;

pub use arms::ArmSet;
pub use error::{Error, Result};
pub use policy::{Event, EventKind, Policy};
