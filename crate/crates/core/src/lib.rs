//! Combinatorial semi-bandit channel access.
//!
//! A receiver listens on `k_r` of `n` channels per time slot and learns which
//! channels to use from the losses it observes. The crate provides:
//!
//! - [`policy::AufhPolicy`]: exponential weights with adaptive per-channel
//!   exploration, in an enumerating reference form and a linear-time
//!   dynamic-programming form ([`sampler`])
//! - [`environment`]: stochastic, adversarial (oblivious and adaptive),
//!   mixed and contaminated loss generators
//! - [`baselines`]: CombUCB1, Thompson sampling, EXP3 over strategies and a
//!   mini-batching wrapper
//! - [`harness`]: repeated experiments, regret envelopes, timing benches and
//!   reproducible result files

pub mod baselines;
pub mod environment;
pub mod error;
pub mod harness;
pub mod policy;
pub mod sampler;
pub mod schedule;
pub mod types;

pub use error::{Error, Result};
pub use policy::{AufhPolicy, Backend, Policy, PolicyState, SimRng};
pub use schedule::{Exploration, LearningRate, Schedule};
pub use types::{CoveringSet, RegretTrace, Strategy, StrategySpace};
