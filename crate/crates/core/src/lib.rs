//! Simulation and numerical-analysis toolkit for dynamic max-min fair (DMMF)
//! allocation of a single non-monetary resource over repeated rounds.
//!
//! The crate provides:
//!
//! - hidden-Markov value models with stationary analysis ([`value_model`]),
//! - ideal-utility computation for single-round and reusable demands ([`ideal`]),
//! - the DMMF mechanism itself, in single-round and reusable variants ([`mechanism`]),
//! - agent request strategies and adversarial blocking strategies ([`strategy`]),
//! - a deterministic, seedable episode simulator with pathwise invariant
//!   checks ([`sim`]),
//! - closed-form guarantee and impossibility coefficients ([`bounds`]),
//! - a small dense LP maximizer used by the reusable ideal-utility program ([`lp`]).
//!
//! Experiments are described by a TOML config (see [`config`]) and driven either
//! through the library API or the `dmmf` command-line binary.

pub mod bounds;
pub mod config;
pub mod ideal;
pub mod lp;
pub mod mechanism;
pub mod output;
pub mod rng;
pub mod sim;
pub mod strategy;
pub mod value_model;
