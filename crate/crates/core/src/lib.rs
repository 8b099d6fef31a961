//! Bayesian persuasion treated as a bargaining problem over information.

pub mod agents;
pub mod bargaining;
pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod persuasion;
pub mod reduction;
pub mod rules;
pub mod scenarios;

pub use error::{Error, Result};
pub use model::{evaluate, ActionRule, PayoffPair, PersuasionTask, Role, SignalingScheme, Stochastic};
