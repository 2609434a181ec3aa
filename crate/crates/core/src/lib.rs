pub mod adversary;
pub mod cli;
pub mod error;
pub mod harness;
pub mod learner;
pub mod market_sim;
pub mod policy;
pub mod rng;
pub mod stage_game;
pub mod stats;

pub use error::{Error, Result};
