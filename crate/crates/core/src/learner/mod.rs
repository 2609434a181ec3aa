//! NAC-S(lambda): natural actor-critic with a compatible RBF critic trained
//! by semi-gradient SARSA(lambda), run for the market maker and, when the
//! adversary is strategic, for the adversary on the negated reward.

mod checkpoint;
mod critic;
mod reward;
mod train;

pub use checkpoint::{Checkpoint, CriticSnapshot, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use critic::{Critic, RbfGrid, StepRule};
pub use reward::{reward, RiskParams};
pub use train::{LogRow, TrainConfig, TrainOutcome, Trainer};
