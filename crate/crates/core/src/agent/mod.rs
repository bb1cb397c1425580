//! Per-SBS deep Q-learning: replay memory, epsilon-greedy control and the
//! temporal-difference update.

mod dqn;
mod replay;

pub use dqn::{record_width, td_loss_and_grad, AgentConfig, DqnAgent, TdStats};
pub use replay::{ReplayBuffer, Transition};
