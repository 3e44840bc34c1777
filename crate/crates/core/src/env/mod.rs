//! Benchmark environments and the demonstrating expert.

pub mod expert;
pub mod gridworld;
pub mod hanoi;
pub mod random;

use crate::mdp::{Mdp, RewardWeights};

/// An environment ready for learning: the MDP, the true reward weights and
/// human-readable labels.
#[derive(Debug, Clone)]
pub struct BuiltEnv {
    pub mdp: Mdp,
    pub w_star: RewardWeights,
    pub state_labels: Vec<String>,
    pub action_labels: Vec<String>,
    pub default_horizon: usize,
}
