//! Tabular Q-learning on deterministic gridworlds.
//!
//! Two learners share one episode loop: conventional one-step Q-learning and
//! a relative-reward variant whose TD target uses the larger of the current
//! and previous immediate rewards. Value iteration supplies the exact Q* that
//! learned tables are checked against, and [`harness`] runs seeded
//! comparisons of the two learners.

pub mod error;
pub mod gridworld;
pub mod harness;
pub mod learner;
pub mod oracle;
pub mod qtable;

pub use error::{Error, Result};
pub use gridworld::{
    enumerate_states, Action, GridDoc, GridSpec, RewardMode, Rewards, State, Transition,
};
pub use harness::{
    detect_convergence, load_config, run_comparison, run_experiment, Comparison, ExperimentConfig,
    RunSummary,
};
pub use learner::{
    discounted_return, greedy_path, run_episode, run_episode_observed, run_training,
    update_conventional, update_relative, AgentParams, Algorithm, EpisodeRecord, EpisodeResult,
    LearningCurve, RelativeMemory, Trainer, TrainingRun,
};
pub use oracle::{sup_norm_distance, value_iteration, BellmanResidual};
pub use qtable::{seeded_rng, QTable, Rng};
