//! Offline actor-critic agents: a shared network container, supervised
//! pretraining phases for both actor and critic, two improvement operators
//! (deterministic with a cloning anchor, stochastic against an ensemble
//! minimum), and optional critic regularizers.

mod actor_critic;
mod bc;
mod combine;
mod config;
mod cql;
mod critic_pretrain;
mod ensemble;
mod orchestrate;
mod replay;
mod td3bc;

pub use actor_critic::{ActorCritic, GreedyPolicy, StochasticPolicy};
pub use bc::{actor_pretrain_step, bc_loss_and_grads};
pub use combine::{normalize_and_combine, LossTerm};
pub use config::{AgentConfig, Algorithm, BcMode, LossReport, PretrainConfig, ValueRegularizer};
pub use cql::{cql_penalty, cql_penalty_with_actions, CqlPenalty};
pub use critic_pretrain::critic_pretrain_step;
pub use ensemble::{diversity_penalty, soft_ac_step};
pub use orchestrate::{pretrain_then_train, Phase, TrainEvent};
pub use replay::{Batch, ReplayView};
pub use td3bc::{td3_targets, td3bc_step};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("network failure: {0}")]
    Nn(#[from] crate::nn::NnError),
    #[error("data failure: {0}")]
    Data(#[from] crate::data::DataError),
    #[error("return computation failed: {0}")]
    Return(#[from] crate::returns::ReturnError),
    #[error("environment failure: {0}")]
    Env(#[from] crate::envs::EnvError),
    #[error("bad agent configuration: {0}")]
    BadConfig(String),
    #[error("{what} has size {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("dataset has no transitions")]
    EmptyReplay,
    #[error("no annotated steps to regress on (were all trajectories excluded?)")]
    NoAnnotatedSteps,
    #[error("checkpoint rejected: {0}")]
    BadCheckpoint(String),
}
