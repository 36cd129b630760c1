//! Small, fully-reproducible environments and the scripted behavior policies
//! used to generate offline datasets.

mod behavior;
mod mdp;
mod pointmass;
mod rollout;

pub use behavior::{
    scripted_behavior, scripted_behavior_tabular, BehaviorPolicySpec, EpsilonGreedyPolicy,
    PdControllerPolicy, PolicyKind, UniformContinuousPolicy, UniformDiscretePolicy,
};
pub use mdp::{
    motivational_mdp, random_tabular_mdp, solve_optimal_tabular, TabularEnvironment, TabularMdp,
    LEFT, RIGHT,
};
pub use pointmass::{pointmass_env, ContinuousEnv, ContinuousEnvSpec, DynamicsKind};
pub use rollout::{mean_return, rollout, Environment, Policy};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment parameter: {0}")]
    BadParameter(String),
    #[error("transition row for state {state}, action {action} sums to {sum}, expected 1")]
    BadTransitionRow { state: usize, action: usize, sum: f64 },
    #[error("policy kind {kind:?} does not apply to this environment family")]
    MismatchedPolicyKind { kind: behavior::PolicyKind },
    #[error("quality must lie in [0, 1], got {0}")]
    BadQuality(f64),
    #[error("value iteration stalled: residual {residual} above tolerance {tol} after {iters} iterations")]
    SolverStalled { residual: f64, tol: f64, iters: usize },
    #[error("action has wrong arity or family for this environment")]
    BadAction,
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}
