//! Desk-scale offline reinforcement-learning laboratory.
//!
//! The crate is organized around a simple pipeline: scripted behavior policies
//! roll out in small environments ([`envs`]), the logged trajectories become
//! annotated offline datasets ([`data`], [`returns`]), and value functions are
//! fit to them either exactly ([`tabular`]) or with a small neural stack
//! ([`nn`]) driven by actor-critic agents that are supervised-pre-trained
//! before off-policy improvement ([`agents`]). The [`harness`] runs seeded
//! experiments and writes metrics for the command-line front end.

// Gradient kernels index several row-aligned buffers in lockstep; explicit
// indices keep those loops auditable against the math.
#![allow(clippy::needless_range_loop)]

pub mod agents;
pub mod data;
pub mod envs;
pub mod harness;
pub mod nn;
pub mod returns;
pub mod tabular;

pub use agents::{ActorCritic, AgentConfig, Algorithm, LossReport, PretrainConfig};
pub use data::{Action, DoneKind, Observation, OfflineDataset, Trajectory, Transition};
pub use envs::{BehaviorPolicySpec, ContinuousEnvSpec, TabularMdp};
pub use harness::{EvalReport, ExperimentConfig, MetricsRecord};
pub use nn::{MlpConfig, ParamTree};
pub use returns::{ReturnConfig, TimeoutMode, VisitMode};
pub use tabular::{FqiReport, InitStrategy, QTable};
