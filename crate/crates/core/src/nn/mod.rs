//! A small, fully deterministic neural stack: dense matrices, named
//! parameter trees, ReLU MLPs with optional per-layer normalization, a
//! hand-written reverse pass validated against finite differences, Adam,
//! target-network tracking, and a squashed-Gaussian policy head.

mod checkpoint;
mod gaussian;
mod mat;
mod mlp;
mod optim;
mod param;

pub use checkpoint::{
    load_snapshots, restore_params, save_snapshots, snapshot_params, AdamSnapshot, NestedArray,
    NetSnapshot,
};
pub use gaussian::{
    deterministic_action, entropy_estimate, log_prob_of, sample_squashed, sampled_action_grads,
    sampled_log_prob_grads, split_head, FixedLogProb, SampledAction, LOG_STD_MAX, LOG_STD_MIN,
    TANH_EPS,
};
pub use mat::Mat;
pub use mlp::{mlp_backward, mlp_forward, mlp_init, MlpConfig, Tape};
pub use optim::{polyak_update, Adam, AdamConfig};
pub use param::{ParamTree, TreeStamp};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { context: &'static str, expected: (usize, usize), got: (usize, usize) },
    #[error("parameter leaf {0} is missing")]
    MissingLeaf(String),
    #[error("{context}: the two trees hold different leaf sets")]
    LeafSetMismatch { context: &'static str },
    #[error(
        "tape recorded at {recorded:?} but parameters are at {current:?}; \
         re-run the forward pass after mutating parameters"
    )]
    StaleTape { recorded: param::TreeStamp, current: param::TreeStamp },
    #[error("gradient for leaf {leaf} is not finite")]
    NonFiniteGrad { leaf: String },
    #[error("bad network configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
