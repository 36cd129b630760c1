//! Exact tabular value learning: Monte-Carlo initialization, Q-learning
//! sweeps over a logged dataset, and fitted iteration with the exact Bellman
//! operator.

mod fqi;
mod qlearning;
mod qtable;
mod table1;

pub use fqi::{
    bellman_backup, fitted_q_iteration, fqi_init_sweep, FqiReport, NoiseInjection, SweepEntry,
};
pub use qlearning::{mc_initialize, q_learning_epoch, run_q_learning};
pub use qtable::{InitStrategy, QTable};
pub use table1::{
    convergence_grid, expected_grid, verify_grid, ConvergenceGrid, GridMismatch, N_EPOCHS,
    TRACKED_CELLS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("dataset has no return annotations; annotate it before Monte-Carlo initialization")]
    MissingAnnotations,
    #[error("annotation discount {annotated:?} does not match requested {requested}")]
    AnnotationGammaMismatch { annotated: Option<f64>, requested: f64 },
    #[error("dataset contains a non-discrete state or action; tabular methods need discrete data")]
    NonDiscreteData,
    #[error("state {state} or action {action} outside the table ({n_states} x {n_actions})")]
    OutOfRange { state: usize, action: usize, n_states: usize, n_actions: usize },
    #[error("learning rate must lie in (0, 1], got {0}")]
    BadLearningRate(f64),
    #[error("gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("fitted iteration with gamma = 1 has no contraction guarantee; use gamma < 1")]
    UndiscountedFqi,
    #[error("interpolation weight beta must lie in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("convergence threshold delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("init strategy needs a dataset but none was provided")]
    MissingDataset,
    #[error("table shape {got:?} does not match MDP shape {want:?}")]
    ShapeMismatch { got: (usize, usize), want: (usize, usize) },
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Return(#[from] crate::returns::ReturnError),
}
