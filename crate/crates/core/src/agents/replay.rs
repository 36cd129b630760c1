//! A flat, matrix-backed view over a logged dataset for minibatch sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::AgentError;
use crate::data::{Action, DoneKind, Observation, OfflineDataset};
use crate::nn::Mat;

pub(crate) fn encode_obs_into(obs: &Observation, out: &mut [f64]) -> Result<(), AgentError> {
    let dim = out.len();
    match obs {
        Observation::Vector(v) => {
            if v.len() != dim {
                return Err(AgentError::DimensionMismatch {
                    what: "observation",
                    expected: dim,
                    got: v.len(),
                });
            }
            out.copy_from_slice(v);
        }
        // Discrete indices are one-hot encoded so tabular data can feed the
        // same networks.
        Observation::Discrete(i) => {
            if *i >= dim {
                return Err(AgentError::DimensionMismatch { what: "observation index", expected: dim, got: *i });
            }
            out.fill(0.0);
            out[*i] = 1.0;
        }
    }
    Ok(())
}

pub(crate) fn encode_act_into(act: &Action, out: &mut [f64]) -> Result<(), AgentError> {
    let dim = out.len();
    match act {
        Action::Vector(v) => {
            if v.len() != dim {
                return Err(AgentError::DimensionMismatch { what: "action", expected: dim, got: v.len() });
            }
            out.copy_from_slice(v);
        }
        Action::Discrete(i) => {
            if *i >= dim {
                return Err(AgentError::DimensionMismatch { what: "action index", expected: dim, got: *i });
            }
            out.fill(0.0);
            out[*i] = 1.0;
        }
    }
    Ok(())
}

/// Every transition of a dataset flattened into row-aligned matrices, with
/// per-step return annotations carried alongside when present.
#[derive(Debug, Clone)]
pub struct ReplayView {
    pub obs: Mat,
    pub act: Mat,
    pub rewards: Vec<f64>,
    pub next_obs: Mat,
    pub done: Vec<DoneKind>,
    pub rtg: Vec<Option<f64>>,
    pub soft_rtg: Vec<Option<f64>>,
}

impl ReplayView {
    pub fn from_dataset(ds: &OfflineDataset, obs_dim: usize, act_dim: usize) -> Result<Self, AgentError> {
        let n = ds.num_transitions();
        if n == 0 {
            return Err(AgentError::EmptyReplay);
        }
        let mut obs = Mat::zeros(n, obs_dim);
        let mut act = Mat::zeros(n, act_dim);
        let mut next_obs = Mat::zeros(n, obs_dim);
        let mut rewards = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        let mut rtg = vec![None; n];
        let mut soft_rtg = vec![None; n];
        let mut row = 0usize;
        for (ti, traj) in ds.trajectories.iter().enumerate() {
            for (si, tr) in traj.transitions().iter().enumerate() {
                encode_obs_into(&tr.state, obs.row_mut(row))?;
                encode_act_into(&tr.action, act.row_mut(row))?;
                encode_obs_into(&tr.next_state, next_obs.row_mut(row))?;
                rewards.push(tr.reward);
                done.push(tr.done_kind);
                if let Some(ann) = &ds.annotations {
                    let step = &ann.per_step[ti][si];
                    rtg[row] = step.rtg;
                    soft_rtg[row] = step.soft_rtg;
                }
                row += 1;
            }
        }
        Ok(ReplayView { obs, act, rewards, next_obs, done, rtg, soft_rtg })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Rows that carry the annotation a supervised critic regresses on.
    pub fn annotated_indices(&self, soft: bool) -> Vec<usize> {
        let src = if soft { &self.soft_rtg } else { &self.rtg };
        (0..self.len()).filter(|&i| src[i].is_some()).collect()
    }

    /// Uniform sample with replacement from the whole view.
    pub fn sample_indices(&self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..batch).map(|_| rng.random_range(0..self.len())).collect()
    }

    /// Uniform sample with replacement restricted to the given rows.
    pub fn sample_from(&self, pool: &[usize], batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(!pool.is_empty(), "sampling from an empty index pool");
        (0..batch).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let b = idx.len();
        let mut obs = Mat::zeros(b, self.obs.cols);
        let mut act = Mat::zeros(b, self.act.cols);
        let mut next_obs = Mat::zeros(b, self.next_obs.cols);
        let mut rewards = Vec::with_capacity(b);
        let mut done = Vec::with_capacity(b);
        let mut rtg = Vec::with_capacity(b);
        let mut soft_rtg = Vec::with_capacity(b);
        for (r, &i) in idx.iter().enumerate() {
            obs.row_mut(r).copy_from_slice(self.obs.row(i));
            act.row_mut(r).copy_from_slice(self.act.row(i));
            next_obs.row_mut(r).copy_from_slice(self.next_obs.row(i));
            rewards.push(self.rewards[i]);
            done.push(self.done[i]);
            rtg.push(self.rtg[i]);
            soft_rtg.push(self.soft_rtg[i]);
        }
        Batch { obs, act, rewards, next_obs, done, rtg, soft_rtg }
    }
}

/// One gathered minibatch, rows aligned across all fields.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Mat,
    pub act: Mat,
    pub rewards: Vec<f64>,
    pub next_obs: Mat,
    pub done: Vec<DoneKind>,
    pub rtg: Vec<Option<f64>>,
    pub soft_rtg: Vec<Option<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}
