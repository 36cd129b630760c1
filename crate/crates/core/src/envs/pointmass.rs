//! A bounded-acceleration point mass that must park at the origin.
//!
//! State is `(position, velocity)` per dimension, action is acceleration
//! clipped to `[-1, 1]` per dimension. The dense reward is
//! `-|position - goal| - 0.01 * |action|^2`; the sparse variant pays 1 only at
//! the goal. Episodes terminate when the mass is inside the goal radius and
//! nearly stopped, and time out at `timeout_limit` steps otherwise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rollout::Environment;
use super::EnvError;
use crate::data::{Action, DoneKind, Observation};

pub const DT: f64 = 0.1;
pub const GOAL_RADIUS: f64 = 0.05;
pub const GOAL_SPEED: f64 = 0.15;
pub const START_OFFSET: f64 = -1.0;
pub const ACTION_COST: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DynamicsKind {
    PointMass { dim: usize, sparse: bool },
}

/// A fully-serializable description of a continuous control task. The
/// dynamics are deterministic; randomness enters only through the initial
/// state, scaled by `init_noise_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousEnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub kind: DynamicsKind,
    pub timeout_limit: usize,
    pub init_noise_scale: f64,
}

impl ContinuousEnvSpec {
    pub fn env(&self) -> ContinuousEnv {
        ContinuousEnv { spec: self.clone(), state: vec![0.0; self.obs_dim], t: 0 }
    }
}

/// Builds the point-mass spec for `dim` spatial dimensions (observation is
/// position then velocity per dimension).
pub fn pointmass_env(dim: usize, sparse: bool) -> Result<ContinuousEnvSpec, EnvError> {
    if dim == 0 || dim > 2 {
        return Err(EnvError::BadParameter(format!("pointmass dim must be 1 or 2, got {dim}")));
    }
    let suffix = if sparse { "-sparse" } else { "" };
    Ok(ContinuousEnvSpec {
        name: format!("pointmass{dim}{suffix}"),
        obs_dim: 2 * dim,
        act_dim: dim,
        kind: DynamicsKind::PointMass { dim, sparse },
        timeout_limit: 80,
        init_noise_scale: 0.2,
    })
}

#[derive(Debug, Clone)]
pub struct ContinuousEnv {
    pub spec: ContinuousEnvSpec,
    state: Vec<f64>,
    t: usize,
}

impl ContinuousEnv {
    fn dim(&self) -> usize {
        let DynamicsKind::PointMass { dim, .. } = self.spec.kind;
        dim
    }

    fn sparse(&self) -> bool {
        let DynamicsKind::PointMass { sparse, .. } = self.spec.kind;
        sparse
    }

    /// Distance to goal and speed of an observation vector.
    fn dist_speed(state: &[f64], dim: usize) -> (f64, f64) {
        let dist = state[..dim].iter().map(|p| p * p).sum::<f64>().sqrt();
        let speed = state[dim..].iter().map(|v| v * v).sum::<f64>().sqrt();
        (dist, speed)
    }
}

impl Environment for ContinuousEnv {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Observation {
        let dim = self.dim();
        let mut state = vec![0.0; 2 * dim];
        for p in state.iter_mut().take(dim) {
            let z: f64 = rng.sample(StandardNormal);
            *p = START_OFFSET + self.spec.init_noise_scale * z;
        }
        self.state = state.clone();
        self.t = 0;
        Observation::Vector(state)
    }

    fn step(
        &mut self,
        action: &Action,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(Observation, f64, DoneKind), EnvError> {
        let dim = self.dim();
        let a = action.as_vector().ok_or(EnvError::BadAction)?;
        if a.len() != dim || a.iter().any(|x| !x.is_finite()) {
            return Err(EnvError::BadAction);
        }
        let mut next = self.state.clone();
        let mut action_sq = 0.0;
        for d in 0..dim {
            let acc = a[d].clamp(-1.0, 1.0);
            action_sq += acc * acc;
            next[dim + d] += DT * acc; // semi-implicit Euler
            next[d] += DT * next[dim + d];
        }
        let (dist, speed) = Self::dist_speed(&next, dim);
        let at_goal = dist <= GOAL_RADIUS && speed <= GOAL_SPEED;
        let reward = if self.sparse() {
            if at_goal {
                1.0
            } else {
                0.0
            }
        } else {
            -dist - ACTION_COST * action_sq
        };
        self.t += 1;
        self.state = next.clone();
        let done = if at_goal {
            DoneKind::Termination
        } else if self.t >= self.spec.timeout_limit {
            DoneKind::Timeout
        } else {
            DoneKind::NotDone
        };
        Ok((Observation::Vector(next), reward, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_action_at_rest_on_goal_terminates_with_zero_dense_reward() {
        let spec = pointmass_env(1, false).unwrap();
        let mut env = spec.env();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        env.state = vec![0.0, 0.0];
        let (obs, reward, done) = env.step(&Action::Vector(vec![0.0]), &mut rng).unwrap();
        assert_eq!(obs, Observation::Vector(vec![0.0, 0.0]));
        assert_eq!(reward, 0.0);
        assert_eq!(done, DoneKind::Termination);
    }

    #[test]
    fn idle_far_from_goal_times_out_at_the_limit() {
        let spec = pointmass_env(1, false).unwrap();
        let mut env = spec.env();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        let mut steps = 0;
        loop {
            let (_, _, done) = env.step(&Action::Vector(vec![0.0]), &mut rng).unwrap();
            steps += 1;
            match done {
                DoneKind::NotDone => continue,
                DoneKind::Timeout => break,
                DoneKind::Termination => panic!("idling should never reach the goal"),
            }
        }
        assert_eq!(steps, spec.timeout_limit);
    }

    #[test]
    fn sparse_variant_pays_only_at_goal() {
        let spec = pointmass_env(1, true).unwrap();
        let mut env = spec.env();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(&mut rng);
        let (_, r, _) = env.step(&Action::Vector(vec![0.0]), &mut rng).unwrap();
        assert_eq!(r, 0.0);
        env.state = vec![0.0, 0.0];
        let (_, r, done) = env.step(&Action::Vector(vec![0.0]), &mut rng).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(done, DoneKind::Termination);
    }

    #[test]
    fn rejects_wrong_arity_actions() {
        let spec = pointmass_env(2, false).unwrap();
        let mut env = spec.env();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng);
        assert!(env.step(&Action::Vector(vec![0.0]), &mut rng).is_err());
        assert!(env.step(&Action::Discrete(0), &mut rng).is_err());
    }
}
