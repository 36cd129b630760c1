//! Scripted behavior policies for dataset generation.
//!
//! `quality` in `[0, 1]` interpolates from useless to expert. For the
//! point-mass family it scales the controller gains while `(1 - quality)`
//! scales additive Gaussian action noise, so a mediocre dataset comes from a
//! genuinely mediocre mean policy rather than an expert drowned in noise —
//! cloning it recovers roughly the behavior score, not the expert's. For
//! tabular MDPs, `quality = 1 - epsilon` of an epsilon-greedy policy around
//! the optimal action values.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mdp::TabularMdp;
use super::pointmass::ContinuousEnvSpec;
use super::rollout::Policy;
use super::EnvError;
use crate::data::{Action, Observation};
use crate::envs::solve_optimal_tabular;

/// Expert proportional and derivative gains for the point-mass controller.
pub const KP: f64 = 2.0;
pub const KD: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// PD goal controller with quality-scaled gains and noise (continuous).
    ScriptedProportional,
    /// Epsilon-greedy around the optimal tabular values, epsilon = 1 - quality.
    EpsilonGreedyTabular,
    /// Full-gain controller with fixed additive noise of `noise_scale` std.
    NoisyExpert,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicySpec {
    pub kind: PolicyKind,
    pub quality: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl BehaviorPolicySpec {
    pub fn scripted(quality: f64) -> Self {
        BehaviorPolicySpec {
            kind: PolicyKind::ScriptedProportional,
            quality,
            noise_scale: 0.4,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        if !(0.0..=1.0).contains(&self.quality) {
            return Err(EnvError::BadQuality(self.quality));
        }
        if self.noise_scale < 0.0 {
            return Err(EnvError::BadParameter("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// PD controller toward the origin with additive Gaussian exploration noise.
#[derive(Debug, Clone)]
pub struct PdControllerPolicy {
    pub dim: usize,
    pub kp: f64,
    pub kd: f64,
    pub noise_std: f64,
}

impl Policy for PdControllerPolicy {
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        let s = obs.as_vector().expect("PD controller needs vector observations");
        let mut a = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let mut u = self.kp * (0.0 - s[d]) + self.kd * (0.0 - s[self.dim + d]);
            if self.noise_std > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                u += self.noise_std * z;
            }
            a.push(u.clamp(-1.0, 1.0));
        }
        Action::Vector(a)
    }
}

/// Epsilon-greedy over a fixed table of action values, restricted to the
/// actions available in each state.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyPolicy {
    pub values: Vec<Vec<f64>>,
    pub available: Vec<Vec<bool>>,
    pub epsilon: f64,
}

impl Policy for EpsilonGreedyPolicy {
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        let s = obs.as_discrete().expect("tabular policy needs discrete observations");
        let avail: Vec<usize> =
            (0..self.available[s].len()).filter(|&a| self.available[s][a]).collect();
        let explore = self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon;
        let choice = if explore {
            avail[rng.random_range(0..avail.len())]
        } else {
            *avail
                .iter()
                .max_by(|&&a, &&b| self.values[s][a].total_cmp(&self.values[s][b]))
                .expect("every state has an available action")
        };
        Action::Discrete(choice)
    }
}

/// Uniform random continuous policy in `[-1, 1]^act_dim` (the scoring floor).
#[derive(Debug, Clone, Copy)]
pub struct UniformContinuousPolicy {
    pub act_dim: usize,
}

impl Policy for UniformContinuousPolicy {
    fn act(&self, _obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        Action::Vector((0..self.act_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}

/// Uniform random choice among available discrete actions.
#[derive(Debug, Clone)]
pub struct UniformDiscretePolicy {
    pub available: Vec<Vec<bool>>,
}

impl Policy for UniformDiscretePolicy {
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        let s = obs.as_discrete().expect("tabular policy needs discrete observations");
        let avail: Vec<usize> =
            (0..self.available[s].len()).filter(|&a| self.available[s][a]).collect();
        Action::Discrete(avail[rng.random_range(0..avail.len())])
    }
}

/// Builds a continuous behavior policy from a spec. Quality 1 with
/// `ScriptedProportional` is the deterministic expert controller.
pub fn scripted_behavior(
    env: &ContinuousEnvSpec,
    spec: &BehaviorPolicySpec,
) -> Result<PdControllerPolicy, EnvError> {
    spec.validate()?;
    let dim = env.act_dim;
    match spec.kind {
        PolicyKind::ScriptedProportional => Ok(PdControllerPolicy {
            dim,
            kp: KP * spec.quality,
            kd: KD * spec.quality,
            noise_std: (1.0 - spec.quality) * spec.noise_scale,
        }),
        PolicyKind::NoisyExpert => {
            Ok(PdControllerPolicy { dim, kp: KP, kd: KD, noise_std: spec.noise_scale })
        }
        PolicyKind::EpsilonGreedyTabular => {
            Err(EnvError::MismatchedPolicyKind { kind: spec.kind })
        }
    }
}

/// Builds an epsilon-greedy policy around the optimal values of `mdp` at the
/// given discount, with `epsilon = 1 - quality`.
pub fn scripted_behavior_tabular(
    mdp: &TabularMdp,
    gamma: f64,
    spec: &BehaviorPolicySpec,
) -> Result<EpsilonGreedyPolicy, EnvError> {
    spec.validate()?;
    if spec.kind != PolicyKind::EpsilonGreedyTabular {
        return Err(EnvError::MismatchedPolicyKind { kind: spec.kind });
    }
    let optimal = solve_optimal_tabular(mdp, gamma, 1e-12)?;
    Ok(EpsilonGreedyPolicy {
        values: optimal.values,
        available: mdp.available.clone(),
        epsilon: 1.0 - spec.quality,
    })
}
