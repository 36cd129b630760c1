//! Agent hyperparameters and the pretraining schedule.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::returns::TimeoutMode;

/// The off-policy improvement operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Deterministic actor, twin critics with clipped double-Q targets,
    /// target-action smoothing, delayed policy updates, and a
    /// behavior-cloning anchor scaled to the critic's magnitude.
    Td3Bc,
    /// Stochastic tanh-Gaussian actor against the minimum of a critic
    /// ensemble, with entropy regularization in both target and actor loss.
    EnsembleSoftAc,
}

/// Optional critic-side regularizer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ValueRegularizer {
    #[default]
    None,
    /// Penalizes out-of-distribution action values:
    /// `t * E_s[LSE_k(Q(s, a_k)/t)] - E[Q(s, a_data)]` over uniformly drawn
    /// actions. `temperature` below 1e-12 switches to the hard-max form.
    Cql { weight: f64, n_actions: usize, temperature: f64 },
    /// Penalizes aligned per-sample action gradients across ensemble
    /// members (mean pairwise cosine similarity, normalizers detached).
    Diversify { eta: f64 },
}

/// How the actor is pre-trained on the logged actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BcMode {
    /// Squared error between the squashed mean action and the logged action.
    Hard,
    /// Maximum likelihood with an entropy bonus:
    /// `E[temperature * logpi(a~|s) - logpi(a|s)]`, `a~` reparameterized.
    Soft { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
    pub layer_norm: bool,
    pub gamma: f64,
    /// Target-network retention: `target <- tau * target + (1 - tau) * online`.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub n_critics: usize,
    /// Actor (and target) updates happen every this many critic updates.
    pub policy_delay: usize,
    /// Std of the smoothing noise added to target actions.
    pub target_noise: f64,
    pub noise_clip: f64,
    /// Behavior-cloning anchor strength. For the deterministic algorithm the
    /// actor loss is `-(bc_alpha / mean|Q|) * Q + ||pi(s) - a||^2`; for the
    /// stochastic one with `bc_anchor` set it weighs the cloning term in the
    /// magnitude-normalized combination.
    pub bc_alpha: f64,
    /// Entropy temperature for the stochastic algorithm.
    pub entropy_alpha: f64,
    /// Adds a behavior-cloning term to the stochastic actor loss (the
    /// deterministic algorithm always carries its anchor).
    pub bc_anchor: bool,
    pub value_regularizer: ValueRegularizer,
}

impl AgentConfig {
    pub fn hard(obs_dim: usize, act_dim: usize) -> Self {
        AgentConfig {
            algorithm: Algorithm::Td3Bc,
            obs_dim,
            act_dim,
            hidden: vec![64, 64],
            layer_norm: true,
            gamma: 0.99,
            tau: 0.995,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            batch_size: 128,
            n_critics: 2,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            bc_alpha: 2.5,
            entropy_alpha: 0.0,
            bc_anchor: true,
            value_regularizer: ValueRegularizer::None,
        }
    }

    pub fn soft(obs_dim: usize, act_dim: usize) -> Self {
        AgentConfig {
            algorithm: Algorithm::EnsembleSoftAc,
            policy_delay: 1,
            entropy_alpha: 0.2,
            bc_anchor: false,
            ..Self::hard(obs_dim, act_dim)
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let mut problems: Vec<&str> = Vec::new();
        if self.obs_dim == 0 || self.act_dim == 0 {
            problems.push("zero observation or action dimension");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            problems.push("gamma outside (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            problems.push("tau outside [0, 1]");
        }
        if self.actor_lr <= 0.0 || self.critic_lr <= 0.0 {
            problems.push("non-positive learning rate");
        }
        if self.batch_size == 0 {
            problems.push("zero batch size");
        }
        if self.n_critics < 2 {
            problems.push("need at least two critics for clipped/ensemble targets");
        }
        if self.policy_delay == 0 {
            problems.push("policy_delay must be at least 1");
        }
        if self.target_noise < 0.0 || self.noise_clip < 0.0 {
            problems.push("negative target smoothing settings");
        }
        if self.entropy_alpha < 0.0 {
            problems.push("negative entropy temperature");
        }
        match self.value_regularizer {
            ValueRegularizer::Cql { weight, n_actions, temperature } => {
                if weight < 0.0 || n_actions == 0 || temperature < 0.0 {
                    problems.push("bad out-of-distribution penalty settings");
                }
            }
            ValueRegularizer::Diversify { eta } => {
                if eta < 0.0 {
                    problems.push("negative diversity weight");
                }
            }
            ValueRegularizer::None => {}
        }
        if let Some(p) = problems.first() {
            return Err(AgentError::BadConfig(p.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Supervised actor steps before anything else.
    pub actor_steps: usize,
    /// Supervised critic steps after the actor phase (0 disables, as does
    /// `pretrain_critic: false`).
    pub critic_steps: usize,
    pub pretrain_critic: bool,
    /// Blend between the observed return (0) and the one-step bootstrapped
    /// target (1) during critic pretraining.
    pub lambda_mix: f64,
    pub bc_mode: BcMode,
    pub timeout_mode: TimeoutMode,
    /// Relative improvement threshold for early phase exit; 0 disables. A
    /// phase stops when `mean(previous window) - mean(last window)` falls
    /// below `plateau_tol * max(|mean(previous window)|, 1e-3)`.
    pub plateau_tol: f64,
    pub plateau_window: usize,
    /// Critic-side penalty applied during supervised critic pretraining,
    /// independent of the one used in the improvement phase.
    pub value_regularizer: ValueRegularizer,
}

impl PretrainConfig {
    pub fn new(actor_steps: usize, critic_steps: usize) -> Self {
        PretrainConfig {
            actor_steps,
            critic_steps,
            pretrain_critic: critic_steps > 0,
            lambda_mix: 0.0,
            bc_mode: BcMode::Hard,
            timeout_mode: TimeoutMode::TreatAsTerminal,
            plateau_tol: 0.0,
            plateau_window: 500,
            value_regularizer: ValueRegularizer::None,
        }
    }

    /// No pretraining at all: straight to off-policy improvement.
    pub fn none() -> Self {
        Self::new(0, 0)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(AgentError::BadConfig("lambda_mix outside [0, 1]".into()));
        }
        if let BcMode::Soft { temperature } = self.bc_mode {
            if temperature < 0.0 {
                return Err(AgentError::BadConfig("negative cloning temperature".into()));
            }
        }
        if self.plateau_tol < 0.0 {
            return Err(AgentError::BadConfig("negative plateau tolerance".into()));
        }
        if self.plateau_tol > 0.0 && self.plateau_window == 0 {
            return Err(AgentError::BadConfig("plateau checks need a window".into()));
        }
        match self.value_regularizer {
            ValueRegularizer::Cql { weight, n_actions, temperature } => {
                if weight < 0.0 || n_actions == 0 || temperature < 0.0 {
                    return Err(AgentError::BadConfig(
                        "bad out-of-distribution penalty settings".into(),
                    ));
                }
            }
            ValueRegularizer::Diversify { eta } => {
                if eta < 0.0 {
                    return Err(AgentError::BadConfig("negative diversity weight".into()));
                }
            }
            ValueRegularizer::None => {}
        }
        Ok(())
    }
}

/// Per-step losses, populated according to what the step actually computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub actor: Option<f64>,
    pub critic: Option<f64>,
    pub bc: Option<f64>,
    pub cql: Option<f64>,
    pub diversity: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_configs_validate() {
        AgentConfig::hard(2, 1).validate().unwrap();
        AgentConfig::soft(4, 2).validate().unwrap();
        PretrainConfig::new(1000, 1000).validate().unwrap();
        PretrainConfig::none().validate().unwrap();
    }

    #[test]
    fn bad_settings_are_rejected() {
        let mut cfg = AgentConfig::hard(2, 1);
        cfg.n_critics = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = AgentConfig::hard(2, 1);
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_err());
        let mut pre = PretrainConfig::new(10, 10);
        pre.lambda_mix = 1.5;
        assert!(pre.validate().is_err());
    }

    #[test]
    fn config_serialization_roundtrips() {
        let mut cfg = AgentConfig::soft(4, 2);
        cfg.value_regularizer = ValueRegularizer::Cql { weight: 1.0, n_actions: 10, temperature: 1.0 };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: AgentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
