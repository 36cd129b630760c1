//! The actor/critic-ensemble container shared by both improvement operators.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::AgentConfig;
use super::replay::encode_obs_into;
use super::AgentError;
use crate::data::{Action, Observation};
use crate::envs::Policy;
use crate::nn::{
    deterministic_action, mlp_forward, mlp_init, sample_squashed, save_snapshots, split_head,
    Adam, AdamConfig, Mat, MlpConfig, NetSnapshot, ParamTree, Tape,
};

/// A squashed-Gaussian actor, an ensemble of Q critics, their slow-moving
/// target copies, and per-network optimizer state. All sampling the agent
/// performs (minibatches, reparameterization noise, target smoothing) comes
/// from one owned ChaCha stream so training is a pure function of
/// `(config, seed, dataset)`.
#[derive(Debug)]
pub struct ActorCritic {
    pub cfg: AgentConfig,
    pub actor_cfg: MlpConfig,
    pub critic_cfg: MlpConfig,
    pub actor: ParamTree,
    pub target_actor: ParamTree,
    pub critics: Vec<ParamTree>,
    pub target_critics: Vec<ParamTree>,
    pub actor_opt: Adam,
    pub critic_opts: Vec<Adam>,
    /// Improvement steps taken so far (drives the policy-update cadence).
    pub rl_steps: u64,
    pub(crate) rng: ChaCha8Rng,
}

impl ActorCritic {
    pub fn new(cfg: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let mut actor_cfg = MlpConfig::new(cfg.obs_dim, cfg.hidden.clone(), 2 * cfg.act_dim);
        let mut critic_cfg = MlpConfig::new(cfg.obs_dim + cfg.act_dim, cfg.hidden.clone(), 1);
        if cfg.layer_norm {
            actor_cfg = actor_cfg.with_layer_norm();
            critic_cfg = critic_cfg.with_layer_norm();
        }
        let mut seeder = ChaCha8Rng::seed_from_u64(seed);
        let actor = mlp_init(&actor_cfg, seeder.random())?;
        let mut critics = Vec::with_capacity(cfg.n_critics);
        for _ in 0..cfg.n_critics {
            critics.push(mlp_init(&critic_cfg, seeder.random())?);
        }
        let target_actor = actor.clone();
        let target_critics = critics.clone();
        let actor_opt = Adam::new(AdamConfig::with_lr(cfg.actor_lr));
        let critic_opts =
            (0..cfg.n_critics).map(|_| Adam::new(AdamConfig::with_lr(cfg.critic_lr))).collect();
        let rng = ChaCha8Rng::seed_from_u64(seeder.random());
        Ok(ActorCritic {
            cfg,
            actor_cfg,
            critic_cfg,
            actor,
            target_actor,
            critics,
            target_critics,
            actor_opt,
            critic_opts,
            rl_steps: 0,
            rng,
        })
    }

    /// Mean/raw-std head outputs for a batch of observations.
    pub(crate) fn actor_head(
        &self,
        params: &ParamTree,
        obs: &Mat,
    ) -> Result<(Mat, Tape), AgentError> {
        Ok(mlp_forward(params, &self.actor_cfg, obs)?)
    }

    pub(crate) fn critic_q(
        &self,
        params: &ParamTree,
        input: &Mat,
    ) -> Result<(Mat, Tape), AgentError> {
        Ok(mlp_forward(params, &self.critic_cfg, input)?)
    }

    /// The mode of the policy, squashed into the action box.
    pub fn det_action(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        let x = Mat::row_vector(obs.to_vec());
        let (out, _) = self.actor_head(&self.actor, &x)?;
        let (mu, _) = split_head(out.row(0));
        Ok(deterministic_action(mu))
    }

    /// A draw from the policy, consuming the agent's own noise stream.
    pub fn sample_action(&mut self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        let x = Mat::row_vector(obs.to_vec());
        let (out, _) = self.actor_head(&self.actor, &x)?;
        let (mu, rho) = split_head(out.row(0));
        Ok(sample_squashed(mu, rho, &mut self.rng).action)
    }

    /// Q estimates from every online critic for a single pair.
    pub fn q_values(&self, obs: &[f64], act: &[f64]) -> Result<Vec<f64>, AgentError> {
        let mut row = obs.to_vec();
        row.extend_from_slice(act);
        let input = Mat::row_vector(row);
        self.critics
            .iter()
            .map(|c| Ok(self.critic_q(c, &input)?.0.at(0, 0)))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut map: BTreeMap<String, NetSnapshot> = BTreeMap::new();
        map.insert(
            "actor".into(),
            NetSnapshot::capture(&self.actor_cfg, &self.actor, Some(&self.actor_opt)),
        );
        map.insert(
            "target_actor".into(),
            NetSnapshot::capture(&self.actor_cfg, &self.target_actor, None),
        );
        for (i, c) in self.critics.iter().enumerate() {
            map.insert(
                format!("critic{i}"),
                NetSnapshot::capture(&self.critic_cfg, c, Some(&self.critic_opts[i])),
            );
            map.insert(
                format!("target_critic{i}"),
                NetSnapshot::capture(&self.critic_cfg, &self.target_critics[i], None),
            );
        }
        save_snapshots(path, &map)?;
        Ok(())
    }

    /// Rebuilds an agent from a checkpoint written by [`save`](Self::save).
    /// Network weights and optimizer moments are restored exactly; the noise
    /// stream is freshly seeded, so this is a warm start, not a bit-exact
    /// resume of an interrupted run.
    pub fn load(cfg: AgentConfig, seed: u64, path: &Path) -> Result<Self, AgentError> {
        let mut agent = Self::new(cfg, seed)?;
        let map = crate::nn::load_snapshots(path)?;
        let fetch = |name: &str| -> Result<&NetSnapshot, AgentError> {
            map.get(name).ok_or_else(|| AgentError::BadCheckpoint(format!("missing network {name:?}")))
        };
        let actor_snap = fetch("actor")?;
        if actor_snap.config != agent.actor_cfg {
            return Err(AgentError::BadCheckpoint("actor shape differs from config".into()));
        }
        agent.actor = actor_snap.params()?;
        if let Some(opt) = actor_snap.adam()? {
            agent.actor_opt = opt;
        }
        agent.target_actor = fetch("target_actor")?.params()?;
        for i in 0..agent.cfg.n_critics {
            let snap = fetch(&format!("critic{i}"))?;
            if snap.config != agent.critic_cfg {
                return Err(AgentError::BadCheckpoint("critic shape differs from config".into()));
            }
            agent.critics[i] = snap.params()?;
            if let Some(opt) = snap.adam()? {
                agent.critic_opts[i] = opt;
            }
            agent.target_critics[i] = fetch(&format!("target_critic{i}"))?.params()?;
        }
        Ok(agent)
    }
}

/// Row-wise `[obs | act]` critic input.
pub(crate) fn concat_input(obs: &Mat, act: &Mat) -> Mat {
    assert_eq!(obs.rows, act.rows);
    let mut out = Mat::zeros(obs.rows, obs.cols + act.cols);
    for r in 0..obs.rows {
        let row = out.row_mut(r);
        row[..obs.cols].copy_from_slice(obs.row(r));
        row[obs.cols..].copy_from_slice(act.row(r));
    }
    out
}

/// Squashed mean actions for a whole batch under the given parameters.
pub(crate) fn det_actions(
    params: &ParamTree,
    cfg: &MlpConfig,
    obs: &Mat,
) -> Result<Mat, AgentError> {
    let (out, _) = mlp_forward(params, cfg, obs)?;
    let act_dim = cfg.output_dim / 2;
    let mut acts = Mat::zeros(obs.rows, act_dim);
    for r in 0..obs.rows {
        let (mu, _) = split_head(out.row(r));
        acts.row_mut(r).copy_from_slice(&deterministic_action(mu));
    }
    Ok(acts)
}

/// Acts with the squashed policy mean; ignores the rollout's generator.
pub struct GreedyPolicy<'a> {
    pub agent: &'a ActorCritic,
}

impl Policy for GreedyPolicy<'_> {
    fn act(&self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Action {
        let mut enc = vec![0.0; self.agent.cfg.obs_dim];
        encode_obs_into(obs, &mut enc).expect("observation does not fit the policy input");
        Action::Vector(self.agent.det_action(&enc).expect("policy forward failed"))
    }
}

/// Draws from the policy using the rollout's generator.
pub struct StochasticPolicy<'a> {
    pub agent: &'a ActorCritic,
}

impl Policy for StochasticPolicy<'_> {
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action {
        let mut enc = vec![0.0; self.agent.cfg.obs_dim];
        encode_obs_into(obs, &mut enc).expect("observation does not fit the policy input");
        let x = Mat::row_vector(enc);
        let (out, _) = self.agent.actor_head(&self.agent.actor, &x).expect("policy forward failed");
        let (mu, rho) = split_head(out.row(0));
        Action::Vector(sample_squashed(mu, rho, rng).action)
    }
}
