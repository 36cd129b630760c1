//! The three-phase training loop: supervised actor cloning, supervised
//! critic regression, then off-policy improvement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor_critic::ActorCritic;
use super::bc::actor_pretrain_step;
use super::config::{Algorithm, LossReport, PretrainConfig};
use super::critic_pretrain::critic_pretrain_step;
use super::ensemble::soft_ac_step;
use super::replay::ReplayView;
use super::td3bc::td3bc_step;
use super::AgentError;
use crate::data::{Observation, OfflineDataset};
use crate::nn::{entropy_estimate, mlp_forward, split_head, Mat};
use crate::returns::{annotate_dataset, AnnotationMode, ReturnConfig};

/// Draws used by the sampled entropy estimate when annotating soft returns.
const ENTROPY_DRAWS: usize = 16;
/// Fixed stream for those draws, so the estimate is a pure function of the
/// state and annotation stays reproducible.
const ENTROPY_SEED: u64 = 0x05EE_DE57;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ActorPretrain,
    CriticPretrain,
    Rl,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::ActorPretrain => "actor_pretrain",
            Phase::CriticPretrain => "critic_pretrain",
            Phase::Rl => "rl",
        }
    }
}

/// What the observer sees after every training step.
#[derive(Debug, Clone, Copy)]
pub struct TrainEvent {
    /// Global 0-based step index across all phases.
    pub step: usize,
    pub phase: Phase,
    pub losses: LossReport,
}

/// Sliding-window stall detector: fires when the mean loss of the last
/// window improves on the window before it by less than
/// `tol * max(|previous mean|, 1e-3)`. A tolerance of zero disables it.
struct PlateauTracker {
    window: usize,
    tol: f64,
    history: Vec<f64>,
}

impl PlateauTracker {
    fn new(window: usize, tol: f64) -> Self {
        PlateauTracker { window, tol, history: Vec::new() }
    }

    fn stalled(&mut self, loss: f64) -> bool {
        if self.tol <= 0.0 {
            return false;
        }
        self.history.push(loss);
        if self.history.len() < 2 * self.window {
            return false;
        }
        let n = self.history.len();
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let last = mean(&self.history[n - self.window..]);
        let prev = mean(&self.history[n - 2 * self.window..n - self.window]);
        prev - last < self.tol * prev.abs().max(1e-3)
    }
}

/// Runs the full schedule against a logged dataset, invoking `observer`
/// after every step. Exactly `total_steps` steps are taken: phases that
/// exit early on a plateau hand their remaining budget to the improvement
/// phase. The critic phase annotates the dataset itself (soft returns use
/// entropy estimates from the just-cloned actor); the target actor is
/// re-synced to the online actor when improvement begins.
pub fn pretrain_then_train(
    ac: &mut ActorCritic,
    ds: &OfflineDataset,
    pre: &PretrainConfig,
    total_steps: usize,
    mut observer: impl FnMut(&TrainEvent, &ActorCritic),
) -> Result<(), AgentError> {
    pre.validate()?;
    let critic_budget = if pre.pretrain_critic { pre.critic_steps } else { 0 };
    if total_steps < pre.actor_steps + critic_budget {
        return Err(AgentError::BadConfig(format!(
            "total_steps {} is smaller than the pretraining schedule {}",
            total_steps,
            pre.actor_steps + critic_budget
        )));
    }
    let view = ReplayView::from_dataset(ds, ac.cfg.obs_dim, ac.cfg.act_dim)?;
    let mut step = 0usize;

    let mut plateau = PlateauTracker::new(pre.plateau_window, pre.plateau_tol);
    for _ in 0..pre.actor_steps {
        let losses = actor_pretrain_step(ac, &view, pre.bc_mode)?;
        observer(&TrainEvent { step, phase: Phase::ActorPretrain, losses }, ac);
        step += 1;
        if plateau.stalled(losses.bc.unwrap_or(f64::INFINITY)) {
            break;
        }
    }

    if critic_budget > 0 {
        let return_cfg = ReturnConfig {
            gamma: ac.cfg.gamma,
            lambda_mix: pre.lambda_mix,
            timeout_mode: pre.timeout_mode,
            visit_mode: Default::default(),
        };
        let soft = ac.cfg.algorithm == Algorithm::EnsembleSoftAc;
        let annotated = if soft {
            let actor = &ac.actor;
            let actor_cfg = &ac.actor_cfg;
            let obs_dim = ac.cfg.obs_dim;
            let entropy = move |obs: &Observation| -> f64 {
                let mut enc = vec![0.0; obs_dim];
                super::replay::encode_obs_into(obs, &mut enc)
                    .expect("dataset observation does not fit the actor input");
                let x = Mat::row_vector(enc);
                let (out, _) =
                    mlp_forward(actor, actor_cfg, &x).expect("actor forward failed");
                let (mu, rho) = split_head(out.row(0));
                let mut rng = ChaCha8Rng::seed_from_u64(ENTROPY_SEED);
                entropy_estimate(mu, rho, &mut rng, ENTROPY_DRAWS)
            };
            annotate_dataset(
                ds,
                &return_cfg,
                AnnotationMode::Soft { temperature: ac.cfg.entropy_alpha, entropy: &entropy },
            )?
        } else {
            annotate_dataset(ds, &return_cfg, AnnotationMode::Hard)?
        };
        let critic_view = ReplayView::from_dataset(&annotated, ac.cfg.obs_dim, ac.cfg.act_dim)?;
        let pool = critic_view.annotated_indices(soft);
        if pool.is_empty() {
            return Err(AgentError::NoAnnotatedSteps);
        }
        let mut plateau = PlateauTracker::new(pre.plateau_window, pre.plateau_tol);
        for _ in 0..critic_budget {
            let losses = critic_pretrain_step(ac, &critic_view, &pool, pre)?;
            observer(&TrainEvent { step, phase: Phase::CriticPretrain, losses }, ac);
            step += 1;
            if plateau.stalled(losses.critic.unwrap_or(f64::INFINITY)) {
                break;
            }
        }
    }

    // Improvement bootstraps from the target actor; align it with whatever
    // cloning produced before the first update.
    ac.target_actor = ac.actor.clone();
    while step < total_steps {
        let losses = match ac.cfg.algorithm {
            Algorithm::Td3Bc => td3bc_step(ac, &view)?,
            Algorithm::EnsembleSoftAc => soft_ac_step(ac, &view)?,
        };
        observer(&TrainEvent { step, phase: Phase::Rl, losses }, ac);
        step += 1;
    }
    Ok(())
}
