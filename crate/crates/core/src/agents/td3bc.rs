//! Deterministic-policy improvement: clipped double-Q targets, delayed
//! policy updates, and a critic-scaled behavior-cloning anchor.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::actor_critic::{concat_input, det_actions, ActorCritic};
use super::config::{LossReport, ValueRegularizer};
use super::cql::cql_penalty;
use super::ensemble::diversity_penalty;
use super::replay::{Batch, ReplayView};
use super::AgentError;
use crate::data::DoneKind;
use crate::nn::{mlp_backward, mlp_forward, polyak_update, split_head, Mat, MlpConfig, ParamTree};

/// Regression targets from target networks only:
/// `y = r + gamma * min_i Q'_i(s', clip(pi'(s') + noise))`, bootstrapping
/// everywhere except terminal transitions. Also returns the smoothed next
/// actions for inspection.
#[allow(clippy::too_many_arguments)]
pub fn td3_targets(
    target_actor: &ParamTree,
    actor_cfg: &MlpConfig,
    target_critics: &[ParamTree],
    critic_cfg: &MlpConfig,
    batch: &Batch,
    gamma: f64,
    target_noise: f64,
    noise_clip: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Mat), AgentError> {
    let mut next_actions = det_actions(target_actor, actor_cfg, &batch.next_obs)?;
    if target_noise > 0.0 {
        let dist = Normal::new(0.0, target_noise)
            .map_err(|_| AgentError::BadConfig("bad target noise std".into()))?;
        for v in next_actions.data_mut() {
            let eps: f64 = rng.sample(dist);
            *v = (*v + eps.clamp(-noise_clip, noise_clip)).clamp(-1.0, 1.0);
        }
    }
    let input = concat_input(&batch.next_obs, &next_actions);
    let b = batch.len();
    let mut min_q = vec![f64::INFINITY; b];
    for target in target_critics {
        let (q, _) = mlp_forward(target, critic_cfg, &input)?;
        for r in 0..b {
            min_q[r] = min_q[r].min(q.at(r, 0));
        }
    }
    let targets = (0..b)
        .map(|r| {
            let bootstrap = match batch.done[r] {
                DoneKind::Termination => 0.0,
                DoneKind::NotDone | DoneKind::Timeout => min_q[r],
            };
            batch.rewards[r] + gamma * bootstrap
        })
        .collect();
    Ok((targets, next_actions))
}

/// One improvement step: every critic regresses on the clipped double-Q
/// target; every `policy_delay` steps the actor ascends
/// `lambda * Q_1(s, pi(s)) - ||pi(s) - a||^2` with
/// `lambda = bc_alpha / mean|Q_1(s, pi(s))|` (the scale treated as a
/// constant), followed by retention updates of all target networks.
pub fn td3bc_step(ac: &mut ActorCritic, view: &ReplayView) -> Result<LossReport, AgentError> {
    let idx = view.sample_indices(ac.cfg.batch_size, &mut ac.rng);
    let batch = view.gather(&idx);
    let b = batch.len();
    let (targets, _) = td3_targets(
        &ac.target_actor,
        &ac.actor_cfg,
        &ac.target_critics,
        &ac.critic_cfg,
        &batch,
        ac.cfg.gamma,
        ac.cfg.target_noise,
        ac.cfg.noise_clip,
        &mut ac.rng,
    )?;
    let mut report = LossReport::default();

    // Optional critic regularizers, computed once against the pre-update
    // critics so every member sees a consistent penalty.
    let data_input = concat_input(&batch.obs, &batch.act);
    let mut extra_grads: Vec<Option<ParamTree>> = vec![None; ac.critics.len()];
    match ac.cfg.value_regularizer {
        ValueRegularizer::Cql { weight, n_actions, temperature } => {
            let pen = cql_penalty(
                &ac.critics,
                &ac.critic_cfg,
                &batch.obs,
                &batch.act,
                n_actions,
                temperature,
                &mut ac.rng,
            )?;
            report.cql = Some(pen.mean_value());
            for (slot, mut g) in extra_grads.iter_mut().zip(pen.grads) {
                g = g.map(|x| x * weight);
                *slot = Some(g);
            }
        }
        ValueRegularizer::Diversify { eta } => {
            let (value, grads) =
                diversity_penalty(&ac.critics, &ac.critic_cfg, &data_input, ac.cfg.act_dim, 1e-4)?;
            report.diversity = Some(value);
            for (slot, g) in extra_grads.iter_mut().zip(grads) {
                *slot = Some(g.map(|x| x * eta));
            }
        }
        ValueRegularizer::None => {}
    }

    let mut critic_loss = 0.0;
    for i in 0..ac.critics.len() {
        let (q, tape) = mlp_forward(&ac.critics[i], &ac.critic_cfg, &data_input)?;
        let mut dy = Mat::zeros(b, 1);
        let mut loss = 0.0;
        for r in 0..b {
            let diff = q.at(r, 0) - targets[r];
            loss += diff * diff / b as f64;
            *dy.at_mut(r, 0) = 2.0 * diff / b as f64;
        }
        let (mut grads, _) = mlp_backward(&ac.critics[i], &ac.critic_cfg, &tape, &dy)?;
        if let Some(extra) = &extra_grads[i] {
            grads.add_scaled(extra, 1.0)?;
        }
        ac.critic_opts[i].step(&mut ac.critics[i], &grads)?;
        critic_loss += loss;
    }
    report.critic = Some(critic_loss / ac.critics.len() as f64);

    if ac.rl_steps % ac.cfg.policy_delay as u64 == 0 {
        let (out, actor_tape) = mlp_forward(&ac.actor, &ac.actor_cfg, &batch.obs)?;
        let act_dim = ac.cfg.act_dim;
        let mut pi = Mat::zeros(b, act_dim);
        for r in 0..b {
            let (mu, _) = split_head(out.row(r));
            for j in 0..act_dim {
                pi.row_mut(r)[j] = mu[j].tanh();
            }
        }
        let pi_input = concat_input(&batch.obs, &pi);
        let (q1, q_tape) = mlp_forward(&ac.critics[0], &ac.critic_cfg, &pi_input)?;
        let mean_q = (0..b).map(|r| q1.at(r, 0)).sum::<f64>() / b as f64;
        let mean_abs_q = (0..b).map(|r| q1.at(r, 0).abs()).sum::<f64>() / b as f64;
        let lambda = ac.cfg.bc_alpha / mean_abs_q.max(1e-12);
        let dy_q = Mat::zeros(b, 1).map(|_| 1.0 / b as f64);
        let (_, dq_input) = mlp_backward(&ac.critics[0], &ac.critic_cfg, &q_tape, &dy_q)?;
        let mut bc = 0.0;
        let mut dy_actor = Mat::zeros(b, ac.actor_cfg.output_dim);
        for r in 0..b {
            for j in 0..act_dim {
                let p = pi.at(r, j);
                let diff = p - batch.act.at(r, j);
                bc += diff * diff / b as f64;
                let dpi = -lambda * dq_input.at(r, ac.cfg.obs_dim + j)
                    + 2.0 * diff / b as f64;
                dy_actor.row_mut(r)[j] = dpi * (1.0 - p * p);
            }
        }
        let (actor_grads, _) = mlp_backward(&ac.actor, &ac.actor_cfg, &actor_tape, &dy_actor)?;
        ac.actor_opt.step(&mut ac.actor, &actor_grads)?;
        report.actor = Some(-lambda * mean_q + bc);
        report.bc = Some(bc);
        polyak_update(&mut ac.target_actor, &ac.actor, ac.cfg.tau)?;
        for i in 0..ac.critics.len() {
            polyak_update(&mut ac.target_critics[i], &ac.critics[i], ac.cfg.tau)?;
        }
    }
    ac.rl_steps += 1;
    Ok(report)
}
