//! Stochastic-policy improvement against a critic ensemble, and the
//! action-gradient diversity penalty that keeps ensemble members from
//! collapsing onto one another.

use super::actor_critic::{concat_input, ActorCritic};
use super::bc::bc_loss_and_grads;
use super::combine::{normalize_and_combine, LossTerm};
use super::config::{BcMode, LossReport, ValueRegularizer};
use super::cql::cql_penalty;
use super::replay::ReplayView;
use super::AgentError;
use crate::data::DoneKind;
use crate::nn::{
    mlp_backward, mlp_forward, polyak_update, sample_squashed, sampled_action_grads,
    sampled_log_prob_grads, split_head, Mat, MlpConfig, ParamTree, SampledAction,
};

/// Mean pairwise cosine similarity of the per-sample action gradients
/// `grad_a Q_i(s, a)` across ensemble members, with the normalizers treated
/// as constants, plus per-member parameter gradients.
///
/// The parameter gradient of `u^T grad_a Q(s, a)` (`u` held constant) is a
/// directional derivative of the backward pass, evaluated here by central
/// differences: `[grad_theta Q(s, a + eps u) - grad_theta Q(s, a - eps u)]
/// / (2 eps)`. Two extra forward/backward passes per member, no
/// second-order machinery.
pub fn diversity_penalty(
    critics: &[ParamTree],
    critic_cfg: &MlpConfig,
    input: &Mat,
    act_dim: usize,
    fd_eps: f64,
) -> Result<(f64, Vec<ParamTree>), AgentError> {
    let m = critics.len();
    if m < 2 {
        return Err(AgentError::BadConfig("diversity needs at least two critics".into()));
    }
    let b = input.rows;
    let obs_dim = critic_cfg.input_dim - act_dim;
    let ones = Mat::zeros(b, 1).map(|_| 1.0);
    // Per-sample action gradients for every member.
    let mut action_grads: Vec<Mat> = Vec::with_capacity(m);
    for critic in critics {
        let (_, tape) = mlp_forward(critic, critic_cfg, input)?;
        let (_, din) = mlp_backward(critic, critic_cfg, &tape, &ones)?;
        let mut g = Mat::zeros(b, act_dim);
        for r in 0..b {
            g.row_mut(r).copy_from_slice(&din.row(r)[obs_dim..]);
        }
        action_grads.push(g);
    }
    let norms: Vec<Vec<f64>> = action_grads
        .iter()
        .map(|g| {
            (0..b)
                .map(|r| g.row(r).iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-12)
                .collect()
        })
        .collect();
    let pairs = (m * (m - 1) / 2) as f64;
    let mut penalty = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            for r in 0..b {
                let dot: f64 = action_grads[i]
                    .row(r)
                    .iter()
                    .zip(action_grads[j].row(r))
                    .map(|(x, y)| x * y)
                    .sum();
                penalty += dot / (norms[i][r] * norms[j][r]) / (pairs * b as f64);
            }
        }
    }
    // u_i[r] = dPenalty / d(action_grads[i][r]), normalizers detached.
    let mut grads = Vec::with_capacity(m);
    for i in 0..m {
        let mut u = Mat::zeros(b, act_dim);
        for j in 0..m {
            if j == i {
                continue;
            }
            for r in 0..b {
                let c = 1.0 / (norms[i][r] * norms[j][r] * pairs * b as f64);
                for (uc, &gj) in u.row_mut(r).iter_mut().zip(action_grads[j].row(r)) {
                    *uc += c * gj;
                }
            }
        }
        let perturbed = |sign: f64| -> Result<ParamTree, AgentError> {
            let mut shifted = input.clone();
            for r in 0..b {
                for k in 0..act_dim {
                    shifted.row_mut(r)[obs_dim + k] += sign * fd_eps * u.at(r, k);
                }
            }
            let (_, tape) = mlp_forward(&critics[i], critic_cfg, &shifted)?;
            Ok(mlp_backward(&critics[i], critic_cfg, &tape, &ones)?.0)
        };
        let plus = perturbed(1.0)?;
        let minus = perturbed(-1.0)?;
        let mut g = plus;
        g.add_scaled(&minus, -1.0)?;
        grads.push(g.map(|x| x / (2.0 * fd_eps)));
    }
    Ok((penalty, grads))
}

/// One stochastic improvement step: every critic regresses on
/// `r + gamma * (min_i Q'_i(s', a~') - alpha * logpi(a~'|s'))`, then the
/// actor descends `alpha * logpi(a~|s) - min_i Q_i(s, a~)` through the
/// reparameterized sample; with `bc_anchor` set, a cloning term joins the
/// actor loss through the magnitude-normalized combination.
pub fn soft_ac_step(ac: &mut ActorCritic, view: &ReplayView) -> Result<LossReport, AgentError> {
    let idx = view.sample_indices(ac.cfg.batch_size, &mut ac.rng);
    let batch = view.gather(&idx);
    let b = batch.len();
    let act_dim = ac.cfg.act_dim;
    let alpha = ac.cfg.entropy_alpha;
    let mut report = LossReport::default();

    // Targets.
    let targets = {
        let (out, _) = mlp_forward(&ac.actor, &ac.actor_cfg, &batch.next_obs)?;
        let mut next_actions = Mat::zeros(b, act_dim);
        let mut log_probs = vec![0.0; b];
        for r in 0..b {
            let (mu, rho) = split_head(out.row(r));
            let s = sample_squashed(mu, rho, &mut ac.rng);
            next_actions.row_mut(r).copy_from_slice(&s.action);
            log_probs[r] = s.log_prob;
        }
        let input = concat_input(&batch.next_obs, &next_actions);
        let mut min_q = vec![f64::INFINITY; b];
        for target in &ac.target_critics {
            let (q, _) = mlp_forward(target, &ac.critic_cfg, &input)?;
            for r in 0..b {
                min_q[r] = min_q[r].min(q.at(r, 0));
            }
        }
        (0..b)
            .map(|r| {
                let bootstrap = match batch.done[r] {
                    DoneKind::Termination => 0.0,
                    DoneKind::NotDone | DoneKind::Timeout => min_q[r] - alpha * log_probs[r],
                };
                batch.rewards[r] + ac.cfg.gamma * bootstrap
            })
            .collect::<Vec<f64>>()
    };

    // Optional critic regularizers against the pre-update members.
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
            for (slot, g) in extra_grads.iter_mut().zip(pen.grads) {
                *slot = Some(g.map(|x| x * weight));
            }
        }
        ValueRegularizer::Diversify { eta } => {
            let (value, grads) =
                diversity_penalty(&ac.critics, &ac.critic_cfg, &data_input, act_dim, 1e-4)?;
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
        let mut samples: Vec<SampledAction> = Vec::with_capacity(b);
        let mut sampled_actions = Mat::zeros(b, act_dim);
        for r in 0..b {
            let (mu, rho) = split_head(out.row(r));
            let s = sample_squashed(mu, rho, &mut ac.rng);
            sampled_actions.row_mut(r).copy_from_slice(&s.action);
            samples.push(s);
        }
        let q_input = concat_input(&batch.obs, &sampled_actions);
        // Per-row minimum over the ensemble, with input gradients flowing
        // only through each row's minimizer.
        let mut q_all: Vec<Mat> = Vec::with_capacity(ac.critics.len());
        let mut tapes = Vec::with_capacity(ac.critics.len());
        for critic in &ac.critics {
            let (q, tape) = mlp_forward(critic, &ac.critic_cfg, &q_input)?;
            q_all.push(q);
            tapes.push(tape);
        }
        let argmin: Vec<usize> = (0..b)
            .map(|r| {
                (0..ac.critics.len())
                    .min_by(|&i, &j| q_all[i].at(r, 0).total_cmp(&q_all[j].at(r, 0)))
                    .unwrap()
            })
            .collect();
        let mut dq_action = Mat::zeros(b, act_dim);
        for i in 0..ac.critics.len() {
            let mut dy = Mat::zeros(b, 1);
            let mut any = false;
            for r in 0..b {
                if argmin[r] == i {
                    *dy.at_mut(r, 0) = 1.0 / b as f64;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let (_, din) = mlp_backward(&ac.critics[i], &ac.critic_cfg, &tapes[i], &dy)?;
            for r in 0..b {
                if argmin[r] == i {
                    for (acc, &v) in
                        dq_action.row_mut(r).iter_mut().zip(&din.row(r)[ac.cfg.obs_dim..])
                    {
                        *acc += v;
                    }
                }
            }
        }
        let mut loss = 0.0;
        let mut dy_actor = Mat::zeros(b, ac.actor_cfg.output_dim);
        for r in 0..b {
            let s = &samples[r];
            let qmin = q_all[argmin[r]].at(r, 0);
            loss += (alpha * s.log_prob - qmin) / b as f64;
            let (dmu_lp, drho_lp) = sampled_log_prob_grads(s);
            let (dmu_a, drho_a) = sampled_action_grads(s);
            let row = dy_actor.row_mut(r);
            for j in 0..act_dim {
                row[j] = alpha * dmu_lp[j] / b as f64 - dq_action.at(r, j) * dmu_a[j];
                row[act_dim + j] =
                    alpha * drho_lp[j] / b as f64 - dq_action.at(r, j) * drho_a[j];
            }
        }
        let (q_term_grads, _) = mlp_backward(&ac.actor, &ac.actor_cfg, &actor_tape, &dy_actor)?;
        let (actor_loss, actor_grads) = if ac.cfg.bc_anchor {
            let (bc_loss, bc_grads) = bc_loss_and_grads(
                &ac.actor,
                &ac.actor_cfg,
                &batch.obs,
                &batch.act,
                BcMode::Hard,
                &mut ac.rng,
            )?;
            report.bc = Some(bc_loss);
            normalize_and_combine(&[
                LossTerm { value: loss, grads: &q_term_grads, weight: 1.0 },
                LossTerm { value: bc_loss, grads: &bc_grads, weight: ac.cfg.bc_alpha },
            ])?
        } else {
            (loss, q_term_grads)
        };
        ac.actor_opt.step(&mut ac.actor, &actor_grads)?;
        report.actor = Some(actor_loss);
        polyak_update(&mut ac.target_actor, &ac.actor, ac.cfg.tau)?;
        for i in 0..ac.critics.len() {
            polyak_update(&mut ac.target_critics[i], &ac.critics[i], ac.cfg.tau)?;
        }
    }
    ac.rl_steps += 1;
    Ok(report)
}
