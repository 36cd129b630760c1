//! Supervised critic regression on observed returns, optionally blended
//! with a one-step bootstrapped target.

use super::actor_critic::{concat_input, det_actions, ActorCritic};
use super::combine::{normalize_and_combine, LossTerm};
use super::config::{Algorithm, LossReport, PretrainConfig, ValueRegularizer};
use super::cql::cql_penalty;
use super::ensemble::diversity_penalty;
use super::replay::{Batch, ReplayView};
use super::AgentError;
use crate::data::DoneKind;
use crate::nn::{mlp_backward, mlp_forward, polyak_update, sample_squashed, split_head, Mat, ParamTree};
use crate::returns::compute_mixed_target;

/// One-step values `min_i Q'_i(s', a')` under the *target* critics with the
/// *current* actor choosing `a'`; the stochastic algorithm samples `a'` and
/// subtracts the scaled log density.
fn next_state_values(ac: &mut ActorCritic, batch: &Batch) -> Result<Vec<f64>, AgentError> {
    let b = batch.len();
    let act_dim = ac.cfg.act_dim;
    let mut log_probs = vec![0.0; b];
    let next_actions = match ac.cfg.algorithm {
        Algorithm::Td3Bc => det_actions(&ac.actor, &ac.actor_cfg, &batch.next_obs)?,
        Algorithm::EnsembleSoftAc => {
            let (out, _) = mlp_forward(&ac.actor, &ac.actor_cfg, &batch.next_obs)?;
            let mut acts = Mat::zeros(b, act_dim);
            for r in 0..b {
                let (mu, rho) = split_head(out.row(r));
                let sample = sample_squashed(mu, rho, &mut ac.rng);
                acts.row_mut(r).copy_from_slice(&sample.action);
                log_probs[r] = sample.log_prob;
            }
            acts
        }
    };
    let input = concat_input(&batch.next_obs, &next_actions);
    let mut min_q = vec![f64::INFINITY; b];
    for target in &ac.target_critics {
        let (q, _) = mlp_forward(target, &ac.critic_cfg, &input)?;
        for r in 0..b {
            min_q[r] = min_q[r].min(q.at(r, 0));
        }
    }
    if ac.cfg.algorithm == Algorithm::EnsembleSoftAc {
        for r in 0..b {
            min_q[r] -= ac.cfg.entropy_alpha * log_probs[r];
        }
    }
    Ok(min_q)
}

/// One supervised critic step over rows drawn from `pool` (the annotated
/// subset). Every critic regresses on the same blended target
/// `(1 - lambda) * R + lambda * (r + gamma * q_next)`; terminal steps
/// bootstrap from zero. Target critics track slowly via the usual
/// retention update.
pub fn critic_pretrain_step(
    ac: &mut ActorCritic,
    view: &ReplayView,
    pool: &[usize],
    pre: &PretrainConfig,
) -> Result<LossReport, AgentError> {
    if pool.is_empty() {
        return Err(AgentError::NoAnnotatedSteps);
    }
    let idx = view.sample_from(pool, ac.cfg.batch_size, &mut ac.rng);
    let batch = view.gather(&idx);
    let soft = ac.cfg.algorithm == Algorithm::EnsembleSoftAc;
    let b = batch.len();
    // Skip the bootstrap forwards entirely when the blend ignores them.
    let q_next = if pre.lambda_mix > 0.0 {
        next_state_values(ac, &batch)?
    } else {
        vec![0.0; b]
    };
    let mut targets = Vec::with_capacity(b);
    for r in 0..b {
        let base = if soft { batch.soft_rtg[r] } else { batch.rtg[r] };
        let base = base.ok_or(AgentError::NoAnnotatedSteps)?;
        let bootstrap = match batch.done[r] {
            DoneKind::Termination => 0.0,
            DoneKind::NotDone | DoneKind::Timeout => q_next[r],
        };
        targets.push(compute_mixed_target(
            base,
            batch.rewards[r],
            ac.cfg.gamma,
            bootstrap,
            pre.lambda_mix,
        )?);
    }
    let input = concat_input(&batch.obs, &batch.act);
    let mut report = LossReport::default();

    // Optional penalty, measured once against the pre-update critics:
    // (value, gradients, weight) per ensemble member.
    let mut penalty: Vec<Option<(f64, ParamTree, f64)>> = vec![None; ac.critics.len()];
    match pre.value_regularizer {
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
            let values = pen.values.into_iter().zip(pen.grads);
            for (slot, (v, g)) in penalty.iter_mut().zip(values) {
                *slot = Some((v, g, weight));
            }
        }
        ValueRegularizer::Diversify { eta } => {
            let (value, grads) =
                diversity_penalty(&ac.critics, &ac.critic_cfg, &input, ac.cfg.act_dim, 1e-4)?;
            report.diversity = Some(value);
            for (slot, g) in penalty.iter_mut().zip(grads) {
                *slot = Some((value, g, eta));
            }
        }
        ValueRegularizer::None => {}
    }

    let mut total = 0.0;
    for i in 0..ac.critics.len() {
        let (q, tape) = mlp_forward(&ac.critics[i], &ac.critic_cfg, &input)?;
        let mut dy = Mat::zeros(b, 1);
        let mut loss = 0.0;
        for r in 0..b {
            let diff = q.at(r, 0) - targets[r];
            loss += diff * diff / b as f64;
            *dy.at_mut(r, 0) = 2.0 * diff / b as f64;
        }
        let (grads, _) = mlp_backward(&ac.critics[i], &ac.critic_cfg, &tape, &dy)?;
        // The penalty joins through magnitude-normalized combination so its
        // scale cannot drown the regression term (or vice versa).
        let step_grads = match &penalty[i] {
            Some((pv, pg, w)) => {
                let terms = [
                    LossTerm { value: loss, grads: &grads, weight: 1.0 },
                    LossTerm { value: *pv, grads: pg, weight: *w },
                ];
                normalize_and_combine(&terms)?.1
            }
            None => grads,
        };
        ac.critic_opts[i].step(&mut ac.critics[i], &step_grads)?;
        polyak_update(&mut ac.target_critics[i], &ac.critics[i], ac.cfg.tau)?;
        total += loss;
    }
    report.critic = Some(total / ac.critics.len() as f64);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentConfig;
    use crate::data::{Action, Observation, OfflineDataset, Trajectory, Transition};
    use crate::returns::{annotate_dataset, AnnotationMode, ReturnConfig};

    fn annotated_view(gamma: f64) -> (OfflineDataset, ReplayView) {
        let t = |s: f64, a: f64, r: f64, done: DoneKind| Transition {
            state: Observation::Vector(vec![s]),
            action: Action::Vector(vec![a]),
            reward: r,
            next_state: Observation::Vector(vec![s + 0.1]),
            done_kind: done,
        };
        let traj = Trajectory::new(vec![
            t(0.0, 0.2, 1.0, DoneKind::NotDone),
            t(0.1, -0.2, 0.5, DoneKind::NotDone),
            t(0.2, 0.4, 2.0, DoneKind::Termination),
        ])
        .unwrap();
        let ds = OfflineDataset::new(vec![traj], "critic-pretrain", 0);
        let ds = annotate_dataset(&ds, &ReturnConfig::new(gamma), AnnotationMode::Hard).unwrap();
        let view = ReplayView::from_dataset(&ds, 1, 1).unwrap();
        (ds, view)
    }

    #[test]
    fn pure_return_regression_converges_to_the_annotations() {
        let gamma = 0.9;
        let (_, view) = annotated_view(gamma);
        let mut cfg = AgentConfig::hard(1, 1);
        cfg.hidden = vec![16];
        cfg.batch_size = 16;
        cfg.critic_lr = 1e-2;
        cfg.gamma = gamma;
        let mut ac = ActorCritic::new(cfg, 8).unwrap();
        let pre = PretrainConfig::new(0, 400); // lambda_mix = 0
        let pool = view.annotated_indices(false);
        for _ in 0..400 {
            critic_pretrain_step(&mut ac, &view, &pool, &pre).unwrap();
        }
        for (r, rtg) in view.rtg.iter().enumerate() {
            let q = ac.q_values(view.obs.row(r), view.act.row(r)).unwrap();
            for qi in q {
                assert!(
                    (qi - rtg.unwrap()).abs() < 0.05,
                    "row {r}: critic {qi} vs return {}",
                    rtg.unwrap()
                );
            }
        }
    }

    #[test]
    fn the_actor_is_untouched_and_targets_move_slowly() {
        let (_, view) = annotated_view(0.95);
        let mut cfg = AgentConfig::hard(1, 1);
        cfg.hidden = vec![8];
        cfg.gamma = 0.95;
        let mut ac = ActorCritic::new(cfg, 1).unwrap();
        let actor_before = ac.actor.clone();
        let target_before = ac.target_critics[0].clone();
        let pre = PretrainConfig { lambda_mix: 0.5, ..PretrainConfig::new(0, 1) };
        let pool = view.annotated_indices(false);
        let report = critic_pretrain_step(&mut ac, &view, &pool, &pre).unwrap();
        assert!(report.critic.unwrap().is_finite());
        assert_eq!(ac.actor, actor_before);
        assert_ne!(ac.target_critics[0], target_before);
        // Retention keeps the target within (1 - tau) of the online move.
        let mut drift: f64 = 0.0;
        let mut online_move: f64 = 0.0;
        for (name, m) in ac.target_critics[0].iter() {
            let before = target_before.get(name).unwrap();
            let online = ac.critics[0].get(name).unwrap();
            for i in 0..m.data().len() {
                drift = drift.max((m.data()[i] - before.data()[i]).abs());
                online_move = online_move.max((online.data()[i] - before.data()[i]).abs());
            }
        }
        assert!(drift <= (1.0 - ac.cfg.tau) * online_move + 1e-12);
    }

    #[test]
    fn pretraining_penalties_are_reported_and_keep_regression_working() {
        let gamma = 0.9;
        let (_, view) = annotated_view(gamma);
        let pool = view.annotated_indices(false);

        let mut cfg = AgentConfig::hard(1, 1);
        cfg.hidden = vec![16];
        cfg.batch_size = 16;
        cfg.critic_lr = 1e-2;
        cfg.gamma = gamma;

        let mut ac = ActorCritic::new(cfg.clone(), 8).unwrap();
        let mut pre = PretrainConfig::new(0, 400);
        pre.value_regularizer =
            ValueRegularizer::Cql { weight: 0.5, n_actions: 6, temperature: 1.0 };
        let mut first = None;
        let mut last = None;
        for _ in 0..400 {
            let rep = critic_pretrain_step(&mut ac, &view, &pool, &pre).unwrap();
            assert!(rep.cql.unwrap().is_finite());
            first.get_or_insert(rep.critic.unwrap());
            last = rep.critic;
        }
        // The penalty pulls probe-action values down, so exact interpolation
        // is no longer the optimum; the regression term must still improve a
        // lot rather than being drowned out.
        assert!(
            last.unwrap() < 0.5 * first.unwrap(),
            "regression stalled under the penalty: {first:?} -> {last:?}"
        );

        let mut ac = ActorCritic::new(cfg, 8).unwrap();
        let mut pre = PretrainConfig::new(0, 1);
        pre.value_regularizer = ValueRegularizer::Diversify { eta: 1.0 };
        let rep = critic_pretrain_step(&mut ac, &view, &pool, &pre).unwrap();
        let d = rep.diversity.unwrap();
        assert!(d.is_finite() && d.abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn missing_annotations_are_an_error() {
        let (mut ds, _) = annotated_view(0.9);
        ds.annotations = None;
        let view = ReplayView::from_dataset(&ds, 1, 1).unwrap();
        let mut ac = ActorCritic::new(AgentConfig::hard(1, 1), 0).unwrap();
        let pre = PretrainConfig::new(0, 10);
        let pool = view.annotated_indices(false);
        assert!(matches!(
            critic_pretrain_step(&mut ac, &view, &pool, &pre),
            Err(AgentError::NoAnnotatedSteps)
        ));
    }
}
