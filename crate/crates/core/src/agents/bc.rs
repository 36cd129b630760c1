//! Supervised actor pretraining on the logged actions.

use rand_chacha::ChaCha8Rng;

use super::actor_critic::ActorCritic;
use super::config::{BcMode, LossReport};
use super::replay::ReplayView;
use super::AgentError;
use crate::nn::{
    deterministic_action, log_prob_of, mlp_backward, mlp_forward, sample_squashed,
    sampled_log_prob_grads, split_head, Mat, MlpConfig, ParamTree,
};

/// Cloning loss and actor-parameter gradient on one batch.
///
/// `Hard` regresses the squashed mean onto the data:
/// `mean_b sum_j (tanh(mu_j) - a_j)^2`; the raw-std head receives no
/// gradient. `Soft` is maximum likelihood with an entropy bonus:
/// `mean_b [temperature * logpi(a~|s) - logpi(a|s)]` with `a~`
/// reparameterized through the sampling noise.
pub fn bc_loss_and_grads(
    actor: &ParamTree,
    actor_cfg: &MlpConfig,
    obs: &Mat,
    act: &Mat,
    mode: BcMode,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, ParamTree), AgentError> {
    let (out, tape) = mlp_forward(actor, actor_cfg, obs)?;
    let batch = obs.rows as f64;
    let act_dim = act.cols;
    let mut dy = Mat::zeros(obs.rows, actor_cfg.output_dim);
    let mut loss = 0.0;
    for r in 0..obs.rows {
        let (mu, rho) = split_head(out.row(r));
        match mode {
            BcMode::Hard => {
                let pi = deterministic_action(mu);
                for j in 0..act_dim {
                    let diff = pi[j] - act.at(r, j);
                    loss += diff * diff / batch;
                    dy.row_mut(r)[j] = 2.0 * diff * (1.0 - pi[j] * pi[j]) / batch;
                }
            }
            BcMode::Soft { temperature } => {
                let sample = sample_squashed(mu, rho, rng);
                let (dmu_s, drho_s) = sampled_log_prob_grads(&sample);
                let fixed = log_prob_of(mu, rho, act.row(r));
                loss += (temperature * sample.log_prob - fixed.log_prob) / batch;
                let row = dy.row_mut(r);
                for j in 0..act_dim {
                    row[j] = (temperature * dmu_s[j] - fixed.dmu[j]) / batch;
                    row[act_dim + j] = (temperature * drho_s[j] - fixed.drho[j]) / batch;
                }
            }
        }
    }
    let (grads, _) = mlp_backward(actor, actor_cfg, &tape, &dy)?;
    Ok((loss, grads))
}

/// One supervised actor step: sample a minibatch, compute the cloning
/// gradient, apply the actor optimizer.
pub fn actor_pretrain_step(
    ac: &mut ActorCritic,
    view: &ReplayView,
    mode: BcMode,
) -> Result<LossReport, AgentError> {
    let idx = view.sample_indices(ac.cfg.batch_size, &mut ac.rng);
    let batch = view.gather(&idx);
    let (loss, grads) =
        bc_loss_and_grads(&ac.actor, &ac.actor_cfg, &batch.obs, &batch.act, mode, &mut ac.rng)?;
    ac.actor_opt.step(&mut ac.actor, &grads)?;
    Ok(LossReport { bc: Some(loss), ..LossReport::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_init;
    use rand::SeedableRng;

    fn fixture(seed: u64) -> (ParamTree, MlpConfig, Mat, Mat) {
        let cfg = MlpConfig::new(2, vec![8], 2); // one action dimension
        let params = mlp_init(&cfg, seed).unwrap();
        let obs = Mat::from_rows(&[vec![0.3, -0.4], vec![-1.0, 0.2], vec![0.0, 0.8]]).unwrap();
        let act = Mat::from_rows(&[vec![0.5], vec![-0.7], vec![0.1]]).unwrap();
        (params, cfg, obs, act)
    }

    #[test]
    fn hard_cloning_gradients_match_central_differences() {
        let (params, cfg, obs, act) = fixture(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, grads) =
            bc_loss_and_grads(&params, &cfg, &obs, &act, BcMode::Hard, &mut rng).unwrap();
        let loss_at = |flat: &[f64]| {
            let mut p = params.clone();
            p.unflatten_into(flat).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            bc_loss_and_grads(&p, &cfg, &obs, &act, BcMode::Hard, &mut rng).unwrap().0
        };
        let base = params.flatten();
        let flat_grads = grads.flatten();
        let h = 1e-5;
        for i in (0..base.len()).step_by(7) {
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let denom = numeric.abs().max(flat_grads[i].abs()).max(1e-6);
            assert!(
                (numeric - flat_grads[i]).abs() / denom < 1e-4,
                "param {i}: numeric {numeric} vs analytic {}",
                flat_grads[i]
            );
        }
    }

    #[test]
    fn hard_cloning_drives_the_mean_to_the_data() {
        let (mut params, cfg, obs, act) = fixture(11);
        let mut opt = crate::nn::Adam::new(crate::nn::AdamConfig::with_lr(1e-2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut last = f64::INFINITY;
        for _ in 0..600 {
            let (loss, grads) =
                bc_loss_and_grads(&params, &cfg, &obs, &act, BcMode::Hard, &mut rng).unwrap();
            opt.step(&mut params, &grads).unwrap();
            last = loss;
        }
        assert!(last < 1e-3, "cloning loss stayed at {last}");
        let (out, _) = mlp_forward(&params, &cfg, &obs).unwrap();
        for r in 0..obs.rows {
            let (mu, _) = split_head(out.row(r));
            assert!((mu[0].tanh() - act.at(r, 0)).abs() < 0.05);
        }
    }

    #[test]
    fn soft_cloning_raises_the_likelihood_of_the_data() {
        let (mut params, cfg, obs, act) = fixture(7);
        let mut opt = crate::nn::Adam::new(crate::nn::AdamConfig::with_lr(3e-3));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nll = |p: &ParamTree| {
            let (out, _) = mlp_forward(p, &cfg, &obs).unwrap();
            -(0..obs.rows)
                .map(|r| {
                    let (mu, rho) = split_head(out.row(r));
                    log_prob_of(mu, rho, act.row(r)).log_prob
                })
                .sum::<f64>()
                / obs.rows as f64
        };
        let before = nll(&params);
        for _ in 0..400 {
            let (_, grads) = bc_loss_and_grads(
                &params,
                &cfg,
                &obs,
                &act,
                BcMode::Soft { temperature: 0.05 },
                &mut rng,
            )
            .unwrap();
            opt.step(&mut params, &grads).unwrap();
        }
        let after = nll(&params);
        assert!(
            after < before - 0.5,
            "negative log likelihood went {before} -> {after}"
        );
    }

    #[test]
    fn a_pretrain_step_updates_only_the_actor() {
        let ds = {
            use crate::data::*;
            let t = |s: f64| Transition {
                state: Observation::Vector(vec![s, s * s]),
                action: Action::Vector(vec![(s * 3.0).tanh()]),
                reward: 1.0,
                next_state: Observation::Vector(vec![s + 0.3, (s + 0.3) * (s + 0.3)]),
                done_kind: if s > 0.5 { DoneKind::Termination } else { DoneKind::NotDone },
            };
            OfflineDataset::new(
                vec![crate::data::Trajectory::new(vec![t(0.0), t(0.3), t(0.6)]).unwrap()],
                "bc-step",
                0,
            )
        };
        let view = ReplayView::from_dataset(&ds, 2, 1).unwrap();
        let mut ac = ActorCritic::new(crate::agents::AgentConfig::hard(2, 1), 4).unwrap();
        let critic_before = ac.critics[0].clone();
        let actor_before = ac.actor.clone();
        let report = actor_pretrain_step(&mut ac, &view, BcMode::Hard).unwrap();
        assert!(report.bc.unwrap().is_finite());
        assert!(report.critic.is_none());
        assert_ne!(ac.actor, actor_before);
        assert_eq!(ac.critics[0], critic_before);
    }
}
