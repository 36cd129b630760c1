//! Discounted return computations over logged trajectories.
//!
//! The central quantity is the return-to-go
//! `R_t = sum_n gamma^n r_{t+n}`, computed in a single backward pass via
//! `R_t = r_t + gamma * R_{t+1}`. Value regression can blend it with a
//! one-step bootstrapped target, `(1 - lambda) * R + lambda * (r + gamma *
//! q_next)`, and the entropy-regularized variant augments future rewards with
//! per-state policy entropy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    DatasetAnnotations, DoneKind, Observation, OfflineDataset, StepAnnotation, Trajectory,
};

#[derive(Debug, Error)]
pub enum ReturnError {
    #[error("gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("lambda_mix must lie in [0, 1], got {0}")]
    BadLambda(f64),
    #[error("entropy temperature must be non-negative, got {0}")]
    BadTemperature(f64),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Whether a `Timeout` ending is treated like a terminal state when computing
/// returns (`TreatAsTerminal`, the default) or whether the truncated episode
/// is conservatively dropped from value-regression targets
/// (`BootstrapExcluded`): every return in a cut-off episode is missing its
/// tail, so under exclusion no step of that trajectory is annotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutMode {
    #[default]
    TreatAsTerminal,
    BootstrapExcluded,
}

/// First-visit vs every-visit Monte-Carlo averaging for tabular value
/// initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitMode {
    FirstVisit,
    #[default]
    EveryVisit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    pub gamma: f64,
    /// Blend weight between the Monte-Carlo return (0) and the one-step
    /// bootstrapped target (1).
    pub lambda_mix: f64,
    #[serde(default)]
    pub timeout_mode: TimeoutMode,
    #[serde(default)]
    pub visit_mode: VisitMode,
}

impl ReturnConfig {
    pub fn new(gamma: f64) -> Self {
        ReturnConfig {
            gamma,
            lambda_mix: 0.0,
            timeout_mode: TimeoutMode::default(),
            visit_mode: VisitMode::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ReturnError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ReturnError::BadGamma(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda_mix) {
            return Err(ReturnError::BadLambda(self.lambda_mix));
        }
        Ok(())
    }
}

/// Return-to-go for every step of a trajectory, computed backward in O(T).
///
/// The final step always uses `R_T = r_T`: a terminated episode has no
/// future, and a timed-out one has no computable tail, so the numeric
/// recursion is identical under both [`TimeoutMode`]s. The modes differ only
/// in whether [`annotate_dataset`] keeps the values of timed-out episodes.
pub fn compute_return_to_go(traj: &Trajectory, cfg: &ReturnConfig) -> Result<Vec<f64>, ReturnError> {
    cfg.validate()?;
    let ts = traj.transitions();
    let mut out = vec![0.0; ts.len()];
    let mut acc = 0.0;
    for (i, t) in ts.iter().enumerate().rev() {
        acc = t.reward + if i + 1 == ts.len() { 0.0 } else { cfg.gamma * acc };
        out[i] = acc;
    }
    Ok(out)
}

/// Blended regression target `(1 - lambda) * R + lambda * (r + gamma * q_next)`.
pub fn compute_mixed_target(
    return_to_go: f64,
    reward: f64,
    gamma: f64,
    q_next: f64,
    lambda: f64,
) -> Result<f64, ReturnError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ReturnError::BadLambda(lambda));
    }
    Ok((1.0 - lambda) * return_to_go + lambda * (reward + gamma * q_next))
}

/// Entropy-augmented return-to-go:
/// `R_t = sum_{n=0}^{T-t} gamma^n r_{t+n} + alpha * sum_{n=1}^{T-t} gamma^n H(s_{t+n})`.
///
/// The entropy sum starts one step ahead of `t` — the current state's entropy
/// is not part of its own return — and covers the *visited* future states of
/// the trajectory. `entropy(s)` must be defined for every state; a sampled
/// estimate is fine as long as it is a pure function of the state.
pub fn compute_soft_return_to_go(
    traj: &Trajectory,
    cfg: &ReturnConfig,
    temperature: f64,
    entropy: &dyn Fn(&Observation) -> f64,
) -> Result<Vec<f64>, ReturnError> {
    cfg.validate()?;
    if temperature < 0.0 {
        return Err(ReturnError::BadTemperature(temperature));
    }
    let ts = traj.transitions();
    let mut out = vec![0.0; ts.len()];
    let mut acc = 0.0;
    for (i, t) in ts.iter().enumerate().rev() {
        acc = if i + 1 == ts.len() {
            t.reward
        } else {
            // The next transition's state is s_{i+1}; its entropy is
            // discounted by one step relative to position i.
            t.reward + cfg.gamma * (temperature * entropy(&ts[i + 1].state) + acc)
        };
        out[i] = acc;
    }
    Ok(out)
}

/// Which annotation to compute. `Soft` carries the entropy estimator so a
/// soft request without one is unrepresentable.
pub enum AnnotationMode<'a> {
    Hard,
    Soft { temperature: f64, entropy: &'a dyn Fn(&Observation) -> f64 },
}

/// Returns a copy of the dataset with per-step return annotations.
///
/// `Hard` fills `rtg`, `Soft` fills `soft_rtg`; the other field is preserved
/// when it was computed at the same `gamma` and dropped otherwise. Under
/// [`TimeoutMode::BootstrapExcluded`], trajectories ending in `Timeout` are
/// left unannotated so downstream value regression skips them. The function
/// is pure: annotating twice with the same inputs yields identical bytes.
pub fn annotate_dataset(
    ds: &OfflineDataset,
    cfg: &ReturnConfig,
    mode: AnnotationMode<'_>,
) -> Result<OfflineDataset, ReturnError> {
    cfg.validate()?;
    if ds.trajectories.is_empty() {
        return Err(ReturnError::EmptyDataset);
    }
    let keep_other = matches!(&ds.annotations, Some(a) if a.gamma == Some(cfg.gamma));
    let mut per_step = Vec::with_capacity(ds.trajectories.len());
    for (ti, traj) in ds.trajectories.iter().enumerate() {
        let excluded = cfg.timeout_mode == TimeoutMode::BootstrapExcluded
            && traj.last_done_kind() == DoneKind::Timeout;
        let values = if excluded {
            None
        } else {
            Some(match &mode {
                AnnotationMode::Hard => compute_return_to_go(traj, cfg)?,
                AnnotationMode::Soft { temperature, entropy } => {
                    compute_soft_return_to_go(traj, cfg, *temperature, entropy)?
                }
            })
        };
        let mut steps = Vec::with_capacity(traj.horizon());
        for si in 0..traj.horizon() {
            let old = if keep_other {
                ds.annotations
                    .as_ref()
                    .and_then(|a| a.per_step.get(ti))
                    .and_then(|s| s.get(si))
                    .copied()
                    .unwrap_or_default()
            } else {
                StepAnnotation::default()
            };
            let v = values.as_ref().map(|v| v[si]);
            steps.push(match mode {
                AnnotationMode::Hard => StepAnnotation { rtg: v, soft_rtg: old.soft_rtg },
                AnnotationMode::Soft { .. } => StepAnnotation { rtg: old.rtg, soft_rtg: v },
            });
        }
        per_step.push(steps);
    }
    let mut out = ds.clone();
    out.annotations = Some(DatasetAnnotations { gamma: Some(cfg.gamma), per_step });
    Ok(out)
}

/// Checks the backward recursion `R_t = r_t + gamma * R_{t+1}` on every
/// annotated `NotDone` step, returning the largest absolute violation.
pub fn max_recursion_residual(ds: &OfflineDataset, gamma: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let Some(ann) = &ds.annotations else { return worst };
    for (ti, traj) in ds.trajectories.iter().enumerate() {
        let ts = traj.transitions();
        let Some(steps) = ann.per_step.get(ti) else { continue };
        for i in 0..ts.len().saturating_sub(1) {
            if ts[i].done_kind != DoneKind::NotDone {
                continue;
            }
            if let (Some(r_t), Some(r_next)) = (steps[i].rtg, steps[i + 1].rtg) {
                worst = worst.max((r_t - (ts[i].reward + gamma * r_next)).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Action, Transition};
    use proptest::prelude::*;

    fn chain(rewards: &[f64], done: DoneKind) -> Trajectory {
        let last = rewards.len() - 1;
        let ts = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| Transition {
                state: Observation::Discrete(i),
                action: Action::Discrete(0),
                reward: r,
                next_state: Observation::Discrete(i + 1),
                done_kind: if i == last { done } else { DoneKind::NotDone },
            })
            .collect();
        Trajectory::new(ts).unwrap()
    }

    #[test]
    fn rtg_matches_hand_computed_chain() {
        // rewards (0, -1, 0, -2, +3) at gamma = 1 -> [0, 0, 1, 1, 3]
        let traj = chain(&[0.0, -1.0, 0.0, -2.0, 3.0], DoneKind::Termination);
        let cfg = ReturnConfig::new(1.0);
        assert_eq!(compute_return_to_go(&traj, &cfg).unwrap(), vec![0.0, 0.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn rtg_discounts_two_step_chain() {
        let traj = chain(&[1.0, 1.0], DoneKind::Termination);
        let cfg = ReturnConfig::new(0.9);
        assert_eq!(compute_return_to_go(&traj, &cfg).unwrap(), vec![1.9, 1.0]);
    }

    #[test]
    fn rtg_single_step_is_reward() {
        for done in [DoneKind::Termination, DoneKind::Timeout] {
            let traj = chain(&[-2.5], done);
            let cfg = ReturnConfig::new(0.5);
            assert_eq!(compute_return_to_go(&traj, &cfg).unwrap(), vec![-2.5]);
        }
    }

    #[test]
    fn rtg_rejects_bad_gamma() {
        let traj = chain(&[1.0], DoneKind::Termination);
        let mut cfg = ReturnConfig::new(0.0);
        assert!(matches!(compute_return_to_go(&traj, &cfg), Err(ReturnError::BadGamma(_))));
        cfg.gamma = 1.5;
        assert!(matches!(compute_return_to_go(&traj, &cfg), Err(ReturnError::BadGamma(_))));
    }

    #[test]
    fn mixed_target_endpoints_and_midpoint() {
        assert_eq!(compute_mixed_target(5.0, 1.0, 0.9, 2.0, 0.0).unwrap(), 5.0);
        assert_eq!(compute_mixed_target(5.0, 1.0, 0.9, 2.0, 1.0).unwrap(), 1.0 + 0.9 * 2.0);
        let mid = compute_mixed_target(4.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((mid - 3.0).abs() < 1e-15);
        assert!(compute_mixed_target(4.0, 1.0, 1.0, 1.0, 1.2).is_err());
    }

    #[test]
    fn soft_rtg_matches_worked_example() {
        // Two steps, rewards [1, 2], gamma 1, alpha 0.5, H(s_1) = 2 -> [4, 2].
        let traj = chain(&[1.0, 2.0], DoneKind::Termination);
        let cfg = ReturnConfig::new(1.0);
        let entropy = |s: &Observation| match s {
            Observation::Discrete(1) => 2.0,
            _ => panic!("entropy queried at an unexpected state"),
        };
        let soft = compute_soft_return_to_go(&traj, &cfg, 0.5, &entropy).unwrap();
        assert_eq!(soft, vec![4.0, 2.0]);
    }

    #[test]
    fn soft_rtg_single_step_has_no_entropy_term() {
        let traj = chain(&[3.0], DoneKind::Termination);
        let cfg = ReturnConfig::new(0.9);
        let soft = compute_soft_return_to_go(&traj, &cfg, 10.0, &|_| 99.0).unwrap();
        assert_eq!(soft, vec![3.0]);
    }

    #[test]
    fn soft_rtg_rejects_negative_temperature() {
        let traj = chain(&[1.0], DoneKind::Termination);
        let cfg = ReturnConfig::new(1.0);
        assert!(matches!(
            compute_soft_return_to_go(&traj, &cfg, -0.1, &|_| 0.0),
            Err(ReturnError::BadTemperature(_))
        ));
    }

    #[test]
    fn annotate_fills_rtg_and_is_idempotent() {
        let traj = chain(&[0.0, -1.0, 0.0, -2.0, 3.0], DoneKind::Termination);
        let ds = OfflineDataset::new(vec![traj], "motivational", 0);
        let cfg = ReturnConfig::new(1.0);
        let once = annotate_dataset(&ds, &cfg, AnnotationMode::Hard).unwrap();
        let rtg: Vec<f64> =
            once.annotations.as_ref().unwrap().per_step[0].iter().map(|a| a.rtg.unwrap()).collect();
        assert_eq!(rtg, vec![0.0, 0.0, 1.0, 1.0, 3.0]);
        let twice = annotate_dataset(&once, &cfg, AnnotationMode::Hard).unwrap();
        assert_eq!(
            serde_json::to_vec(&once.annotations).unwrap(),
            serde_json::to_vec(&twice.annotations).unwrap()
        );
    }

    #[test]
    fn annotate_rejects_empty_dataset() {
        let ds = OfflineDataset::new(vec![], "empty", 0);
        let cfg = ReturnConfig::new(1.0);
        assert!(matches!(
            annotate_dataset(&ds, &cfg, AnnotationMode::Hard),
            Err(ReturnError::EmptyDataset)
        ));
    }

    #[test]
    fn bootstrap_excluded_drops_timed_out_trajectories() {
        let term = chain(&[1.0, 2.0], DoneKind::Termination);
        let cut = chain(&[5.0, 6.0], DoneKind::Timeout);
        let ds = OfflineDataset::new(vec![term, cut], "mixed", 0);
        let mut cfg = ReturnConfig::new(0.9);
        cfg.timeout_mode = TimeoutMode::BootstrapExcluded;
        let out = annotate_dataset(&ds, &cfg, AnnotationMode::Hard).unwrap();
        let ann = out.annotations.unwrap();
        assert!(ann.per_step[0].iter().all(|a| a.rtg.is_some()));
        assert!(ann.per_step[1].iter().all(|a| a.rtg.is_none()));
    }

    #[test]
    fn soft_annotation_preserves_hard_values_at_same_gamma() {
        let traj = chain(&[1.0, 2.0], DoneKind::Termination);
        let ds = OfflineDataset::new(vec![traj], "both", 0);
        let cfg = ReturnConfig::new(1.0);
        let hard = annotate_dataset(&ds, &cfg, AnnotationMode::Hard).unwrap();
        let both =
            annotate_dataset(&hard, &cfg, AnnotationMode::Soft { temperature: 0.0, entropy: &|_| 1.0 })
                .unwrap();
        let steps = &both.annotations.unwrap().per_step[0];
        assert_eq!(steps[0].rtg, Some(3.0));
        assert_eq!(steps[0].soft_rtg, Some(3.0)); // alpha = 0 soft return equals hard
    }

    proptest! {
        #[test]
        fn rtg_recursion_holds(
            rewards in proptest::collection::vec(-10.0f64..10.0, 1..40),
            gamma in 0.05f64..1.0,
        ) {
            let traj = chain(&rewards, DoneKind::Termination);
            let cfg = ReturnConfig::new(gamma);
            let rtg = compute_return_to_go(&traj, &cfg).unwrap();
            for i in 0..rewards.len() - 1 {
                let residual = (rtg[i] - (rewards[i] + gamma * rtg[i + 1])).abs();
                prop_assert!(residual <= 1e-9);
            }
            prop_assert!((rtg[rewards.len() - 1] - rewards[rewards.len() - 1]).abs() <= 1e-12);
        }

        #[test]
        fn soft_rtg_with_zero_temperature_equals_hard(
            rewards in proptest::collection::vec(-5.0f64..5.0, 1..30),
            gamma in 0.1f64..1.0,
        ) {
            let traj = chain(&rewards, DoneKind::Termination);
            let cfg = ReturnConfig::new(gamma);
            let hard = compute_return_to_go(&traj, &cfg).unwrap();
            let soft = compute_soft_return_to_go(&traj, &cfg, 0.0, &|_| 123.456).unwrap();
            for (h, s) in hard.iter().zip(&soft) {
                prop_assert!((h - s).abs() <= 1e-12);
            }
        }

        #[test]
        fn mixed_target_interpolates(
            r in -10.0f64..10.0, rew in -5.0f64..5.0, q in -8.0f64..8.0, lambda in 0.0f64..1.0,
        ) {
            let t = compute_mixed_target(r, rew, 0.9, q, lambda).unwrap();
            let lo = r.min(rew + 0.9 * q);
            let hi = r.max(rew + 0.9 * q);
            prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
        }
    }
}
