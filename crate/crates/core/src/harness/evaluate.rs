//! Greedy-policy evaluation, anchor measurement, normalized scores, and the
//! windowed/threshold summaries built from evaluation curves.

use serde::{Deserialize, Serialize};

use crate::agents::{ActorCritic, GreedyPolicy};
use crate::envs::{
    mean_return, scripted_behavior, BehaviorPolicySpec, ContinuousEnvSpec, UniformContinuousPolicy,
};

use super::HarnessError;

/// Fixed stream for anchor measurement so every experiment against the same
/// environment shares the same reference returns.
pub const ANCHOR_SEED: u64 = 0xA0C4_0DE5;

/// Trailing evaluations averaged before a threshold comparison.
pub const SMOOTHING_WINDOW: usize = 3;

/// Mean undiscounted return of the agent's deterministic (squashed-mean)
/// policy over `n_episodes`, on a stream derived only from `seed` — never
/// from the training generator, so evaluation cannot perturb training.
pub fn evaluate_policy(
    spec: &ContinuousEnvSpec,
    agent: &ActorCritic,
    n_episodes: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    if n_episodes == 0 {
        return Err(HarnessError::BadConfig("evaluation needs at least one episode".into()));
    }
    let policy = GreedyPolicy { agent };
    Ok(mean_return(&mut spec.env(), &policy, n_episodes, seed)?)
}

/// Reference returns for score normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreAnchors {
    pub random: f64,
    pub expert: f64,
}

/// Measures both anchors on the given environment: uniform random actions
/// for the floor, the deterministic scripted controller for the ceiling.
pub fn measure_anchors(
    spec: &ContinuousEnvSpec,
    n_episodes: usize,
    seed: u64,
) -> Result<ScoreAnchors, HarnessError> {
    if n_episodes == 0 {
        return Err(HarnessError::BadConfig("anchor measurement needs episodes".into()));
    }
    let uniform = UniformContinuousPolicy { act_dim: spec.act_dim };
    let random = mean_return(&mut spec.env(), &uniform, n_episodes, seed)?;
    let expert_policy = scripted_behavior(spec, &BehaviorPolicySpec::scripted(1.0))?;
    let expert = mean_return(&mut spec.env(), &expert_policy, n_episodes, seed ^ 0x00E5_7EED)?;
    Ok(ScoreAnchors { random, expert })
}

/// Linear normalization `(raw - random) / (expert - random)`; 0 at the
/// random anchor, 1 at the expert anchor, deliberately not clipped.
pub fn normalized_score(raw: f64, anchors: &ScoreAnchors) -> Result<f64, HarnessError> {
    let span = anchors.expert - anchors.random;
    if !(span.is_finite() && span > 0.0) {
        return Err(HarnessError::DegenerateAnchors {
            random: anchors.random,
            expert: anchors.expert,
        });
    }
    Ok((raw - anchors.random) / span)
}

/// One evaluation on the shared step axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// 1-based count of completed training steps at evaluation time.
    pub step: usize,
    pub raw_return: f64,
    pub normalized: f64,
}

/// First step at which the trailing 3-evaluation mean of the normalized
/// score reaches `threshold`. Needs a full smoothing window, so nothing can
/// fire before the third evaluation.
pub fn steps_to_threshold(curve: &[EvalPoint], threshold: f64) -> Option<usize> {
    for (i, p) in curve.iter().enumerate().skip(SMOOTHING_WINDOW - 1) {
        let window = &curve[i + 1 - SMOOTHING_WINDOW..=i];
        let avg = window.iter().map(|q| q.normalized).sum::<f64>() / SMOOTHING_WINDOW as f64;
        if avg >= threshold {
            return Some(p.step);
        }
    }
    None
}

/// First step of the reporting window: the final third of the improvement
/// phase, or of the whole run when no improvement phase exists. Pre-training
/// steps stay on the axis, so efficiency comparisons include their cost.
pub fn window_start(total_steps: usize, rl_first_step: Option<usize>) -> usize {
    let span = match rl_first_step {
        Some(s) if s <= total_steps => total_steps - s + 1,
        _ => total_steps,
    };
    total_steps.saturating_sub(span / 3) + 1
}

/// Mean normalized score over the evaluations at or past `start`; falls back
/// to the last evaluation when none land in the window.
pub fn windowed_score(curve: &[EvalPoint], start: usize) -> Option<f64> {
    let tail: Vec<f64> =
        curve.iter().filter(|p| p.step >= start).map(|p| p.normalized).collect();
    if tail.is_empty() {
        return curve.last().map(|p| p.normalized);
    }
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Aggregate over the evaluation window and all seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean normalized score over every in-window evaluation of every seed.
    pub mean: f64,
    /// Population standard deviation of the same collection.
    pub std: f64,
    /// Seeds that completed and contributed.
    pub n_seeds: usize,
    /// Median over seeds of the per-seed threshold crossing; absent when no
    /// threshold was set or the median seed never crossed.
    pub steps_to_threshold: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentConfig;
    use crate::envs::pointmass_env;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalization_hits_the_anchor_points() {
        let anchors = ScoreAnchors { random: 0.0, expert: 100.0 };
        assert_eq!(normalized_score(0.0, &anchors).unwrap(), 0.0);
        assert_eq!(normalized_score(100.0, &anchors).unwrap(), 1.0);
        assert_eq!(normalized_score(50.0, &anchors).unwrap(), 0.5);
        let shifted = ScoreAnchors { random: -80.0, expert: -20.0 };
        assert_eq!(normalized_score(-80.0, &shifted).unwrap(), 0.0);
        assert_eq!(normalized_score(-20.0, &shifted).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_anchors_are_rejected() {
        for (random, expert) in [(1.0, 1.0), (2.0, 1.0), (f64::NAN, 1.0)] {
            let anchors = ScoreAnchors { random, expert };
            assert!(matches!(
                normalized_score(0.5, &anchors),
                Err(HarnessError::DegenerateAnchors { .. })
            ));
        }
    }

    #[test]
    fn normalization_is_invariant_under_positive_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let random: f64 = rng.random_range(-50.0..50.0);
            let expert = random + rng.random_range(0.1..100.0);
            let raw = rng.random_range(-100.0..100.0);
            let scale = rng.random_range(0.01..10.0);
            let shift = rng.random_range(-20.0..20.0);
            let base =
                normalized_score(raw, &ScoreAnchors { random, expert }).unwrap();
            let mapped = normalized_score(
                scale * raw + shift,
                &ScoreAnchors { random: scale * random + shift, expert: scale * expert + shift },
            )
            .unwrap();
            assert!((base - mapped).abs() < 1e-9, "{base} vs {mapped}");
        }
    }

    #[test]
    fn threshold_crossing_waits_for_a_full_smoothing_window() {
        let p = |step, normalized| EvalPoint { step, raw_return: 0.0, normalized };
        // A single early spike must not trigger.
        let curve =
            vec![p(10, 2.0), p(20, 0.0), p(30, 0.1), p(40, 0.9), p(50, 0.9), p(60, 0.9)];
        assert_eq!(steps_to_threshold(&curve, 0.8), Some(60));
        assert_eq!(steps_to_threshold(&curve, 5.0), None);
        assert_eq!(steps_to_threshold(&curve[..2], 0.0), None);
    }

    #[test]
    fn reporting_window_covers_the_final_third_of_improvement() {
        // Improvement runs on steps 31..=90: a 60-step phase, window = last 20.
        assert_eq!(window_start(90, Some(31)), 71);
        // No improvement phase: final third of the whole run.
        assert_eq!(window_start(90, None), 61);
        // Degenerately short phases keep the last evaluation reachable.
        assert_eq!(window_start(4, Some(3)), 5);
        let p = |step, normalized| EvalPoint { step, raw_return: 0.0, normalized };
        let curve = vec![p(2, 0.25), p(4, 0.75)];
        assert_eq!(windowed_score(&curve, 5), Some(0.75));
        assert_eq!(windowed_score(&curve, 3), Some(0.75));
        assert_eq!(windowed_score(&curve, 1), Some(0.5));
        assert_eq!(windowed_score(&[], 1), None);
    }

    #[test]
    fn evaluation_is_seed_deterministic_and_rejects_zero_episodes() {
        let spec = pointmass_env(1, false).unwrap();
        let mut cfg = AgentConfig::hard(2, 1);
        cfg.hidden = vec![4];
        let agent = ActorCritic::new(cfg, 5).unwrap();
        let a = evaluate_policy(&spec, &agent, 2, 17).unwrap();
        let b = evaluate_policy(&spec, &agent, 2, 17).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            evaluate_policy(&spec, &agent, 0, 17),
            Err(HarnessError::BadConfig(_))
        ));
    }

    #[test]
    fn anchors_separate_random_from_expert() {
        let spec = pointmass_env(1, false).unwrap();
        let anchors = measure_anchors(&spec, 10, ANCHOR_SEED).unwrap();
        assert!(
            anchors.expert > anchors.random,
            "expert {} should beat random {}",
            anchors.expert,
            anchors.random
        );
        let again = measure_anchors(&spec, 10, ANCHOR_SEED).unwrap();
        assert_eq!(anchors, again);
    }
}
