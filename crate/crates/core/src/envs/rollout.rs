//! Seeded episode collection: the `Environment`/`Policy` traits and the
//! `rollout` driver that turns them into validated trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EnvError;
use crate::data::{Action, DoneKind, Observation, Trajectory, Transition};

/// An episodic environment. `reset` consumes randomness only for the initial
/// state; `step` may consume randomness for stochastic transitions.
pub trait Environment {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Observation;
    fn step(
        &mut self,
        action: &Action,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Observation, f64, DoneKind), EnvError>;
}

/// Anything that maps an observation to an action. Stochastic policies draw
/// from the provided generator so rollouts stay reproducible.
pub trait Policy {
    fn act(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> Action;
}

/// Collects `n_episodes` episodes with a single ChaCha stream seeded from
/// `seed`: identical `(env, policy, n_episodes, seed)` produce identical
/// trajectories. Every episode ends in `Termination` or `Timeout`, so the
/// resulting trajectories always validate.
pub fn rollout(
    env: &mut dyn Environment,
    policy: &dyn Policy,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut state = env.reset(&mut rng);
        let mut transitions = Vec::new();
        loop {
            let action = policy.act(&state, &mut rng);
            let (next, reward, done) = env.step(&action, &mut rng)?;
            transitions.push(Transition {
                state: state.clone(),
                action,
                reward,
                next_state: next.clone(),
                done_kind: done,
            });
            if done != DoneKind::NotDone {
                break;
            }
            state = next;
        }
        out.push(Trajectory::new(transitions)?);
    }
    Ok(out)
}

/// Mean undiscounted episode return of a policy, using its own seed stream.
pub fn mean_return(
    env: &mut dyn Environment,
    policy: &dyn Policy,
    n_episodes: usize,
    seed: u64,
) -> Result<f64, EnvError> {
    let trajs = rollout(env, policy, n_episodes, seed)?;
    let total: f64 =
        trajs.iter().map(|t| t.transitions().iter().map(|tr| tr.reward).sum::<f64>()).sum();
    Ok(total / n_episodes as f64)
}
