//! Finite MDPs: the hand-built four-state chain used throughout the tabular
//! study, randomized MDP generators, and an exact value-iteration solver that
//! serves as the oracle for everything else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::Environment;
use super::EnvError;
use crate::data::{Action, DoneKind, Observation, OfflineDataset, Trajectory, Transition};
use crate::tabular::QTable;

/// A finite MDP with optional per-state action availability.
///
/// `transition[s][a]` is a distribution over next states (rows of available
/// pairs sum to 1), `reward[s][a]` is the immediate reward, and terminal
/// states absorb with zero reward. `available[s][a]` restricts the action set
/// per state; maxima over actions are always taken over available actions
/// only. Random MDPs leave everything available, but edge states of hand-built
/// chains expose a single direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `[s][a]` -> distribution over next states.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[s][a]` -> immediate reward.
    pub reward: Vec<Vec<f64>>,
    pub terminal: Vec<bool>,
    pub initial_dist: Vec<f64>,
    pub available: Vec<Vec<bool>>,
}

impl TabularMdp {
    pub fn validate(&self) -> Result<(), EnvError> {
        let n = self.n_states;
        let m = self.n_actions;
        if n < 1 || m < 1 {
            return Err(EnvError::BadParameter("need at least one state and action".into()));
        }
        let shapes_ok = self.transition.len() == n
            && self.reward.len() == n
            && self.terminal.len() == n
            && self.initial_dist.len() == n
            && self.available.len() == n
            && self.transition.iter().all(|r| r.len() == m && r.iter().all(|p| p.len() == n))
            && self.reward.iter().all(|r| r.len() == m)
            && self.available.iter().all(|r| r.len() == m);
        if !shapes_ok {
            return Err(EnvError::BadParameter("inconsistent table shapes".into()));
        }
        for s in 0..n {
            for a in 0..m {
                if !self.available[s][a] {
                    continue;
                }
                let sum: f64 = self.transition[s][a].iter().sum();
                if (sum - 1.0).abs() > 1e-12 || self.transition[s][a].iter().any(|&p| p < 0.0) {
                    return Err(EnvError::BadTransitionRow { state: s, action: a, sum });
                }
                if self.terminal[s] {
                    // Terminal states absorb with zero reward.
                    if self.reward[s][a] != 0.0 || self.transition[s][a][s] != 1.0 {
                        return Err(EnvError::BadParameter(format!(
                            "terminal state {s} must self-loop with zero reward"
                        )));
                    }
                }
            }
            if !self.available[s].iter().any(|&b| b) {
                return Err(EnvError::BadParameter(format!("state {s} has no available action")));
            }
        }
        let d0: f64 = self.initial_dist.iter().sum();
        if (d0 - 1.0).abs() > 1e-12 {
            return Err(EnvError::BadParameter(format!("initial distribution sums to {d0}")));
        }
        Ok(())
    }

    /// Maximum over available actions of `q[s'][a']`, zero at terminal states.
    pub fn max_available(&self, values: &[Vec<f64>], state: usize) -> f64 {
        if self.terminal[state] {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.n_actions {
            if self.available[state][a] {
                best = best.max(values[state][a]);
            }
        }
        best
    }
}

/// An episodic wrapper around a [`TabularMdp`]: transitions are sampled from
/// the rows of `transition`, episodes end with `Termination` on entering a
/// terminal state or `Timeout` at `episode_cap` steps.
#[derive(Debug, Clone)]
pub struct TabularEnvironment {
    pub mdp: TabularMdp,
    pub episode_cap: usize,
    state: usize,
    t: usize,
}

impl TabularEnvironment {
    pub fn new(mdp: TabularMdp, episode_cap: usize) -> Self {
        TabularEnvironment { mdp, episode_cap, state: 0, t: 0 }
    }
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl Environment for TabularEnvironment {
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Observation {
        self.state = sample_categorical(&self.mdp.initial_dist, rng);
        self.t = 0;
        Observation::Discrete(self.state)
    }

    fn step(
        &mut self,
        action: &Action,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Observation, f64, DoneKind), EnvError> {
        let a = action.as_discrete().ok_or(EnvError::BadAction)?;
        if a >= self.mdp.n_actions || !self.mdp.available[self.state][a] {
            return Err(EnvError::BadAction);
        }
        let reward = self.mdp.reward[self.state][a];
        let next = sample_categorical(&self.mdp.transition[self.state][a], rng);
        self.t += 1;
        self.state = next;
        let done = if self.mdp.terminal[next] {
            DoneKind::Termination
        } else if self.t >= self.episode_cap {
            DoneKind::Timeout
        } else {
            DoneKind::NotDone
        };
        Ok((Observation::Discrete(next), reward, done))
    }
}

/// Action indices for left/right chains.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// The four-state chain `0 - 1 - 2 - [3]` with a single logged episode.
///
/// State 0 only moves right (reward 0), state 1 moves left (reward -1) or
/// right (reward -2), state 2 moves right into the terminal state (reward
/// +3). The logged episode is `0 -> 1 -> 0 -> 1 -> 2 -> 3` with rewards
/// `(0, -1, 0, -2, +3)`, so its undiscounted returns-to-go are
/// `[0, 0, 1, 1, 3]`.
pub fn motivational_mdp() -> (TabularMdp, OfflineDataset) {
    let n = 4;
    let m = 2;
    let mut transition = vec![vec![vec![0.0; n]; m]; n];
    let mut reward = vec![vec![0.0; m]; n];
    let mut available = vec![vec![false; m]; n];

    available[0][RIGHT] = true;
    transition[0][RIGHT][1] = 1.0;
    reward[0][RIGHT] = 0.0;

    available[1][LEFT] = true;
    transition[1][LEFT][0] = 1.0;
    reward[1][LEFT] = -1.0;
    available[1][RIGHT] = true;
    transition[1][RIGHT][2] = 1.0;
    reward[1][RIGHT] = -2.0;

    available[2][RIGHT] = true;
    transition[2][RIGHT][3] = 1.0;
    reward[2][RIGHT] = 3.0;

    // Terminal state absorbs with zero reward.
    for a in 0..m {
        available[3][a] = true;
        transition[3][a][3] = 1.0;
    }

    let mdp = TabularMdp {
        n_states: n,
        n_actions: m,
        transition,
        reward,
        terminal: vec![false, false, false, true],
        initial_dist: vec![1.0, 0.0, 0.0, 0.0],
        available,
    };
    debug_assert!(mdp.validate().is_ok());

    let path: [(usize, usize, f64, usize); 5] = [
        (0, RIGHT, 0.0, 1),
        (1, LEFT, -1.0, 0),
        (0, RIGHT, 0.0, 1),
        (1, RIGHT, -2.0, 2),
        (2, RIGHT, 3.0, 3),
    ];
    let last = path.len() - 1;
    let transitions = path
        .iter()
        .enumerate()
        .map(|(i, &(s, a, r, s2))| Transition {
            state: Observation::Discrete(s),
            action: Action::Discrete(a),
            reward: r,
            next_state: Observation::Discrete(s2),
            done_kind: if i == last { DoneKind::Termination } else { DoneKind::NotDone },
        })
        .collect();
    let traj = Trajectory::new(transitions).expect("hand-built episode is contiguous");
    let ds = OfflineDataset::new(vec![traj], "motivational-chain", 0);
    (mdp, ds)
}

/// A dense random MDP: every transition row is a normalized vector of Exp(1)
/// draws (a flat Dirichlet), rewards are uniform in `[-reward_scale,
/// reward_scale]`, there are no terminal states, and the initial distribution
/// is uniform. Identical seeds produce identical MDPs.
pub fn random_tabular_mdp(
    n_states: usize,
    n_actions: usize,
    seed: u64,
    reward_scale: f64,
) -> Result<TabularMdp, EnvError> {
    if n_states < 2 || n_actions < 2 {
        return Err(EnvError::BadParameter("random MDPs need >= 2 states and actions".into()));
    }
    if !reward_scale.is_finite() || reward_scale <= 0.0 {
        return Err(EnvError::BadParameter("reward_scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    let mut reward = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<f64> = (0..n_states)
                .map(|_| {
                    let u: f64 = rng.random();
                    -(1.0 - u).ln()
                })
                .collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            // Renormalize exactly so the validator's 1e-12 row-sum check holds.
            let sum2: f64 = row.iter().sum();
            row[n_states - 1] += 1.0 - sum2;
            transition[s][a] = row;
            reward[s][a] = rng.random_range(-reward_scale..reward_scale);
        }
    }
    let mdp = TabularMdp {
        n_states,
        n_actions,
        transition,
        reward,
        terminal: vec![false; n_states],
        initial_dist: vec![1.0 / n_states as f64; n_states],
        available: vec![vec![true; n_actions]; n_states],
    };
    mdp.validate()?;
    Ok(mdp)
}

/// Exact optimal action values by value iteration on
/// `Q(s,a) = r(s,a) + gamma * E_s'[max_a' Q(s',a')]`, iterated until the
/// sup-norm residual drops below `tol`.
pub fn solve_optimal_tabular(mdp: &TabularMdp, gamma: f64, tol: f64) -> Result<QTable, EnvError> {
    mdp.validate()?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(EnvError::BadParameter(format!("gamma {gamma} outside (0, 1]")));
    }
    let max_iters = 200_000;
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
        residual = 0.0;
        for s in 0..mdp.n_states {
            if mdp.terminal[s] {
                continue;
            }
            for a in 0..mdp.n_actions {
                if !mdp.available[s][a] {
                    continue;
                }
                let mut exp_next = 0.0;
                for (s2, &p) in mdp.transition[s][a].iter().enumerate() {
                    if p > 0.0 {
                        exp_next += p * mdp.max_available(&q, s2);
                    }
                }
                next[s][a] = mdp.reward[s][a] + gamma * exp_next;
                residual = residual.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if residual <= tol {
            let mut table = QTable::zeros_for(mdp, gamma);
            table.values = q;
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    table.visited[s][a] = table.available[s][a];
                }
            }
            return Ok(table);
        }
    }
    Err(EnvError::SolverStalled { residual, tol, iters: max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::returns::{compute_return_to_go, ReturnConfig};

    #[test]
    fn motivational_mdp_validates_and_logs_expected_episode() {
        let (mdp, ds) = motivational_mdp();
        mdp.validate().unwrap();
        assert_eq!(ds.trajectories.len(), 1);
        let traj = &ds.trajectories[0];
        assert_eq!(traj.horizon(), 5);
        let rtg = compute_return_to_go(traj, &ReturnConfig::new(1.0)).unwrap();
        assert_eq!(rtg, vec![0.0, 0.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn motivational_optimal_values_match_hand_solution() {
        let (mdp, _) = motivational_mdp();
        let q = solve_optimal_tabular(&mdp, 1.0, 1e-12).unwrap();
        assert_eq!(q.values[0][RIGHT], 1.0);
        assert_eq!(q.values[1][LEFT], 0.0);
        assert_eq!(q.values[1][RIGHT], 1.0);
        assert_eq!(q.values[2][RIGHT], 3.0);
    }

    #[test]
    fn random_mdp_is_seed_deterministic_with_unit_rows() {
        let a = random_tabular_mdp(6, 3, 42, 1.0).unwrap();
        let b = random_tabular_mdp(6, 3, 42, 1.0).unwrap();
        assert_eq!(a, b);
        let c = random_tabular_mdp(6, 3, 43, 1.0).unwrap();
        assert_ne!(a, c);
        for s in 0..6 {
            for act in 0..3 {
                let sum: f64 = a.transition[s][act].iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn solver_handles_gamma_zero_limit() {
        // At very small gamma the optimal Q is essentially the reward table.
        let mdp = random_tabular_mdp(5, 3, 7, 1.0).unwrap();
        let q = solve_optimal_tabular(&mdp, 1e-9, 1e-14).unwrap();
        for s in 0..5 {
            for a in 0..3 {
                assert!((q.values[s][a] - mdp.reward[s][a]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn solver_residual_is_below_tolerance() {
        let mdp = random_tabular_mdp(10, 4, 7, 1.0).unwrap();
        let gamma = 0.9;
        let q = solve_optimal_tabular(&mdp, gamma, 1e-12).unwrap();
        // One more exact backup must move nothing by more than the tolerance
        // scaled to the fixed-point (1 / (1 - gamma) conditioning).
        let mut worst: f64 = 0.0;
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let mut exp_next = 0.0;
                for (s2, &p) in mdp.transition[s][a].iter().enumerate() {
                    exp_next += p * mdp.max_available(&q.values, s2);
                }
                let backed = mdp.reward[s][a] + gamma * exp_next;
                worst = worst.max((backed - q.values[s][a]).abs());
            }
        }
        assert!(worst <= 1e-10, "residual {worst}");
    }
}
