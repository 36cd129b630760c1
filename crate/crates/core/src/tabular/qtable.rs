//! The tabular action-value container and its initialization strategies.

use serde::{Deserialize, Serialize};

use super::TabularError;
use crate::envs::TabularMdp;

/// A dense `[state][action]` table of action values together with the masks
/// the learning rules need: which pairs the dataset has visited, which
/// actions each state exposes, and which states are terminal (pinned at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub values: Vec<Vec<f64>>,
    pub gamma: f64,
    pub visited: Vec<Vec<bool>>,
    pub available: Vec<Vec<bool>>,
    pub terminal: Vec<bool>,
}

impl QTable {
    /// Zero-initialized table shaped like (and masked by) the MDP.
    pub fn zeros_for(mdp: &TabularMdp, gamma: f64) -> Self {
        QTable {
            values: vec![vec![0.0; mdp.n_actions]; mdp.n_states],
            gamma,
            visited: vec![vec![false; mdp.n_actions]; mdp.n_states],
            available: mdp.available.clone(),
            terminal: mdp.terminal.clone(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn n_actions(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    /// `max_a Q(s, a)` over available actions; terminal states contribute 0.
    pub fn max_available(&self, state: usize) -> f64 {
        if self.terminal[state] {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.n_actions() {
            if self.available[state][a] {
                best = best.max(self.values[state][a]);
            }
        }
        best
    }

    /// Greedy action among available actions (lowest index wins ties).
    pub fn greedy_action(&self, state: usize) -> usize {
        let mut best = usize::MAX;
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..self.n_actions() {
            if self.available[state][a] && self.values[state][a] > best_v {
                best_v = self.values[state][a];
                best = a;
            }
        }
        best
    }

    /// Sup-norm distance over available pairs of non-terminal states.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.n_states() {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.n_actions() {
                if self.available[s][a] {
                    worst = worst.max((self.values[s][a] - other.values[s][a]).abs());
                }
            }
        }
        worst
    }

    /// True when the greedy choice at every state with at least one visited
    /// action attains the optimal value (ties with the optimum allowed).
    pub fn greedy_matches_optimal_on_visited(&self, optimal: &QTable, tol: f64) -> bool {
        for s in 0..self.n_states() {
            if self.terminal[s] || !self.visited[s].iter().any(|&v| v) {
                continue;
            }
            let greedy = self.greedy_action(s);
            let best = optimal.max_available(s);
            if (optimal.values[s][greedy] - best).abs() > tol {
                return false;
            }
        }
        true
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp) -> Result<(), TabularError> {
        let got = (self.n_states(), self.n_actions());
        let want = (mdp.n_states, mdp.n_actions);
        if got != want {
            return Err(TabularError::ShapeMismatch { got, want });
        }
        Ok(())
    }
}

/// How to seed the value table before learning.
#[derive(Debug, Clone)]
pub enum InitStrategy {
    Zero,
    McFirstVisit,
    McEveryVisit,
    /// `beta * anchor + (1 - beta) * 0`, the interpolated family used by the
    /// initialization study.
    Interpolated { beta: f64, anchor: QTable },
    Custom(QTable),
}

impl InitStrategy {
    pub fn label(&self) -> String {
        match self {
            InitStrategy::Zero => "zero".into(),
            InitStrategy::McFirstVisit => "mc-first-visit".into(),
            InitStrategy::McEveryVisit => "mc-every-visit".into(),
            InitStrategy::Interpolated { beta, .. } => format!("interpolated-{beta}"),
            InitStrategy::Custom(_) => "custom".into(),
        }
    }
}
