//! Q-learning sweeps over a fixed dataset and Monte-Carlo table
//! initialization from annotated returns.

use std::collections::HashSet;

use super::qtable::{InitStrategy, QTable};
use super::TabularError;
use crate::data::{DoneKind, OfflineDataset, Trajectory};
use crate::envs::TabularMdp;
use crate::returns::VisitMode;

fn discrete_step(
    traj: &Trajectory,
    i: usize,
    n_states: usize,
    n_actions: usize,
) -> Result<(usize, usize, f64, usize, DoneKind), TabularError> {
    let t = &traj.transitions()[i];
    let s = t.state.as_discrete().ok_or(TabularError::NonDiscreteData)?;
    let a = t.action.as_discrete().ok_or(TabularError::NonDiscreteData)?;
    let s2 = t.next_state.as_discrete().ok_or(TabularError::NonDiscreteData)?;
    if s >= n_states || a >= n_actions || s2 >= n_states {
        return Err(TabularError::OutOfRange { state: s.max(s2), action: a, n_states, n_actions });
    }
    Ok((s, a, t.reward, s2, t.done_kind))
}

/// Monte-Carlo initialization: each visited pair gets the mean of its
/// annotated returns-to-go (first occurrence per episode under
/// `FirstVisit`, all occurrences under `EveryVisit`); unvisited pairs stay 0.
///
/// The dataset must be annotated at the same discount; steps without a
/// return annotation (conservatively excluded timeouts) are skipped.
pub fn mc_initialize(
    mdp: &TabularMdp,
    ds: &OfflineDataset,
    gamma: f64,
    visit_mode: VisitMode,
) -> Result<QTable, TabularError> {
    let ann = ds.annotations.as_ref().ok_or(TabularError::MissingAnnotations)?;
    if ann.gamma != Some(gamma) {
        return Err(TabularError::AnnotationGammaMismatch { annotated: ann.gamma, requested: gamma });
    }
    let mut sums = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    let mut counts = vec![vec![0usize; mdp.n_actions]; mdp.n_states];
    for (ti, traj) in ds.trajectories.iter().enumerate() {
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for i in 0..traj.horizon() {
            let (s, a, _, _, _) = discrete_step(traj, i, mdp.n_states, mdp.n_actions)?;
            let Some(rtg) = ann.per_step[ti][i].rtg else { continue };
            if visit_mode == VisitMode::FirstVisit && !seen.insert((s, a)) {
                continue;
            }
            sums[s][a] += rtg;
            counts[s][a] += 1;
        }
    }
    let mut table = QTable::zeros_for(mdp, gamma);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            if counts[s][a] > 0 {
                table.values[s][a] = sums[s][a] / counts[s][a] as f64;
                table.visited[s][a] = true;
            }
        }
    }
    Ok(table)
}

/// One in-place sweep of Q-learning over the dataset in trajectory order:
///
/// `Q(s,a) += lr * (r + gamma * max_a' Q(s',a') - Q(s,a))`
///
/// Updates land immediately, so later steps of the same sweep read earlier
/// updates — the convention that makes the short-chain epoch table exact.
/// The bootstrap term is zero after `Termination` and taken over the
/// *available* actions of `s'` otherwise; `Timeout` steps bootstrap because
/// the process would have continued.
pub fn q_learning_epoch(
    q: &QTable,
    ds: &OfflineDataset,
    lr: f64,
    gamma: f64,
) -> Result<QTable, TabularError> {
    if !(lr > 0.0 && lr <= 1.0) {
        return Err(TabularError::BadLearningRate(lr));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(TabularError::BadGamma(gamma));
    }
    let (n_states, n_actions) = (q.n_states(), q.n_actions());
    let mut next = q.clone();
    for traj in &ds.trajectories {
        for i in 0..traj.horizon() {
            let (s, a, r, s2, done) = discrete_step(traj, i, n_states, n_actions)?;
            let bootstrap = match done {
                DoneKind::Termination => 0.0,
                DoneKind::NotDone | DoneKind::Timeout => gamma * next.max_available(s2),
            };
            let target = r + bootstrap;
            next.values[s][a] += lr * (target - next.values[s][a]);
            next.visited[s][a] = true;
        }
    }
    Ok(next)
}

/// Runs Q-learning sweeps from an initialization strategy, returning the
/// table history with epoch 0 = the post-initialization table. Stops early
/// when a sweep leaves the table exactly unchanged (the fixed point on the
/// dataset); the unchanged table is not appended again.
pub fn run_q_learning(
    mdp: &TabularMdp,
    ds: &OfflineDataset,
    init: &InitStrategy,
    lr: f64,
    gamma: f64,
    max_epochs: usize,
) -> Result<Vec<QTable>, TabularError> {
    let table0 = materialize_init(mdp, Some(ds), init, gamma)?;
    let mut history = vec![table0];
    for _ in 0..max_epochs {
        let next = q_learning_epoch(history.last().unwrap(), ds, lr, gamma)?;
        if next.values == history.last().unwrap().values {
            break;
        }
        history.push(next);
    }
    Ok(history)
}

/// Builds the initial table for a strategy. Monte-Carlo strategies need the
/// dataset (annotated at `gamma`); the interpolated family scales its anchor.
pub fn materialize_init(
    mdp: &TabularMdp,
    ds: Option<&OfflineDataset>,
    init: &InitStrategy,
    gamma: f64,
) -> Result<QTable, TabularError> {
    match init {
        InitStrategy::Zero => Ok(QTable::zeros_for(mdp, gamma)),
        InitStrategy::McFirstVisit => {
            mc_initialize(mdp, ds.ok_or(TabularError::MissingDataset)?, gamma, VisitMode::FirstVisit)
        }
        InitStrategy::McEveryVisit => {
            mc_initialize(mdp, ds.ok_or(TabularError::MissingDataset)?, gamma, VisitMode::EveryVisit)
        }
        InitStrategy::Interpolated { beta, anchor } => {
            if !(0.0..=1.0).contains(beta) {
                return Err(TabularError::BadBeta(*beta));
            }
            anchor.check_shape(mdp)?;
            let mut table = QTable::zeros_for(mdp, gamma);
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    table.values[s][a] = beta * anchor.values[s][a];
                }
            }
            Ok(table)
        }
        InitStrategy::Custom(table) => {
            table.check_shape(mdp)?;
            let mut t = table.clone();
            t.gamma = gamma;
            Ok(t)
        }
    }
}
