//! The four-state-chain convergence table: epoch-by-epoch values of the four
//! interesting cells under a zero start and a Monte-Carlo start, with the
//! epochs at which the greedy policy and the values themselves first become
//! optimal. Every number in the expected grid is frozen and reproduced
//! bit-for-bit (learning rate 1, undiscounted, in-place sweeps in logged
//! order).

use serde::Serialize;

use super::qlearning::{materialize_init, q_learning_epoch};
use super::qtable::{InitStrategy, QTable};
use super::TabularError;
use crate::envs::{motivational_mdp, solve_optimal_tabular, LEFT, RIGHT};
use crate::returns::{annotate_dataset, AnnotationMode, ReturnConfig, VisitMode};

/// The four cells the table reports, in display order:
/// `Q(0, right), Q(1, left), Q(1, right), Q(2, right)`.
pub const TRACKED_CELLS: [(usize, usize); 4] = [(0, RIGHT), (1, LEFT), (1, RIGHT), (2, RIGHT)];

pub const N_EPOCHS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceGrid {
    pub visit_mode: VisitMode,
    pub learning_rate: f64,
    /// Tracked-cell values per epoch (epoch 0 = the post-init table).
    pub zero_rows: Vec<[f64; 4]>,
    pub mc_rows: Vec<[f64; 4]>,
    pub optimal: [f64; 4],
    /// First epoch whose greedy policy is optimal at every non-terminal state.
    pub zero_greedy_epoch: Option<usize>,
    pub mc_greedy_epoch: Option<usize>,
    /// First epoch whose tracked values all equal the optimal ones.
    pub zero_value_epoch: Option<usize>,
    pub mc_value_epoch: Option<usize>,
}

fn tracked(table: &QTable) -> [f64; 4] {
    TRACKED_CELLS.map(|(s, a)| table.values[s][a])
}

/// Greedy-at-every-state optimality, independent of visitation. A fresh zero
/// table must *fail* this (its arbitrary tie-break at state 1 walks left).
fn greedy_is_optimal(table: &QTable, optimal: &QTable) -> bool {
    for s in 0..table.n_states() {
        if table.terminal[s] {
            continue;
        }
        let g = table.greedy_action(s);
        if (optimal.values[s][g] - optimal.max_available(s)).abs() > 1e-9 {
            return false;
        }
    }
    true
}

/// Tracked-cell values per epoch plus the first epochs at which the greedy
/// policy and the values themselves reach optimality.
type EpochTrace = (Vec<[f64; 4]>, Option<usize>, Option<usize>);

fn epoch_rows(
    init: &InitStrategy,
    ds: &crate::data::OfflineDataset,
    mdp: &crate::envs::TabularMdp,
    optimal: &QTable,
    lr: f64,
) -> Result<EpochTrace, TabularError> {
    let mut table = materialize_init(mdp, Some(ds), init, 1.0)?;
    let mut rows = Vec::with_capacity(N_EPOCHS);
    let mut greedy_epoch = None;
    let mut value_epoch = None;
    for epoch in 0..N_EPOCHS {
        if epoch > 0 {
            table = q_learning_epoch(&table, ds, lr, 1.0)?;
        }
        rows.push(tracked(&table));
        if greedy_epoch.is_none() && greedy_is_optimal(&table, optimal) {
            greedy_epoch = Some(epoch);
        }
        let values_match = tracked(&table)
            .iter()
            .zip(tracked(optimal).iter())
            .all(|(got, want)| (got - want).abs() <= 1e-9);
        if value_epoch.is_none() && values_match {
            value_epoch = Some(epoch);
        }
    }
    Ok((rows, greedy_epoch, value_epoch))
}

/// Runs both initializations on the chain for [`N_EPOCHS`] epochs (no early
/// stopping — converged rows repeat the fixed point) and records when each
/// first becomes greedy-optimal and value-optimal.
pub fn convergence_grid(visit_mode: VisitMode, lr: f64) -> Result<ConvergenceGrid, TabularError> {
    let (mdp, raw) = motivational_mdp();
    let ds = annotate_dataset(&raw, &ReturnConfig::new(1.0), AnnotationMode::Hard)?;
    let optimal = solve_optimal_tabular(&mdp, 1.0, 1e-12)?;
    let mc_init = match visit_mode {
        VisitMode::FirstVisit => InitStrategy::McFirstVisit,
        VisitMode::EveryVisit => InitStrategy::McEveryVisit,
    };
    let (zero_rows, zero_greedy_epoch, zero_value_epoch) =
        epoch_rows(&InitStrategy::Zero, &ds, &mdp, &optimal, lr)?;
    let (mc_rows, mc_greedy_epoch, mc_value_epoch) = epoch_rows(&mc_init, &ds, &mdp, &optimal, lr)?;
    Ok(ConvergenceGrid {
        visit_mode,
        learning_rate: lr,
        zero_rows,
        mc_rows,
        optimal: tracked(&optimal),
        zero_greedy_epoch,
        mc_greedy_epoch,
        zero_value_epoch,
        mc_value_epoch,
    })
}

/// The frozen grid for every-visit averaging at learning rate 1. The
/// first-visit variant differs only in the Monte-Carlo epoch-0 value of
/// `Q(0, right)`: the pair is visited twice in the episode with returns 0
/// and 1, so every-visit averages to one half while first-visit keeps 0.
pub fn expected_grid() -> ConvergenceGrid {
    ConvergenceGrid {
        visit_mode: VisitMode::EveryVisit,
        learning_rate: 1.0,
        zero_rows: vec![
            [0.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, -2.0, 3.0],
            [-2.0, -2.0, 1.0, 3.0],
            [1.0, 0.0, 1.0, 3.0],
        ],
        mc_rows: vec![
            [0.5, 0.0, 1.0, 3.0],
            [1.0, 0.0, 1.0, 3.0],
            [1.0, 0.0, 1.0, 3.0],
            [1.0, 0.0, 1.0, 3.0],
        ],
        optimal: [1.0, 0.0, 1.0, 3.0],
        zero_greedy_epoch: Some(2),
        mc_greedy_epoch: Some(0),
        zero_value_epoch: Some(3),
        mc_value_epoch: Some(1),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridMismatch {
    /// Which start the cell belongs to: `"zero"` or `"mc"`.
    pub init: &'static str,
    pub epoch: usize,
    /// Index into [`TRACKED_CELLS`].
    pub cell: usize,
    pub expected: f64,
    pub got: f64,
}

/// Cell-by-cell comparison of the numeric rows of two grids. Exact equality
/// is intentional: the chain's arithmetic is small integers and halves, so
/// any drift is a real regression. An empty result means the grids agree.
pub fn verify_grid(got: &ConvergenceGrid, expected: &ConvergenceGrid) -> Vec<GridMismatch> {
    let mut mismatches = Vec::new();
    let mut compare = |init: &'static str, got_rows: &[[f64; 4]], want_rows: &[[f64; 4]]| {
        for (epoch, (g, w)) in got_rows.iter().zip(want_rows.iter()).enumerate() {
            for cell in 0..4 {
                if g[cell] != w[cell] {
                    mismatches.push(GridMismatch {
                        init,
                        epoch,
                        cell,
                        expected: w[cell],
                        got: g[cell],
                    });
                }
            }
        }
    };
    compare("zero", &got.zero_rows, &expected.zero_rows);
    compare("mc", &got.mc_rows, &expected.mc_rows);
    mismatches
}
