//! Trajectory data model shared by every other module.
//!
//! A dataset is a list of trajectories; a trajectory is a contiguous list of
//! transitions whose last step carries the episode-ending [`DoneKind`].
//! Return annotations are stored alongside the transitions (one slot per
//! step) so that value-regression code never recomputes them ad hoc.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory breaks contiguity at transition {index}: next_state differs from the following state")]
    NonContiguous { index: usize },
    #[error("transition {index} has done_kind {found:?}; only the final transition may end the episode")]
    EarlyDone { index: usize, found: DoneKind },
    #[error("final transition is marked NotDone; trajectories must end in Termination or Timeout")]
    OpenEnd,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite value in {what} at trajectory {traj}, step {step}")]
    NonFinite { what: &'static str, traj: usize, step: usize },
    #[error("annotation shape mismatch: trajectory {traj} has {steps} steps but {annotations} annotations")]
    AnnotationShape { traj: usize, steps: usize, annotations: usize },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// A state observation: a discrete index into a finite state set, or a
/// feature vector for continuous control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Discrete(usize),
    Vector(Vec<f64>),
}

impl Observation {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Observation::Discrete(i) => Some(*i),
            Observation::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Observation::Discrete(_) => None,
            Observation::Vector(v) => Some(v),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Observation::Discrete(_) => true,
            Observation::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// An action: a discrete index or a bounded continuous vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Vector(Vec<f64>),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Action::Discrete(_) => None,
            Action::Vector(v) => Some(v),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Action::Discrete(_) => true,
            Action::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// How a step ended. `Termination` means the environment reached an
/// absorbing state; `Timeout` means the episode was cut off by a step limit
/// while the underlying process would have continued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneKind {
    NotDone,
    Termination,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    pub done_kind: DoneKind,
}

/// A validated episode: non-empty, contiguous (`next_state[i] == state[i+1]`),
/// `NotDone` everywhere except the final transition, which must end the
/// episode with `Termination` or `Timeout`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Transition>", into = "Vec<Transition>")]
pub struct Trajectory {
    transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Result<Self, DataError> {
        if transitions.is_empty() {
            return Err(DataError::EmptyTrajectory);
        }
        let last = transitions.len() - 1;
        for (i, t) in transitions.iter().enumerate() {
            if i < last {
                if t.done_kind != DoneKind::NotDone {
                    return Err(DataError::EarlyDone { index: i, found: t.done_kind });
                }
                if t.next_state != transitions[i + 1].state {
                    return Err(DataError::NonContiguous { index: i });
                }
            } else if t.done_kind == DoneKind::NotDone {
                return Err(DataError::OpenEnd);
            }
        }
        Ok(Trajectory { transitions })
    }

    /// Number of transitions (the horizon T).
    pub fn horizon(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn last_done_kind(&self) -> DoneKind {
        self.transitions[self.transitions.len() - 1].done_kind
    }
}

impl TryFrom<Vec<Transition>> for Trajectory {
    type Error = DataError;
    fn try_from(v: Vec<Transition>) -> Result<Self, Self::Error> {
        Trajectory::new(v)
    }
}

impl From<Trajectory> for Vec<Transition> {
    fn from(t: Trajectory) -> Self {
        t.transitions
    }
}

/// Per-step return annotations. Either field may be absent: hard returns are
/// filled by return-to-go annotation, soft returns by the entropy-augmented
/// variant, and conservatively excluded steps keep `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepAnnotation {
    pub rtg: Option<f64>,
    pub soft_rtg: Option<f64>,
}

/// Dataset-level annotation block. `gamma` is `Some` when the annotations
/// were computed in-process; datasets re-read from disk carry `None` because
/// the file format does not record the discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAnnotations {
    pub gamma: Option<f64>,
    /// One inner vector per trajectory, one entry per transition.
    pub per_step: Vec<Vec<StepAnnotation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineDataset {
    pub trajectories: Vec<Trajectory>,
    pub annotations: Option<DatasetAnnotations>,
    pub dataset_id: String,
    pub seed: u64,
}

impl OfflineDataset {
    pub fn new(trajectories: Vec<Trajectory>, dataset_id: impl Into<String>, seed: u64) -> Self {
        OfflineDataset { trajectories, annotations: None, dataset_id: dataset_id.into(), seed }
    }

    pub fn num_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::horizon).sum()
    }

    /// Checks the structural invariants that cannot be enforced by
    /// construction: finite rewards/annotations and one annotation slot per
    /// transition.
    pub fn validate(&self) -> Result<(), DataError> {
        for (ti, traj) in self.trajectories.iter().enumerate() {
            for (si, tr) in traj.transitions().iter().enumerate() {
                if !tr.reward.is_finite() {
                    return Err(DataError::NonFinite { what: "reward", traj: ti, step: si });
                }
                if !tr.state.is_finite() || !tr.next_state.is_finite() {
                    return Err(DataError::NonFinite { what: "state", traj: ti, step: si });
                }
                if !tr.action.is_finite() {
                    return Err(DataError::NonFinite { what: "action", traj: ti, step: si });
                }
            }
            if let Some(ann) = &self.annotations {
                let slots = ann.per_step.get(ti).map(Vec::len).unwrap_or(0);
                if slots != traj.horizon() {
                    return Err(DataError::AnnotationShape {
                        traj: ti,
                        steps: traj.horizon(),
                        annotations: slots,
                    });
                }
                for (si, a) in ann.per_step[ti].iter().enumerate() {
                    for v in [a.rtg, a.soft_rtg].into_iter().flatten() {
                        if !v.is_finite() {
                            return Err(DataError::NonFinite { what: "annotation", traj: ti, step: si });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One JSON-lines row of the on-disk dataset format.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    traj_id: usize,
    step: usize,
    state: Observation,
    action: Action,
    reward: f64,
    next_state: Observation,
    done_kind: DoneKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rtg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    soft_rtg: Option<f64>,
}

/// Writes the dataset as JSON lines, one transition per line, in trajectory
/// order. Output is byte-deterministic for a given dataset.
/// The JSON-lines serialization of the dataset: one transition per line,
/// annotations inlined. [`write_jsonl`] puts exactly these bytes on disk,
/// so content hashes computed on them match hashes of the file.
pub fn jsonl_bytes(ds: &OfflineDataset) -> Result<Vec<u8>, DataError> {
    let mut out = Vec::new();
    for (ti, traj) in ds.trajectories.iter().enumerate() {
        for (si, tr) in traj.transitions().iter().enumerate() {
            let ann = ds
                .annotations
                .as_ref()
                .and_then(|a| a.per_step.get(ti))
                .and_then(|steps| steps.get(si))
                .copied()
                .unwrap_or_default();
            let row = DatasetRow {
                traj_id: ti,
                step: si,
                state: tr.state.clone(),
                action: tr.action.clone(),
                reward: tr.reward,
                next_state: tr.next_state.clone(),
                done_kind: tr.done_kind,
                rtg: ann.rtg,
                soft_rtg: ann.soft_rtg,
            };
            let line = serde_json::to_string(&row)
                .map_err(|e| DataError::Malformed { line: 0, message: e.to_string() })?;
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    Ok(out)
}

pub fn write_jsonl(ds: &OfflineDataset, path: &Path) -> Result<(), DataError> {
    let bytes = jsonl_bytes(ds)?;
    std::fs::write(path, bytes)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

/// Reads a JSON-lines dataset written by [`write_jsonl`]. Rows are grouped
/// by `traj_id` in file order; any present annotations are restored with an
/// unknown discount (`gamma: None`).
pub fn read_jsonl(path: &Path) -> Result<OfflineDataset, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let reader = BufReader::new(file);
    // BTreeMap keeps trajectory ids in ascending order regardless of file order.
    let mut groups: BTreeMap<usize, Vec<(usize, Transition, StepAnnotation)>> = BTreeMap::new();
    let mut any_annotation = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(&line)
            .map_err(|e| DataError::Malformed { line: lineno + 1, message: e.to_string() })?;
        let ann = StepAnnotation { rtg: row.rtg, soft_rtg: row.soft_rtg };
        any_annotation |= ann.rtg.is_some() || ann.soft_rtg.is_some();
        groups.entry(row.traj_id).or_default().push((
            row.step,
            Transition {
                state: row.state,
                action: row.action,
                reward: row.reward,
                next_state: row.next_state,
                done_kind: row.done_kind,
            },
            ann,
        ));
    }
    if groups.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut trajectories = Vec::with_capacity(groups.len());
    let mut per_step = Vec::with_capacity(groups.len());
    for (_, mut rows) in groups {
        rows.sort_by_key(|(step, _, _)| *step);
        let annotations: Vec<StepAnnotation> = rows.iter().map(|(_, _, a)| *a).collect();
        let transitions: Vec<Transition> = rows.into_iter().map(|(_, t, _)| t).collect();
        trajectories.push(Trajectory::new(transitions)?);
        per_step.push(annotations);
    }
    let annotations = any_annotation.then_some(DatasetAnnotations { gamma: None, per_step });
    Ok(OfflineDataset {
        trajectories,
        annotations,
        dataset_id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vobs(x: f64) -> Observation {
        Observation::Vector(vec![x])
    }

    fn step(s: f64, a: f64, r: f64, s2: f64, done: DoneKind) -> Transition {
        Transition {
            state: vobs(s),
            action: Action::Vector(vec![a]),
            reward: r,
            next_state: vobs(s2),
            done_kind: done,
        }
    }

    #[test]
    fn trajectory_rejects_empty() {
        assert!(matches!(Trajectory::new(vec![]), Err(DataError::EmptyTrajectory)));
    }

    #[test]
    fn trajectory_rejects_contiguity_break() {
        let ts = vec![
            step(0.0, 0.1, 1.0, 1.0, DoneKind::NotDone),
            step(2.0, 0.1, 1.0, 3.0, DoneKind::Termination),
        ];
        assert!(matches!(Trajectory::new(ts), Err(DataError::NonContiguous { index: 0 })));
    }

    #[test]
    fn trajectory_rejects_early_done_and_open_end() {
        let ts = vec![
            step(0.0, 0.1, 1.0, 1.0, DoneKind::Termination),
            step(1.0, 0.1, 1.0, 2.0, DoneKind::Termination),
        ];
        assert!(matches!(Trajectory::new(ts), Err(DataError::EarlyDone { index: 0, .. })));
        let ts = vec![step(0.0, 0.1, 1.0, 1.0, DoneKind::NotDone)];
        assert!(matches!(Trajectory::new(ts), Err(DataError::OpenEnd)));
    }

    #[test]
    fn observation_serializes_untagged() {
        let d = Observation::Discrete(3);
        let v = Observation::Vector(vec![0.5, -1.0]);
        assert_eq!(serde_json::to_string(&d).unwrap(), "3");
        assert_eq!(serde_json::to_string(&v).unwrap(), "[0.5,-1.0]");
        assert_eq!(serde_json::from_str::<Observation>("3").unwrap(), d);
        assert_eq!(serde_json::from_str::<Observation>("[0.5,-1.0]").unwrap(), v);
    }

    #[test]
    fn jsonl_roundtrip_preserves_everything() {
        let traj = Trajectory::new(vec![
            step(0.0, 0.25, -1.5, 1.0, DoneKind::NotDone),
            step(1.0, -0.5, 0.125, 2.0, DoneKind::Timeout),
        ])
        .unwrap();
        let mut ds = OfflineDataset::new(vec![traj], "roundtrip", 7);
        ds.annotations = Some(DatasetAnnotations {
            gamma: Some(0.99),
            per_step: vec![vec![
                StepAnnotation { rtg: Some(-1.37625), soft_rtg: None },
                StepAnnotation { rtg: Some(0.125), soft_rtg: None },
            ]],
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        write_jsonl(&ds, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(back.trajectories, ds.trajectories);
        let ann = back.annotations.unwrap();
        assert_eq!(ann.gamma, None); // discount is not stored in the file
        assert_eq!(ann.per_step, ds.annotations.unwrap().per_step);
    }

    #[test]
    fn jsonl_write_is_byte_deterministic() {
        let traj = Trajectory::new(vec![step(0.0, 0.1, 0.3, 1.0, DoneKind::Termination)]).unwrap();
        let ds = OfflineDataset::new(vec![traj], "det", 1);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        write_jsonl(&ds, &p1).unwrap();
        write_jsonl(&ds, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn validate_flags_non_finite_reward() {
        let traj =
            Trajectory::new(vec![step(0.0, 0.1, f64::NAN, 1.0, DoneKind::Termination)]).unwrap();
        let ds = OfflineDataset::new(vec![traj], "nan", 0);
        assert!(matches!(ds.validate(), Err(DataError::NonFinite { what: "reward", .. })));
    }
}
