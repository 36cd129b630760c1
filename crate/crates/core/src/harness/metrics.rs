//! Per-run metrics rows and their CSV form.
//!
//! Everything except the wall-clock column is a pure function of the run's
//! configuration and seed, so two runs of the same experiment produce
//! byte-identical files once that column is stripped.

use std::fs;
use std::path::Path;

use crate::agents::{LossReport, Phase};

use super::HarnessError;

pub const CSV_HEADER: &str = "step,phase,seed,loss_actor,loss_critic,loss_bc,loss_cql,loss_div,eval_return,normalized_score,wall_clock_s";

/// One logged row: losses for the step plus evaluation results when the step
/// sits on an evaluation boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// 1-based count of completed training steps, on a single axis across
    /// all phases.
    pub step: usize,
    pub phase: Phase,
    pub seed: u64,
    pub losses: LossReport,
    pub eval_return: Option<f64>,
    pub normalized_score: Option<f64>,
    pub wall_clock_s: f64,
}

/// Nine significant digits; absent values become empty cells.
fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.8e}")).unwrap_or_default()
}

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.8e}",
            self.step,
            self.phase.as_str(),
            self.seed,
            cell(self.losses.actor),
            cell(self.losses.critic),
            cell(self.losses.bc),
            cell(self.losses.cql),
            cell(self.losses.diversity),
            cell(self.eval_return),
            cell(self.normalized_score),
            self.wall_clock_s,
        )
    }
}

pub fn records_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Drops the final (wall-clock) column from every line, header included,
/// leaving only the reproducible part of the file.
pub fn strip_wall_clock(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        out.push_str(line.rsplit_once(',').map_or(line, |(head, _)| head));
        out.push('\n');
    }
    out
}

pub fn write_metrics(records: &[MetricsRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::BadConfig("no metrics records to write".into()));
    }
    for pair in records.windows(2) {
        if pair[0].seed == pair[1].seed && pair[1].step <= pair[0].step {
            return Err(HarnessError::BadConfig(format!(
                "steps must increase within a run: {} then {}",
                pair[0].step, pair[1].step
            )));
        }
    }
    fs::write(path, records_to_csv(records))
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn parse_phase(s: &str, line: usize) -> Result<Phase, HarnessError> {
    match s {
        "actor_pretrain" => Ok(Phase::ActorPretrain),
        "critic_pretrain" => Ok(Phase::CriticPretrain),
        "rl" => Ok(Phase::Rl),
        other => {
            Err(HarnessError::BadCsv { line, reason: format!("unknown phase {other:?}") })
        }
    }
}

fn parse_cell(s: &str, what: &str, line: usize) -> Result<Option<f64>, HarnessError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| HarnessError::BadCsv {
        line,
        reason: format!("{what} is not a number: {s:?}"),
    })
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == CSV_HEADER => {}
        _ => {
            return Err(HarnessError::BadCsv { line: 1, reason: "missing or wrong header".into() })
        }
    }
    let mut out = Vec::new();
    for (i, row) in lines {
        let line = i + 1;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 11 {
            return Err(HarnessError::BadCsv {
                line,
                reason: format!("expected 11 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| HarnessError::BadCsv { line, reason: format!("bad {what}") };
        out.push(MetricsRecord {
            step: fields[0].parse().map_err(|_| bad("step"))?,
            phase: parse_phase(fields[1], line)?,
            seed: fields[2].parse().map_err(|_| bad("seed"))?,
            losses: LossReport {
                actor: parse_cell(fields[3], "loss_actor", line)?,
                critic: parse_cell(fields[4], "loss_critic", line)?,
                bc: parse_cell(fields[5], "loss_bc", line)?,
                cql: parse_cell(fields[6], "loss_cql", line)?,
                diversity: parse_cell(fields[7], "loss_div", line)?,
            },
            eval_return: parse_cell(fields[8], "eval_return", line)?,
            normalized_score: parse_cell(fields[9], "normalized_score", line)?,
            wall_clock_s: fields[10].parse().map_err(|_| bad("wall_clock_s"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<MetricsRecord> {
        vec![
            MetricsRecord {
                step: 4,
                phase: Phase::ActorPretrain,
                seed: 7,
                losses: LossReport { bc: Some(0.125), ..LossReport::default() },
                eval_return: None,
                normalized_score: None,
                wall_clock_s: 0.5,
            },
            MetricsRecord {
                step: 8,
                phase: Phase::Rl,
                seed: 7,
                losses: LossReport {
                    actor: Some(-1.5),
                    critic: Some(2.0),
                    bc: Some(0.25),
                    cql: None,
                    diversity: None,
                },
                eval_return: Some(-33.25),
                normalized_score: Some(0.75),
                wall_clock_s: 1.25,
            },
        ]
    }

    #[test]
    fn header_is_byte_exact() {
        let expected = concat!(
            "step,phase,seed,loss_actor,loss_critic,loss_bc,loss_cql,loss_div,",
            "eval_return,normalized_score,wall_clock_s"
        );
        assert_eq!(CSV_HEADER, expected);
        assert_eq!(CSV_HEADER.split(',').count(), 11);
    }

    #[test]
    fn absent_values_are_empty_cells_and_floats_have_nine_digits() {
        let rows = records_to_csv(&sample());
        let mut lines = rows.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "4,actor_pretrain,7,,,1.25000000e-1,,,,,5.00000000e-1");
        assert_eq!(
            lines.next().unwrap(),
            "8,rl,7,-1.50000000e0,2.00000000e0,2.50000000e-1,,,-3.32500000e1,7.50000000e-1,1.25000000e0"
        );
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn roundtrip_preserves_every_written_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let records = sample();
        write_metrics(&records, &path).unwrap();
        let back = read_metrics(&path).unwrap();
        assert_eq!(records_to_csv(&back), records_to_csv(&records));
    }

    #[test]
    fn wall_clock_stripping_removes_exactly_the_last_column() {
        let stripped = strip_wall_clock(&records_to_csv(&sample()));
        let mut lines = stripped.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,phase,seed,loss_actor,loss_critic,loss_bc,loss_cql,loss_div,eval_return,normalized_score"
        );
        assert_eq!(lines.next().unwrap(), "4,actor_pretrain,7,,,1.25000000e-1,,,,");
        assert!(lines.next().unwrap().ends_with("7.50000000e-1"));
    }

    #[test]
    fn non_monotone_steps_and_empty_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        assert!(matches!(write_metrics(&[], &path), Err(HarnessError::BadConfig(_))));
        let mut records = sample();
        records[1].step = 4;
        assert!(matches!(write_metrics(&records, &path), Err(HarnessError::BadConfig(_))));
    }

    #[test]
    fn malformed_rows_are_reported_with_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_metrics(&sample(), &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("9,rl,7,oops,,,,,,,1.0\n");
        fs::write(&path, text).unwrap();
        match read_metrics(&path) {
            Err(HarnessError::BadCsv { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected a CSV error, got {other:?}"),
        }
    }
}
