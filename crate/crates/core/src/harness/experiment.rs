//! Seeded experiment execution: one config, many independent seeds, CSV
//! metrics per seed, and a windowed aggregate report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{pretrain_then_train, ActorCritic, AgentConfig, Phase, PretrainConfig};
use crate::data::{read_jsonl, OfflineDataset};
use crate::envs::{pointmass_env, rollout, scripted_behavior, BehaviorPolicySpec, ContinuousEnvSpec};

use super::evaluate::{
    evaluate_policy, measure_anchors, normalized_score, steps_to_threshold, window_start,
    windowed_score, EvalPoint, EvalReport, ScoreAnchors, ANCHOR_SEED,
};
use super::metrics::{write_metrics, MetricsRecord};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub dim: usize,
    pub sparse: bool,
}

impl EnvConfig {
    pub fn spec(&self) -> Result<ContinuousEnvSpec, HarnessError> {
        Ok(pointmass_env(self.dim, self.sparse)?)
    }
}

/// Where the offline data comes from: a file on disk, or a scripted
/// controller of the given quality rolled out on the experiment's
/// environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Path { path: PathBuf },
    Generate { quality: f64, episodes: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvConfig,
    pub dataset: DatasetSource,
    pub agent: AgentConfig,
    pub pretrain: PretrainConfig,
    /// Training steps per seed, pre-training included.
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Loss rows are written every this many steps (evaluation rows always).
    pub log_every: usize,
    pub anchor_episodes: usize,
    pub seeds: Vec<u64>,
    /// Normalized-score level for steps-to-threshold; absent disables it.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// When set, per-seed CSVs and a run manifest are written here.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::BadConfig(msg.into()));
        if self.name.is_empty() {
            return bad("experiment name is empty");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.eval_every == 0 || self.total_steps % self.eval_every != 0 {
            return bad("eval_every must be positive and divide total_steps");
        }
        if self.log_every == 0 {
            return bad("log_every must be positive");
        }
        if self.eval_episodes == 0 || self.anchor_episodes == 0 {
            return bad("evaluation and anchor measurements need episodes");
        }
        if let DatasetSource::Generate { quality, episodes, .. } = &self.dataset {
            if !(0.0..=1.0).contains(quality) {
                return bad("behavior quality must lie in [0, 1]");
            }
            if *episodes == 0 {
                return bad("dataset generation needs episodes");
            }
        }
        let spec = self.env.spec()?;
        if self.agent.obs_dim != spec.obs_dim || self.agent.act_dim != spec.act_dim {
            return Err(HarnessError::BadConfig(format!(
                "agent dims ({}, {}) do not match the environment ({}, {})",
                self.agent.obs_dim, self.agent.act_dim, spec.obs_dim, spec.act_dim
            )));
        }
        self.agent.validate()?;
        self.pretrain.validate()?;
        let budget = self.pretrain.actor_steps
            + if self.pretrain.pretrain_critic { self.pretrain.critic_steps } else { 0 };
        if budget > self.total_steps {
            return Err(HarnessError::BadConfig(format!(
                "pre-training budget {budget} exceeds total_steps {}",
                self.total_steps
            )));
        }
        Ok(())
    }
}

/// Loads or generates the experiment's dataset. Generation rolls the
/// scripted controller on the experiment environment with the source's own
/// seed, so the data is identical across agent seeds.
pub fn resolve_dataset(
    source: &DatasetSource,
    spec: &ContinuousEnvSpec,
) -> Result<OfflineDataset, HarnessError> {
    match source {
        DatasetSource::Path { path } => Ok(read_jsonl(path)?),
        DatasetSource::Generate { quality, episodes, seed } => {
            let policy = scripted_behavior(spec, &BehaviorPolicySpec::scripted(*quality))?;
            let trajectories = rollout(&mut spec.env(), &policy, *episodes, *seed)?;
            let id = format!("{}-q{quality}-n{episodes}", spec.name);
            Ok(OfflineDataset::new(trajectories, id, *seed))
        }
    }
}

/// Content hash of the dataset in git's object style: the digest of
/// `blob <len>\0<jsonl bytes>`, hex-encoded. Hashing the serialized rows
/// (rather than the in-memory struct) keeps the hash stable across a
/// save/load roundtrip and equal to a hash of the file itself.
pub fn dataset_content_hash(ds: &OfflineDataset) -> Result<String, HarnessError> {
    let body = crate::data::jsonl_bytes(ds)?;
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(&body);
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything produced by one seed of one experiment.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub curve: Vec<EvalPoint>,
    /// First step of the improvement phase, if one ran.
    pub rl_first_step: Option<usize>,
    /// First step of the reporting window.
    pub window_start: usize,
    /// Mean normalized score over the reporting window.
    pub windowed_score: f64,
    pub steps_to_threshold: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub run: Option<SeedRun>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub anchors: ScoreAnchors,
    pub dataset_hash: String,
    pub runs: Vec<SeedOutcome>,
    pub report: EvalReport,
}

/// Evaluation stream per (run seed, step): unrelated to the training stream
/// by construction, deterministic across processes.
fn eval_stream_seed(run_seed: u64, step: usize) -> u64 {
    run_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((step as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
        ^ 0x00EA_17AE
}

/// Trains one seed and logs metrics on the shared step axis. Loss rows land
/// every `log_every` steps; evaluation rows every `eval_every` steps, using
/// a read-only snapshot of the agent and a dedicated evaluation stream.
/// With `checkpoint` set, the finished agent is saved there.
pub fn run_single(
    cfg: &ExperimentConfig,
    spec: &ContinuousEnvSpec,
    ds: &OfflineDataset,
    anchors: ScoreAnchors,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<SeedRun, HarnessError> {
    let mut ac = ActorCritic::new(cfg.agent.clone(), seed)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut curve = Vec::new();
    let mut rl_first_step = None;
    let mut eval_error: Option<HarnessError> = None;

    pretrain_then_train(&mut ac, ds, &cfg.pretrain, cfg.total_steps, |event, agent| {
        let step = event.step + 1;
        if event.phase == Phase::Rl && rl_first_step.is_none() {
            rl_first_step = Some(step);
        }
        let on_eval = step % cfg.eval_every == 0;
        let on_log = step % cfg.log_every == 0 || step == cfg.total_steps;
        if !(on_eval || on_log) {
            return;
        }
        let mut eval_return = None;
        let mut score = None;
        if on_eval && eval_error.is_none() {
            let attempt = evaluate_policy(
                spec,
                agent,
                cfg.eval_episodes,
                eval_stream_seed(seed, step),
            )
            .and_then(|raw| Ok((raw, normalized_score(raw, &anchors)?)));
            match attempt {
                Ok((raw, s)) => {
                    eval_return = Some(raw);
                    score = Some(s);
                    curve.push(EvalPoint { step, raw_return: raw, normalized: s });
                }
                Err(e) => eval_error = Some(e),
            }
        }
        records.push(MetricsRecord {
            step,
            phase: event.phase,
            seed,
            losses: event.losses,
            eval_return,
            normalized_score: score,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    })?;
    if let Some(e) = eval_error {
        return Err(e);
    }
    if let Some(path) = checkpoint {
        ac.save(path)?;
    }

    let window = window_start(cfg.total_steps, rl_first_step);
    let windowed = windowed_score(&curve, window)
        .ok_or_else(|| HarnessError::BadConfig("run produced no evaluations".into()))?;
    let crossed = cfg.threshold.and_then(|t| steps_to_threshold(&curve, t));
    Ok(SeedRun {
        seed,
        records,
        curve,
        rl_first_step,
        window_start: window,
        windowed_score: windowed,
        steps_to_threshold: crossed,
    })
}

/// Windowed aggregate over completed seeds, taken in seed-sorted order so
/// the result is independent of the seed list's ordering. The threshold
/// summary is the lower median across seeds, with non-crossing seeds sorted
/// past every crossing one.
pub fn aggregate_report(outcomes: &[SeedOutcome]) -> Result<EvalReport, HarnessError> {
    let mut done: Vec<&SeedRun> = outcomes.iter().filter_map(|o| o.run.as_ref()).collect();
    if done.is_empty() {
        let first = outcomes
            .iter()
            .find_map(|o| o.error.clone())
            .unwrap_or_else(|| "no seeds were run".into());
        return Err(HarnessError::AllSeedsFailed(first));
    }
    done.sort_by_key(|r| r.seed);
    let mut points = Vec::new();
    for run in &done {
        points.extend(run.curve.iter().filter(|p| p.step >= run.window_start).map(|p| p.normalized));
        // Window fell between evaluations: fall back like the per-seed score.
        if run.curve.iter().all(|p| p.step < run.window_start) {
            if let Some(last) = run.curve.last() {
                points.push(last.normalized);
            }
        }
    }
    if points.is_empty() {
        return Err(HarnessError::BadConfig("no evaluations to aggregate".into()));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<f64>() / n;
    let var = points.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mut crossings: Vec<Option<usize>> = done.iter().map(|r| r.steps_to_threshold).collect();
    crossings.sort_by_key(|c| c.map_or(u64::MAX, |s| s as u64));
    let median = crossings[(crossings.len() - 1) / 2];
    Ok(EvalReport {
        mean,
        std: var.max(0.0).sqrt(),
        n_seeds: done.len(),
        steps_to_threshold: median,
    })
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    windowed_score: Option<f64>,
    steps_to_threshold: Option<usize>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a ExperimentConfig,
    dataset_id: &'a str,
    dataset_seed: u64,
    dataset_hash: &'a str,
    n_trajectories: usize,
    n_transitions: usize,
    anchors: ScoreAnchors,
    report: &'a EvalReport,
    seeds: Vec<SeedSummary<'a>>,
}

fn write_outputs(
    cfg: &ExperimentConfig,
    ds: &OfflineDataset,
    hash: &str,
    outcome: &ExperimentOutcome,
    dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)
        .map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    for entry in &outcome.runs {
        if let Some(run) = &entry.run {
            let path = dir.join(format!("{}-seed{}.csv", cfg.name, run.seed));
            write_metrics(&run.records, &path)?;
        }
    }
    let manifest = RunManifest {
        config: cfg,
        dataset_id: &ds.dataset_id,
        dataset_seed: ds.seed,
        dataset_hash: hash,
        n_trajectories: ds.trajectories.len(),
        n_transitions: ds.num_transitions(),
        anchors: outcome.anchors,
        report: &outcome.report,
        seeds: outcome
            .runs
            .iter()
            .map(|o| SeedSummary {
                seed: o.seed,
                windowed_score: o.run.as_ref().map(|r| r.windowed_score),
                steps_to_threshold: o.run.as_ref().and_then(|r| r.steps_to_threshold),
                error: o.error.as_deref(),
            })
            .collect(),
    };
    let path = dir.join(format!("{}-manifest.json", cfg.name));
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body).map_err(|source| HarnessError::Io { path, source })?;
    Ok(())
}

/// Runs every seed of the experiment (in parallel), isolating per-seed
/// failures, and aggregates the survivors. With `output_dir` set, per-seed
/// CSVs and a manifest holding the resolved config and the dataset's
/// content hash are written there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let spec = cfg.env.spec()?;
    let ds = resolve_dataset(&cfg.dataset, &spec)?;
    ds.validate()?;
    let dataset_hash = dataset_content_hash(&ds)?;
    let anchors = measure_anchors(&spec, cfg.anchor_episodes, ANCHOR_SEED)?;
    normalized_score(anchors.random, &anchors)?;

    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)
            .map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
    }
    let checkpoint_path = |seed: u64| {
        cfg.output_dir.as_ref().map(|d| d.join(format!("{}-seed{seed}-agent.json", cfg.name)))
    };
    let runs: Vec<SeedOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            match run_single(cfg, &spec, &ds, anchors, seed, checkpoint_path(seed).as_deref()) {
                Ok(run) => SeedOutcome { seed, run: Some(run), error: None },
                Err(e) => SeedOutcome { seed, run: None, error: Some(e.to_string()) },
            }
        })
        .collect();

    let report = aggregate_report(&runs)?;
    let outcome = ExperimentOutcome { anchors, dataset_hash, runs, report };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(cfg, &ds, &outcome.dataset_hash, &outcome, dir)?;
    }
    Ok(outcome)
}
