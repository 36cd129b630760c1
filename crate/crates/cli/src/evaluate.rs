//! Roll out a checkpointed agent greedily and report its return. The network
//! shapes are recovered from the checkpoint itself, so the only thing the
//! caller must supply is the environment.

use std::path::PathBuf;

use serde::Serialize;

use orlab::agents::ActorCritic;
use orlab::envs::pointmass_env;
use orlab::harness::{evaluate_policy, measure_anchors, normalized_score, ANCHOR_SEED};
use orlab::nn::load_snapshots;
use orlab::AgentConfig;

use crate::{echo_config, CmdResult, Failure};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Agent checkpoint JSON written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Point-mass dimensionality of the evaluation environment.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    sparse: bool,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Seed for the evaluation episode stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the score scaled between random and tuned controllers.
    #[arg(long)]
    normalize: bool,
}

/// Rebuilds an agent configuration from the stored network shapes. Only the
/// greedy actor matters for evaluation, so improvement-side hyperparameters
/// keep their defaults.
fn config_from_checkpoint(args: &Args) -> Result<AgentConfig, Failure> {
    let map = load_snapshots(&args.checkpoint).map_err(|e| {
        Failure::Config(format!("cannot read {}: {e}", args.checkpoint.display()))
    })?;
    let actor = map
        .get("actor")
        .ok_or_else(|| Failure::Config("checkpoint has no actor network".into()))?;
    let shape = &actor.config;
    if shape.output_dim % 2 != 0 {
        return Err(Failure::Config(format!(
            "actor head width {} is not a (mean, spread) pair",
            shape.output_dim
        )));
    }
    let mut cfg = AgentConfig::hard(shape.input_dim, shape.output_dim / 2);
    cfg.hidden = shape.hidden.clone();
    cfg.layer_norm = shape.layer_norm;
    let n_critics = (0..)
        .take_while(|i| map.contains_key(&format!("critic{i}")))
        .count();
    if n_critics == 0 {
        return Err(Failure::Config("checkpoint has no critic networks".into()));
    }
    cfg.n_critics = n_critics;
    Ok(cfg)
}

pub fn run(args: Args) -> CmdResult {
    echo_config(&args)?;
    if args.episodes == 0 {
        return Err(Failure::Config("--episodes must be at least 1".into()));
    }
    let cfg = config_from_checkpoint(&args)?;
    let spec = pointmass_env(args.dim, args.sparse).map_err(Failure::config)?;
    if spec.obs_dim != cfg.obs_dim || spec.act_dim != cfg.act_dim {
        return Err(Failure::Config(format!(
            "checkpoint expects ({}, {}) dimensions but the environment provides ({}, {}); pass the matching --dim",
            cfg.obs_dim, cfg.act_dim, spec.obs_dim, spec.act_dim
        )));
    }
    let agent = ActorCritic::load(cfg, args.seed, &args.checkpoint).map_err(Failure::config)?;
    let raw = evaluate_policy(&spec, &agent, args.episodes, args.seed).map_err(Failure::config)?;
    println!("mean return over {} episodes: {raw:.6}", args.episodes);
    if args.normalize {
        let anchors =
            measure_anchors(&spec, args.episodes, ANCHOR_SEED).map_err(Failure::config)?;
        let score = normalized_score(raw, &anchors).map_err(Failure::config)?;
        println!(
            "normalized score: {score:.6} (random {:.6}, tuned {:.6})",
            anchors.random, anchors.expert
        );
    }
    Ok(())
}
