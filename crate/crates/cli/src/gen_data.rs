//! Offline data generation: roll the scripted point-mass controller at a
//! chosen quality and persist the trajectories as JSONL.

use std::path::PathBuf;

use serde::Serialize;

use orlab::data::write_jsonl;
use orlab::envs::pointmass_env;
use orlab::harness::{dataset_content_hash, resolve_dataset, DatasetSource};
use orlab::returns::{annotate_dataset, AnnotationMode};
use orlab::ReturnConfig;

use crate::{echo_config, CmdResult, Failure};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Point-mass dimensionality.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Goal-only reward instead of dense shaping.
    #[arg(long)]
    sparse: bool,
    /// Controller quality in [0, 1]: 1 is the tuned controller, 0 pure noise.
    #[arg(long, default_value_t = 0.5)]
    quality: f64,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also annotate every row with its discounted return-to-go.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output JSONL path.
    #[arg(long, default_value = "dataset.jsonl")]
    out: PathBuf,
}

pub fn run(args: Args) -> CmdResult {
    echo_config(&args)?;
    let spec = pointmass_env(args.dim, args.sparse).map_err(Failure::config)?;
    let source = DatasetSource::Generate {
        quality: args.quality,
        episodes: args.episodes,
        seed: args.seed,
    };
    let mut ds = resolve_dataset(&source, &spec).map_err(Failure::config)?;
    if let Some(gamma) = args.gamma {
        ds = annotate_dataset(&ds, &ReturnConfig::new(gamma), AnnotationMode::Hard)
            .map_err(Failure::config)?;
    }
    ds.validate().map_err(Failure::config)?;
    let hash = dataset_content_hash(&ds).map_err(Failure::config)?;
    write_jsonl(&ds, &args.out).map_err(Failure::config)?;
    println!(
        "wrote {} trajectories ({} transitions) to {}",
        ds.trajectories.len(),
        ds.num_transitions(),
        args.out.display()
    );
    println!("content hash: {hash}");
    Ok(())
}
