//! Training entry point: resolve a preset or a config file, fan out over
//! seeds, and summarize the windowed scores.

use std::fs;
use std::path::PathBuf;

use orlab::harness::{preset, preset_names, run_experiment, ExperimentOutcome};
use orlab::ExperimentConfig;

use crate::{echo_config, init_jobs, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Built-in experiment; see the error message for the catalog.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Experiment configuration JSON (same shape `train` echoes).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for per-seed CSVs, checkpoints, and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the per-seed fan-out.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Loads the experiment from either source and applies flag overrides.
pub fn resolve_config(args: &Args) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name).map_err(|_| {
            Failure::Config(format!(
                "unknown preset {name:?}; available: {}",
                preset_names().join(", ")
            ))
        })?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("bad config {}: {e}", path.display())))?
        }
        _ => {
            return Err(Failure::Config(format!(
                "pass --preset <name> or --config <path>; presets: {}",
                preset_names().join(", ")
            )))
        }
    };
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

pub fn print_summary(outcome: &ExperimentOutcome) {
    println!(
        "anchors: random {:.4}, expert {:.4}; dataset {}",
        outcome.anchors.random, outcome.anchors.expert, outcome.dataset_hash
    );
    for o in &outcome.runs {
        match (&o.run, &o.error) {
            (Some(run), _) => {
                let crossed = run
                    .steps_to_threshold
                    .map_or("-".to_string(), |s| s.to_string());
                println!(
                    "seed {:>3}: windowed score {:.4} (window from step {}), threshold step {}",
                    o.seed, run.windowed_score, run.window_start, crossed
                );
            }
            (None, Some(err)) => println!("seed {:>3}: FAILED: {err}", o.seed),
            (None, None) => println!("seed {:>3}: FAILED", o.seed),
        }
    }
    let r = &outcome.report;
    let crossed = r.steps_to_threshold.map_or("-".to_string(), |s| s.to_string());
    println!(
        "aggregate: {:.4} +/- {:.4} over {} seeds, median threshold step {}",
        r.mean, r.std, r.n_seeds, crossed
    );
}

pub fn run(args: Args) -> CmdResult {
    init_jobs(args.jobs)?;
    let cfg = resolve_config(&args)?;
    echo_config(&cfg)?;
    let outcome = run_experiment(&cfg).map_err(Failure::config)?;
    print_summary(&outcome);
    if let Some(dir) = &cfg.output_dir {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_args() -> Args {
        Args { preset: None, config: None, seed: None, out: None, jobs: None }
    }

    #[test]
    fn missing_source_names_the_presets() {
        let err = resolve_config(&bare_args()).unwrap_err();
        let Failure::Config(msg) = err else { panic!("wrong class") };
        assert!(msg.contains("pointmass-td3bc"), "{msg}");
    }

    #[test]
    fn preset_overrides_apply() {
        let args = Args {
            preset: Some("pointmass-td3bc".into()),
            seed: Some(42),
            out: Some(PathBuf::from("/tmp/runs")),
            ..bare_args()
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.seeds, vec![42]);
        assert_eq!(cfg.output_dir.as_deref(), Some(std::path::Path::new("/tmp/runs")));
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        let args = Args { preset: Some("nope".into()), ..bare_args() };
        assert!(matches!(resolve_config(&args), Err(Failure::Config(_))));
    }
}
