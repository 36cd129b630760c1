//! Grid runner: cross mixture weights and layer-norm settings against a
//! shared base experiment, one `train`-equivalent run per grid point, and an
//! aggregate CSV keyed by the grid coordinates.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use orlab::harness::{preset, preset_names, run_experiment, ExperimentOutcome};
use orlab::ExperimentConfig;

use crate::{echo_config, init_jobs, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Sweep description JSON; see `SweepSpec` in the docs below.
    #[arg(long)]
    config: PathBuf,
    /// Replace the sweep's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving one subdirectory per grid point plus sweep.csv.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    /// Worker threads shared by all runs.
    #[arg(long)]
    jobs: Option<usize>,
}

/// What to sweep. The base experiment comes from a named preset or an inline
/// config; `lambdas` varies the critic pre-training target mix, `layer_norm`
/// toggles normalization in both networks. Axes left empty stay pinned at
/// the base value, but at least one axis must be populated.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub base: Option<ExperimentConfig>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub layer_norm: Vec<bool>,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub layer_norm: bool,
}

fn base_config(spec: &SweepSpec) -> Result<ExperimentConfig, Failure> {
    match (&spec.preset, &spec.base) {
        (Some(name), None) => preset(name).map_err(|_| {
            Failure::Config(format!(
                "unknown preset {name:?}; available: {}",
                preset_names().join(", ")
            ))
        }),
        (None, Some(cfg)) => Ok(cfg.clone()),
        (None, None) => Err(Failure::Config("sweep needs a \"preset\" or a \"base\"".into())),
        (Some(_), Some(_)) => {
            Err(Failure::Config("give either \"preset\" or \"base\", not both".into()))
        }
    }
}

/// Cross product of the populated axes, unset axes pinned at base values.
pub fn grid_points(spec: &SweepSpec, base: &ExperimentConfig) -> Result<Vec<GridPoint>, Failure> {
    if spec.lambdas.is_empty() && spec.layer_norm.is_empty() {
        return Err(Failure::Config(
            "sweep grid is empty: populate \"lambdas\" and/or \"layer_norm\"".into(),
        ));
    }
    if spec.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Failure::Config("every lambda must lie in [0, 1]".into()));
    }
    let lambdas = if spec.lambdas.is_empty() {
        vec![base.pretrain.lambda_mix]
    } else {
        spec.lambdas.clone()
    };
    let norms =
        if spec.layer_norm.is_empty() { vec![base.agent.layer_norm] } else { spec.layer_norm.clone() };
    let mut points = Vec::with_capacity(lambdas.len() * norms.len());
    for &lambda in &lambdas {
        for &layer_norm in &norms {
            points.push(GridPoint { lambda, layer_norm });
        }
    }
    Ok(points)
}

pub fn point_config(
    base: &ExperimentConfig,
    point: GridPoint,
    seeds: &[u64],
    out: &std::path::Path,
) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.pretrain.lambda_mix = point.lambda;
    cfg.agent.layer_norm = point.layer_norm;
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    cfg.name = format!(
        "{}-lam{}-ln-{}",
        base.name,
        point.lambda,
        if point.layer_norm { "on" } else { "off" }
    );
    cfg.output_dir = Some(out.join(&cfg.name));
    cfg
}

const AGG_HEADER: &str =
    "lambda,layer_norm,n_seeds,mean_score,std_score,median_steps_to_threshold,failed_seeds,error\n";

fn aggregate_row(point: GridPoint, result: &Result<ExperimentOutcome, String>) -> String {
    match result {
        Ok(outcome) => {
            let r = &outcome.report;
            let failed = outcome.runs.iter().filter(|o| o.error.is_some()).count();
            let crossed = r.steps_to_threshold.map_or(String::new(), |s| s.to_string());
            format!(
                "{},{},{},{},{},{crossed},{failed},\n",
                point.lambda, point.layer_norm, r.n_seeds, r.mean, r.std
            )
        }
        // Commas would shift the columns; the message is free-form text.
        Err(msg) => format!(
            "{},{},0,,,,,{}\n",
            point.lambda,
            point.layer_norm,
            msg.replace(',', ";")
        ),
    }
}

pub fn run(args: Args) -> CmdResult {
    init_jobs(args.jobs)?;
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec: SweepSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("bad sweep config {}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        spec.seeds = vec![seed];
    }
    let base = base_config(&spec)?;
    let points = grid_points(&spec, &base)?;
    echo_config(&spec)?;
    println!(
        "grid: {} points x {} seeds = {} runs",
        points.len(),
        if spec.seeds.is_empty() { base.seeds.len() } else { spec.seeds.len() },
        points.len() * if spec.seeds.is_empty() { base.seeds.len() } else { spec.seeds.len() }
    );
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", args.out.display())))?;

    let results: Vec<(GridPoint, Result<ExperimentOutcome, String>)> = points
        .par_iter()
        .map(|&point| {
            let cfg = point_config(&base, point, &spec.seeds, &args.out);
            (point, run_experiment(&cfg).map_err(|e| e.to_string()))
        })
        .collect();

    let mut csv = String::from(AGG_HEADER);
    let mut n_failed_points = 0;
    for (point, result) in &results {
        csv.push_str(&aggregate_row(*point, result));
        match result {
            Ok(outcome) => println!(
                "lambda {} / ln {}: {:.4} +/- {:.4} over {} seeds",
                point.lambda,
                point.layer_norm,
                outcome.report.mean,
                outcome.report.std,
                outcome.report.n_seeds
            ),
            Err(msg) => {
                n_failed_points += 1;
                println!("lambda {} / ln {}: FAILED: {msg}", point.lambda, point.layer_norm);
            }
        }
    }
    let agg_path = args.out.join("sweep.csv");
    fs::write(&agg_path, &csv)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", agg_path.display())))?;
    println!("aggregate written to {}", agg_path.display());
    if n_failed_points == results.len() {
        return Err(Failure::Config("every grid point failed".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(lambdas: Vec<f64>, layer_norm: Vec<bool>) -> SweepSpec {
        SweepSpec {
            preset: Some("pointmass-td3bc".into()),
            base: None,
            lambdas,
            layer_norm,
            seeds: vec![1, 2],
        }
    }

    #[test]
    fn cross_product_covers_both_axes() {
        let spec = spec_with(vec![0.0, 0.5], vec![true, false]);
        let base = base_config(&spec).unwrap();
        let points = grid_points(&spec, &base).unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!(points.iter().filter(|p| p.layer_norm).count(), 2);
    }

    #[test]
    fn missing_axis_pins_the_base_value() {
        let spec = spec_with(vec![0.0, 0.1, 1.0], vec![]);
        let base = base_config(&spec).unwrap();
        let points = grid_points(&spec, &base).unwrap();
        assert_eq!(points.len(), 3);
        assert!(points.iter().all(|p| p.layer_norm == base.agent.layer_norm));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let spec = spec_with(vec![], vec![]);
        let base = base_config(&spec).unwrap();
        assert!(matches!(grid_points(&spec, &base), Err(Failure::Config(_))));
    }

    #[test]
    fn point_configs_differ_in_name_and_knobs() {
        let spec = spec_with(vec![0.0, 1.0], vec![]);
        let base = base_config(&spec).unwrap();
        let out = std::path::Path::new("/tmp/sweep");
        let a = point_config(&base, GridPoint { lambda: 0.0, layer_norm: true }, &[7], out);
        let b = point_config(&base, GridPoint { lambda: 1.0, layer_norm: false }, &[7], out);
        assert_eq!(a.pretrain.lambda_mix, 0.0);
        assert_eq!(b.pretrain.lambda_mix, 1.0);
        assert!(a.agent.layer_norm && !b.agent.layer_norm);
        assert_ne!(a.name, b.name);
        assert_eq!(a.seeds, vec![7]);
        assert!(a.output_dir.unwrap().starts_with(out));
    }

    #[test]
    fn failed_points_keep_the_row_machine_readable() {
        let point = GridPoint { lambda: 0.5, layer_norm: true };
        let row = aggregate_row(point, &Err("bad, very bad".into()));
        assert_eq!(row.matches(',').count(), AGG_HEADER.matches(',').count());
        assert!(row.contains("bad; very bad"));
    }
}
