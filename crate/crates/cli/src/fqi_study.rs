//! Warm-start study for exact value iteration: interpolate the initial table
//! between zero and the solved optimum and count backups to convergence on a
//! batch of random MDPs.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use orlab::envs::{random_tabular_mdp, solve_optimal_tabular};
use orlab::tabular::{fqi_init_sweep, NoiseInjection};
use orlab::InitStrategy;

use crate::{echo_config, CmdResult, Failure};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// States per random MDP.
    #[arg(long, default_value_t = 10)]
    states: usize,
    /// Actions per state.
    #[arg(long, default_value_t = 4)]
    actions: usize,
    /// How many random MDPs enter the study.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// First MDP seed; instances use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interpolation weights toward the solved table, ascending in [0, 1].
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0])]
    betas: Vec<f64>,
    /// Sup-norm distance to the optimum that counts as converged.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Half-width of a per-backup perturbation emulating regression error.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Per-run CSV destination.
    #[arg(long, default_value = "fqi-study.csv")]
    out: PathBuf,
}

fn validate(args: &Args) -> CmdResult {
    if args.betas.is_empty() {
        return Err(Failure::Config("--betas must not be empty".into()));
    }
    if args.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Failure::Config("every beta must lie in [0, 1]".into()));
    }
    if args.betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::Config("betas must be strictly increasing".into()));
    }
    if args.seeds == 0 {
        return Err(Failure::Config("--seeds must be at least 1".into()));
    }
    if !(args.gamma > 0.0 && args.gamma < 1.0) {
        return Err(Failure::Config("gamma must lie in (0, 1) for the contraction to hold".into()));
    }
    if args.noise < 0.0 || !args.noise.is_finite() {
        return Err(Failure::Config("--noise must be a finite non-negative number".into()));
    }
    Ok(())
}

/// Lower median of an unsorted sample.
fn median(xs: &mut [usize]) -> usize {
    xs.sort_unstable();
    xs[(xs.len() - 1) / 2]
}

/// The claim under test: warmer starts never need more backups, in the
/// median over instances. Returns the first offending pair.
fn monotone_violation(medians: &[(f64, usize)]) -> Option<String> {
    medians.windows(2).find(|w| w[1].1 > w[0].1).map(|w| {
        format!(
            "median iterations rose from {} at beta={} to {} at beta={}",
            w[0].1, w[0].0, w[1].1, w[1].0
        )
    })
}

pub fn run(args: Args) -> CmdResult {
    validate(&args)?;
    echo_config(&args)?;
    let start = Instant::now();

    let mut csv = String::from("seed,beta,iterations,converged,delta,init_error,final_error\n");
    let mut per_beta: Vec<Vec<usize>> = vec![Vec::new(); args.betas.len()];
    for offset in 0..args.seeds {
        let seed = args.seed.wrapping_add(offset as u64);
        let mdp = random_tabular_mdp(args.states, args.actions, seed, 1.0)
            .map_err(Failure::config)?;
        let anchor = solve_optimal_tabular(&mdp, args.gamma, 1e-12).map_err(Failure::config)?;
        let inits: Vec<InitStrategy> = args
            .betas
            .iter()
            .map(|&beta| InitStrategy::Interpolated { beta, anchor: anchor.clone() })
            .collect();
        let noise = (args.noise > 0.0)
            .then_some(NoiseInjection { scale: args.noise, seed: seed ^ 0x0F01_5EED });
        let entries =
            fqi_init_sweep(&mdp, None, args.gamma, &inits, args.delta, 100_000, noise.as_ref())
                .map_err(Failure::config)?;
        for (i, entry) in entries.iter().enumerate() {
            let r = &entry.report;
            csv.push_str(&format!(
                "{seed},{},{},{},{},{},{}\n",
                args.betas[i], r.iterations, r.converged, r.delta, r.init_error, r.final_error
            ));
            per_beta[i].push(r.iterations);
        }
    }
    fs::write(&args.out, &csv)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "wrote {} rows to {} in {:.2}s",
        args.betas.len() * args.seeds,
        args.out.display(),
        start.elapsed().as_secs_f64()
    );

    let medians: Vec<(f64, usize)> = args
        .betas
        .iter()
        .zip(per_beta.iter_mut())
        .map(|(&beta, iters)| (beta, median(iters)))
        .collect();
    let summary = medians
        .iter()
        .map(|(beta, med)| format!("beta={beta}: {med}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("median iterations: {summary}");
    if let Some(msg) = monotone_violation(&medians) {
        return Err(Failure::Property(msg));
    }
    println!("OK: median iterations are non-increasing in beta");
    Ok(())
}
