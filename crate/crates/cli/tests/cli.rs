//! End-to-end checks through the compiled binary: exit codes, artifacts on
//! disk, and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use orlab::harness::{DatasetSource, EnvConfig};
use orlab::{AgentConfig, ExperimentConfig, PretrainConfig};

fn orlab_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orlab")).args(args).output().expect("binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// A deliberately small experiment so end-to-end runs stay fast.
fn tiny_config(name: &str) -> ExperimentConfig {
    let mut agent = AgentConfig::hard(2, 1);
    agent.hidden = vec![8];
    agent.batch_size = 16;
    ExperimentConfig {
        name: name.into(),
        env: EnvConfig { dim: 1, sparse: false },
        dataset: DatasetSource::Generate { quality: 0.6, episodes: 3, seed: 5 },
        agent,
        pretrain: PretrainConfig::new(6, 6),
        total_steps: 24,
        eval_every: 12,
        eval_episodes: 2,
        log_every: 4,
        anchor_episodes: 4,
        seeds: vec![3, 1],
        threshold: None,
        output_dir: None,
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

/// Drops the final (wall-clock) column from every line.
fn strip_last_column(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn table1_reference_setting_passes() {
    let out = orlab_cmd(&["table1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("resolved config"), "{text}");
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn table1_first_visit_variant_passes() {
    let out = orlab_cmd(&["table1", "--visit-mode", "first"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));
}

#[test]
fn table1_fractional_lr_skips_the_verdict() {
    let out = orlab_cmd(&["table1", "--lr", "0.5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("non-paper setting"), "{text}");
    assert!(!text.contains("PASS"), "{text}");
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = orlab_cmd(&["table1", "--bogus"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn help_exits_clean() {
    let out = orlab_cmd(&["--help"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn fqi_study_emits_one_row_per_cell_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("study.csv");
    let out = orlab_cmd(&[
        "fqi-study",
        "--seeds",
        "5",
        "--states",
        "6",
        "--actions",
        "3",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("non-increasing"));

    let csv = fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5 * 5, "default betas x 5 seeds");
    // A start already at the fixed point converges in zero backups.
    for row in rows.iter().filter(|r| r.split(',').nth(1) == Some("1")) {
        assert_eq!(row.split(',').nth(2), Some("0"), "{row}");
    }
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = orlab_cmd(&[
            "gen-data",
            "--episodes",
            "4",
            "--quality",
            "0.8",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("content hash"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn train_artifacts_are_deterministic_and_feed_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), &tiny_config("tiny"));
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out_dir in [&out1, &out2] {
        let out = orlab_cmd(&[
            "train",
            "--config",
            &cfg_path,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("aggregate:"));
    }
    for seed in [1, 3] {
        let a = fs::read_to_string(out1.join(format!("tiny-seed{seed}.csv"))).unwrap();
        let b = fs::read_to_string(out2.join(format!("tiny-seed{seed}.csv"))).unwrap();
        assert_eq!(strip_last_column(&a), strip_last_column(&b), "seed {seed}");
    }
    assert!(out1.join("tiny-manifest.json").exists());

    // The checkpoint written alongside the metrics evaluates deterministically.
    let ckpt = out1.join("tiny-seed3-agent.json");
    let eval = |seed: &str| {
        let out = orlab_cmd(&[
            "evaluate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--episodes",
            "3",
            "--seed",
            seed,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    };
    let first = eval("7");
    assert!(first.contains("mean return"), "{first}");
    assert_eq!(first, eval("7"));

    // Wrong environment for the checkpoint is a config error naming the shapes.
    let out = orlab_cmd(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--dim", "2"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("dimensions"), "{}", stderr(&out));
}

#[test]
fn train_without_a_source_lists_presets() {
    let out = orlab_cmd(&["train"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("pointmass-td3bc"), "{}", stderr(&out));
}

#[test]
fn sweep_covers_the_grid_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = tiny_config("sw");
    base.seeds = vec![3];
    let spec = serde_json::json!({ "base": base, "lambdas": [0.0, 1.0] });
    let spec_path = dir.path().join("sweep.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let out_dir = dir.path().join("grid");
    let out = orlab_cmd(&[
        "sweep",
        "--config",
        spec_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let agg = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines.len(), 3, "{agg}");
    assert!(lines[0].starts_with("lambda,layer_norm,"));
    assert!(out_dir.join("sw-lam0-ln-on").join("sw-lam0-ln-on-seed3.csv").exists());
    assert!(out_dir.join("sw-lam1-ln-on").join("sw-lam1-ln-on-seed3.csv").exists());
}

#[test]
fn sweep_rejects_an_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let spec = serde_json::json!({ "base": tiny_config("sw") });
    let spec_path = dir.path().join("sweep.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let out = orlab_cmd(&["sweep", "--config", spec_path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("grid"), "{}", stderr(&out));
}

#[test]
fn plot_renders_metrics_and_rejects_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), &tiny_config("p"));
    let run_dir = dir.path().join("run");
    let out = orlab_cmd(&["train", "--config", &cfg_path, "--out", run_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let csv = run_dir.join("p-seed3.csv");
    let svg_path = dir.path().join("loss.svg");
    let out = orlab_cmd(&[
        "plot",
        "--input",
        csv.to_str().unwrap(),
        "--y",
        "loss_critic",
        "--window",
        "2",
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"), "{}", &svg[..svg.len().min(80)]);
    assert!(svg.contains("<polyline"));

    let out = orlab_cmd(&["plot", "--input", csv.to_str().unwrap(), "--y", "nope"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nope"), "{}", stderr(&out));
}

#[test]
fn bad_config_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    let out = orlab_cmd(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}
