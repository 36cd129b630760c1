//! Named desk-scale experiment configurations: the headline
//! pretrained-vs-scratch pair plus the ablation and hybrid studies. All of
//! them run in minutes on one core; tweak fields after lookup for anything
//! bigger.

use crate::agents::{AgentConfig, BcMode, PretrainConfig, ValueRegularizer};

use super::experiment::{DatasetSource, EnvConfig, ExperimentConfig};
use super::HarnessError;

const NAMES: &[&str] = &[
    "pointmass-td3bc",
    "pointmass-td3bc-scratch",
    "pointmass-td3bc-bc-only",
    "pointmass-td3bc-no-layernorm",
    "pointmass-td3bc-cql",
    "pointmass-soft",
    "pointmass-soft-bc",
    "pointmass-td3bc-small-data",
];

pub fn preset_names() -> &'static [&'static str] {
    NAMES
}

fn base(name: &str) -> ExperimentConfig {
    let mut agent = AgentConfig::hard(2, 1);
    agent.hidden = vec![32, 32];
    ExperimentConfig {
        name: name.into(),
        env: EnvConfig { dim: 1, sparse: false },
        dataset: DatasetSource::Generate { quality: 0.5, episodes: 200, seed: 20_177 },
        agent,
        pretrain: PretrainConfig::new(1_500, 1_500),
        total_steps: 10_000,
        eval_every: 250,
        eval_episodes: 10,
        log_every: 50,
        anchor_episodes: 100,
        seeds: vec![1, 2, 3, 4, 5],
        threshold: None,
        output_dir: None,
    }
}

/// Looks up a named configuration. Unknown names list the catalog in the
/// error, so typos surface immediately instead of as a silent default.
pub fn preset(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = base(name);
    match name {
        // Headline pair: supervised pre-training of actor and critic versus
        // learning everything during off-policy improvement.
        "pointmass-td3bc" => {}
        "pointmass-td3bc-scratch" => cfg.pretrain = PretrainConfig::none(),
        // Critic ablation: clone the actor but leave the critic random.
        "pointmass-td3bc-bc-only" => cfg.pretrain = PretrainConfig::new(1_500, 0),
        // Normalization ablation.
        "pointmass-td3bc-no-layernorm" => cfg.agent.layer_norm = false,
        // Hybrid: out-of-distribution value penalty in both phases, same
        // weight in each.
        "pointmass-td3bc-cql" => {
            let penalty = ValueRegularizer::Cql { weight: 1.0, n_actions: 10, temperature: 1.0 };
            cfg.agent.value_regularizer = penalty;
            cfg.pretrain.value_regularizer = penalty;
        }
        // Stochastic-actor family: soft cloning, entropy-augmented returns,
        // and gradient-diversified ensemble, again with matching weights.
        "pointmass-soft" | "pointmass-soft-bc" => {
            let mut agent = AgentConfig::soft(2, 1);
            agent.hidden = vec![32, 32];
            let penalty = ValueRegularizer::Diversify { eta: 1.0 };
            agent.value_regularizer = penalty;
            if name == "pointmass-soft-bc" {
                agent.bc_anchor = true;
            }
            cfg.pretrain.bc_mode = BcMode::Soft { temperature: agent.entropy_alpha };
            cfg.pretrain.value_regularizer = penalty;
            cfg.agent = agent;
        }
        // Low-data regime for the hybrid-vs-cloning comparison.
        "pointmass-td3bc-small-data" => {
            cfg.dataset = DatasetSource::Generate { quality: 0.5, episodes: 25, seed: 20_177 };
        }
        other => {
            return Err(HarnessError::UnknownPreset(format!(
                "{other}; known presets: {}",
                NAMES.join(", ")
            )))
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, *name);
        }
    }

    #[test]
    fn presets_differ_where_it_matters() {
        assert_eq!(preset("pointmass-td3bc-scratch").unwrap().pretrain.actor_steps, 0);
        let bc_only = preset("pointmass-td3bc-bc-only").unwrap();
        assert!(!bc_only.pretrain.pretrain_critic);
        assert!(bc_only.pretrain.actor_steps > 0);
        assert!(!preset("pointmass-td3bc-no-layernorm").unwrap().agent.layer_norm);
        let cql = preset("pointmass-td3bc-cql").unwrap();
        assert_eq!(cql.agent.value_regularizer, cql.pretrain.value_regularizer);
        let soft = preset("pointmass-soft").unwrap();
        assert_eq!(soft.agent.algorithm, Algorithm::EnsembleSoftAc);
        assert!(matches!(soft.pretrain.bc_mode, BcMode::Soft { .. }));
        assert!(preset("pointmass-soft-bc").unwrap().agent.bc_anchor);
        assert!(matches!(preset("nope"), Err(HarnessError::UnknownPreset(_))));
    }
}
