//! Shared fixtures for the benchmarks: a mid-quality point-mass dataset and
//! a small agent, built once per benchmark process.

use orlab::data::OfflineDataset;
use orlab::envs::{pointmass_env, rollout, scripted_behavior};
use orlab::{ActorCritic, AgentConfig, BehaviorPolicySpec};

pub fn medium_dataset(episodes: usize) -> OfflineDataset {
    let spec = pointmass_env(1, false).unwrap();
    let policy = scripted_behavior(&spec, &BehaviorPolicySpec::scripted(0.5)).unwrap();
    let trajectories = rollout(&mut spec.env(), &policy, episodes, 11).unwrap();
    OfflineDataset::new(trajectories, "bench-pointmass", 11)
}

pub fn small_agent() -> ActorCritic {
    let mut cfg = AgentConfig::hard(2, 1);
    cfg.hidden = vec![64, 64];
    ActorCritic::new(cfg, 0).unwrap()
}
