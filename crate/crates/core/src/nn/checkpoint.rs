//! Exact network snapshots as human-readable JSON.
//!
//! Parameters are stored as nested lists (matrices as rows, row vectors
//! flat); serde's shortest-roundtrip float printing makes save/load
//! bit-exact for every f64.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::mlp::MlpConfig;
use super::optim::{Adam, AdamConfig};
use super::param::ParamTree;
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NestedArray {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl NestedArray {
    pub fn from_mat(m: &Mat) -> Self {
        if m.rows == 1 {
            NestedArray::Vector(m.row(0).to_vec())
        } else {
            NestedArray::Matrix((0..m.rows).map(|r| m.row(r).to_vec()).collect())
        }
    }

    pub fn to_mat(&self) -> Result<Mat, NnError> {
        match self {
            NestedArray::Vector(v) => Ok(Mat::row_vector(v.clone())),
            NestedArray::Matrix(rows) => Mat::from_rows(rows),
        }
    }
}

pub fn snapshot_params(params: &ParamTree) -> BTreeMap<String, NestedArray> {
    params.iter().map(|(k, m)| (k.to_string(), NestedArray::from_mat(m))).collect()
}

pub fn restore_params(snap: &BTreeMap<String, NestedArray>) -> Result<ParamTree, NnError> {
    let mut tree = ParamTree::new();
    for (k, v) in snap {
        tree.insert(k.clone(), v.to_mat()?);
    }
    Ok(tree)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamSnapshot {
    pub cfg: AdamConfig,
    pub t: u64,
    pub m: Option<BTreeMap<String, NestedArray>>,
    pub v: Option<BTreeMap<String, NestedArray>>,
}

impl Adam {
    pub fn snapshot(&self) -> AdamSnapshot {
        AdamSnapshot {
            cfg: self.cfg,
            t: self.t,
            m: self.m.as_ref().map(snapshot_params),
            v: self.v.as_ref().map(snapshot_params),
        }
    }

    pub fn restore(snap: &AdamSnapshot) -> Result<Self, NnError> {
        Ok(Adam {
            cfg: snap.cfg,
            m: snap.m.as_ref().map(restore_params).transpose()?,
            v: snap.v.as_ref().map(restore_params).transpose()?,
            t: snap.t,
        })
    }
}

/// One network plus (optionally) its optimizer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetSnapshot {
    pub config: MlpConfig,
    pub params: BTreeMap<String, NestedArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamSnapshot>,
}

impl NetSnapshot {
    pub fn capture(config: &MlpConfig, params: &ParamTree, adam: Option<&Adam>) -> Self {
        NetSnapshot {
            config: config.clone(),
            params: snapshot_params(params),
            adam: adam.map(Adam::snapshot),
        }
    }

    pub fn params(&self) -> Result<ParamTree, NnError> {
        restore_params(&self.params)
    }

    pub fn adam(&self) -> Result<Option<Adam>, NnError> {
        self.adam.as_ref().map(Adam::restore).transpose()
    }
}

pub fn save_snapshots(
    path: &Path,
    snapshots: &BTreeMap<String, NetSnapshot>,
) -> Result<(), NnError> {
    let json = serde_json::to_string_pretty(snapshots)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<BTreeMap<String, NetSnapshot>, NnError> {
    let raw = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{mlp_forward, mlp_init};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let cfg = MlpConfig::new(3, vec![5], 2).with_layer_norm();
        let params = mlp_init(&cfg, 17).unwrap();
        let snap = NetSnapshot::capture(&cfg, &params, None);
        let json = serde_json::to_string(&snap).unwrap();
        let back: NetSnapshot = serde_json::from_str(&json).unwrap();
        let restored = back.params().unwrap();
        assert_eq!(restored, params); // f64 equality, every leaf
        assert_eq!(back.config, cfg);
    }

    #[test]
    fn optimizer_resume_matches_an_uninterrupted_run() {
        let cfg = MlpConfig::new(2, vec![4], 1);
        let mut params_a = mlp_init(&cfg, 5).unwrap();
        let mut adam_a = Adam::new(AdamConfig::with_lr(0.01));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut batches = Vec::new();
        for _ in 0..10 {
            let mut x = Mat::zeros(4, 2);
            for v in x.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            batches.push(x);
        }
        let grad_of = |params: &ParamTree, x: &Mat| {
            let (y, tape) = mlp_forward(params, &cfg, x).unwrap();
            let dy = y.map(|v| 2.0 * v / (y.rows as f64)); // pull outputs to zero
            crate::nn::mlp::mlp_backward(params, &cfg, &tape, &dy).unwrap().0
        };
        for x in &batches[..5] {
            let g = grad_of(&params_a, x);
            adam_a.step(&mut params_a, &g).unwrap();
        }
        // Snapshot mid-run, then continue both copies identically.
        let snap = NetSnapshot::capture(&cfg, &params_a, Some(&adam_a));
        let mut params_b = snap.params().unwrap();
        let mut adam_b = snap.adam().unwrap().unwrap();
        for x in &batches[5..] {
            let ga = grad_of(&params_a, x);
            adam_a.step(&mut params_a, &ga).unwrap();
            let gb = grad_of(&params_b, x);
            adam_b.step(&mut params_b, &gb).unwrap();
        }
        assert_eq!(params_a, params_b);
    }

    #[test]
    fn file_roundtrip_through_a_named_collection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nets.json");
        let cfg = MlpConfig::new(2, vec![3], 1);
        let mut nets = BTreeMap::new();
        nets.insert("actor".to_string(), NetSnapshot::capture(&cfg, &mlp_init(&cfg, 1).unwrap(), None));
        nets.insert("critic".to_string(), NetSnapshot::capture(&cfg, &mlp_init(&cfg, 2).unwrap(), None));
        save_snapshots(&path, &nets).unwrap();
        let back = load_snapshots(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back["actor"].params().unwrap(), nets["actor"].params().unwrap());
    }
}
