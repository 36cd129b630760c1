//! Named parameter collections with mutation tracking.
//!
//! Every tree carries a unique id and a version counter that bumps on any
//! mutation. Forward passes stamp their tapes with both, and backward passes
//! refuse stale tapes — replaying activations against parameters that have
//! moved is a silent-corruption bug, not a recoverable state.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::mat::Mat;
use super::NnError;

static NEXT_TREE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_TREE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Where a tape came from: which tree, at which version.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStamp {
    pub id: u64,
    pub version: u64,
}

#[derive(Debug)]
pub struct ParamTree {
    leaves: BTreeMap<String, Mat>,
    id: u64,
    version: u64,
}

impl Default for ParamTree {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for ParamTree {
    /// Clones get a fresh identity: a tape recorded against the original is
    /// not valid for the copy (target networks are clones of online ones).
    fn clone(&self) -> Self {
        ParamTree { leaves: self.leaves.clone(), id: fresh_id(), version: 0 }
    }
}

impl PartialEq for ParamTree {
    /// Value equality: same leaves, same contents. Identity is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.leaves == other.leaves
    }
}

impl ParamTree {
    pub fn new() -> Self {
        ParamTree { leaves: BTreeMap::new(), id: fresh_id(), version: 0 }
    }

    pub fn stamp(&self) -> TreeStamp {
        TreeStamp { id: self.id, version: self.version }
    }

    pub fn insert(&mut self, name: impl Into<String>, mat: Mat) {
        self.leaves.insert(name.into(), mat);
        self.version += 1;
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.leaves.get(name)
    }

    pub fn expect(&self, name: &str) -> Result<&Mat, NnError> {
        self.leaves.get(name).ok_or_else(|| NnError::MissingLeaf(name.to_string()))
    }

    pub fn leaf_names(&self) -> impl Iterator<Item = &str> {
        self.leaves.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.leaves.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.leaves.values().map(|m| m.rows * m.cols).sum()
    }

    /// Elementwise map into a fresh tree (same keys, new identity).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamTree {
        let mut out = ParamTree::new();
        for (k, v) in &self.leaves {
            out.leaves.insert(k.clone(), v.map(&f));
        }
        out
    }

    pub fn zeros_like(&self) -> ParamTree {
        self.map(|_| 0.0)
    }

    fn check_keys(&self, other: &ParamTree, context: &'static str) -> Result<(), NnError> {
        if self.leaves.len() != other.leaves.len()
            || !self.leaves.keys().eq(other.leaves.keys())
        {
            return Err(NnError::LeafSetMismatch { context });
        }
        Ok(())
    }

    /// `self[k] <- f(self[k], other[k])` elementwise over identical leaf sets.
    pub fn zip_apply(
        &mut self,
        other: &ParamTree,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(), NnError> {
        self.check_keys(other, "zip_apply")?;
        for (k, v) in &mut self.leaves {
            let o = &other.leaves[k];
            if v.rows != o.rows || v.cols != o.cols {
                return Err(NnError::ShapeMismatch {
                    context: "zip_apply",
                    expected: (v.rows, v.cols),
                    got: (o.rows, o.cols),
                });
            }
            for (a, &b) in v.data_mut().iter_mut().zip(o.data()) {
                *a = f(*a, b);
            }
        }
        self.version += 1;
        Ok(())
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &ParamTree, c: f64) -> Result<(), NnError> {
        self.zip_apply(other, |a, b| a + c * b)
    }

    /// Returns the name of the first leaf holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.leaves
            .iter()
            .find(|(_, m)| !m.is_finite())
            .map(|(k, _)| k.as_str())
    }

    pub fn max_abs(&self) -> f64 {
        self.leaves
            .values()
            .flat_map(|m| m.data().iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Flattens all leaves (in key order) into one vector — finite-difference
    /// checks perturb through this view.
    pub fn flatten(&self) -> Vec<f64> {
        self.leaves.values().flat_map(|m| m.data().iter().copied()).collect()
    }

    /// Writes a flat vector (in key order) back into the leaves.
    pub fn unflatten_into(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.num_params() {
            return Err(NnError::ShapeMismatch {
                context: "unflatten_into",
                expected: (self.num_params(), 1),
                got: (flat.len(), 1),
            });
        }
        let mut offset = 0;
        for m in self.leaves.values_mut() {
            let n = m.rows * m.cols;
            m.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        self.version += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> ParamTree {
        let mut t = ParamTree::new();
        t.insert("a.w", Mat::from_rows(&[vec![1.0, 2.0]]).unwrap());
        t.insert("b.w", Mat::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
        t
    }

    #[test]
    fn mutation_bumps_version_and_clone_changes_identity() {
        let mut t = tree();
        let s0 = t.stamp();
        t.add_scaled(&t.clone(), 0.5).unwrap();
        assert_eq!(t.stamp().id, s0.id);
        assert!(t.stamp().version > s0.version);
        let c = t.clone();
        assert_ne!(c.stamp().id, t.stamp().id);
        assert_eq!(c, t); // value equality survives the identity change
    }

    #[test]
    fn zip_apply_rejects_mismatched_leaf_sets() {
        let mut t = tree();
        let mut other = ParamTree::new();
        other.insert("a.w", Mat::zeros(1, 2));
        assert!(matches!(
            t.zip_apply(&other, |a, _| a),
            Err(NnError::LeafSetMismatch { .. })
        ));
    }

    #[test]
    fn flatten_roundtrips_in_key_order() {
        let mut t = tree();
        let flat = t.flatten();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0]); // "a.w" sorts before "b.w"
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        t.unflatten_into(&doubled).unwrap();
        assert_eq!(t.get("b.w").unwrap().at(1, 0), 8.0);
    }

    #[test]
    fn first_non_finite_names_the_leaf() {
        let mut t = tree();
        *t.leaves.get_mut("b.w").unwrap().at_mut(0, 0) = f64::NAN;
        assert_eq!(t.first_non_finite(), Some("b.w"));
    }
}
