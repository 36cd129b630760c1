//! Adam with bias correction, and the slow-copy update for target networks.

use serde::{Deserialize, Serialize};

use super::param::ParamTree;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(NnError::BadConfig(format!("bad optimizer settings: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub(crate) m: Option<ParamTree>,
    pub(crate) v: Option<ParamTree>,
    pub(crate) t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, m: None, v: None, t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. Rejects non-finite gradients up front,
    /// naming the offending leaf — a poisoned moment estimate cannot be
    /// washed out later.
    pub fn step(&mut self, params: &mut ParamTree, grads: &ParamTree) -> Result<(), NnError> {
        self.cfg.validate()?;
        if let Some(leaf) = grads.first_non_finite() {
            return Err(NnError::NonFiniteGrad { leaf: leaf.to_string() });
        }
        if self.m.is_none() {
            self.m = Some(grads.zeros_like());
            self.v = Some(grads.zeros_like());
        }
        let m = self.m.as_mut().unwrap();
        let v = self.v.as_mut().unwrap();
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        m.zip_apply(grads, |m, g| b1 * m + (1.0 - b1) * g)?;
        v.zip_apply(grads, |v, g| b2 * v + (1.0 - b2) * g * g)?;
        let mc = 1.0 - b1.powi(self.t as i32);
        let vc = 1.0 - b2.powi(self.t as i32);
        let (lr, eps) = (self.cfg.lr, self.cfg.eps);
        // theta -= lr * (m / mc) / (sqrt(v / vc) + eps); fold the two moment
        // trees into params via an intermediate update tree.
        let mut update = m.clone();
        update.zip_apply(v, |mv, vv| lr * (mv / mc) / ((vv / vc).sqrt() + eps))?;
        params.zip_apply(&update, |p, u| p - u)?;
        Ok(())
    }
}

/// Slow-copy update for a target network, in retention form:
/// `target <- tau * target + (1 - tau) * online`. `tau = 1` freezes the
/// target, `tau = 0` copies the online network outright.
pub fn polyak_update(target: &mut ParamTree, online: &ParamTree, tau: f64) -> Result<(), NnError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::BadConfig(format!("tau must lie in [0, 1], got {tau}")));
    }
    target.zip_apply(online, |t, o| tau * t + (1.0 - tau) * o)
}
