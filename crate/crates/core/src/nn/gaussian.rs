//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The network emits `[mu, rho]` per action dimension; `rho` is a pre-clamp
//! log standard deviation. Sampling squashes `u = mu + sigma * xi` through
//! tanh, and the density picks up the change-of-variables term
//! `-ln(1 - a^2 + eps)` per dimension, with a small `eps` keeping the
//! boundary finite. All gradients here are hand derivatives with the noise
//! draw held fixed (the reparameterized estimator); clamped `rho` entries
//! get zero gradient.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const TANH_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `(sigma, gradient mask)` for a pre-clamp log standard deviation.
fn squash_std(rho: f64) -> (f64, f64) {
    if rho < LOG_STD_MIN {
        (LOG_STD_MIN.exp(), 0.0)
    } else if rho > LOG_STD_MAX {
        (LOG_STD_MAX.exp(), 0.0)
    } else {
        (rho.exp(), 1.0)
    }
}

/// Splits a head output row into its mean and log-std halves.
pub fn split_head(row: &[f64]) -> (&[f64], &[f64]) {
    debug_assert!(row.len() % 2 == 0, "head rows hold [mu, rho] pairs");
    row.split_at(row.len() / 2)
}

/// The greedy (evaluation-time) action: the squashed mean.
pub fn deterministic_action(mu: &[f64]) -> Vec<f64> {
    mu.iter().map(|m| m.tanh()).collect()
}

#[derive(Debug, Clone)]
pub struct SampledAction {
    pub action: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    pub noise: Vec<f64>,
    pub sigma: Vec<f64>,
    /// 1 where `rho` was interior to the clamp, 0 where it was saturated.
    pub clamp_mask: Vec<f64>,
    pub log_prob: f64,
}

pub fn sample_squashed(mu: &[f64], rho: &[f64], rng: &mut ChaCha8Rng) -> SampledAction {
    let dim = mu.len();
    let mut out = SampledAction {
        action: Vec::with_capacity(dim),
        pre_tanh: Vec::with_capacity(dim),
        noise: Vec::with_capacity(dim),
        sigma: Vec::with_capacity(dim),
        clamp_mask: Vec::with_capacity(dim),
        log_prob: 0.0,
    };
    for j in 0..dim {
        let xi: f64 = rng.sample(StandardNormal);
        let (sigma, mask) = squash_std(rho[j]);
        let u = mu[j] + sigma * xi;
        let a = u.tanh();
        out.log_prob += -sigma.ln() - HALF_LN_2PI - 0.5 * xi * xi - (1.0 - a * a + TANH_EPS).ln();
        out.action.push(a);
        out.pre_tanh.push(u);
        out.noise.push(xi);
        out.sigma.push(sigma);
        out.clamp_mask.push(mask);
    }
    out
}

/// Partials of the sampled log density w.r.t. the head outputs, with the
/// noise fixed: per dimension, with `t = tanh(u)` and
/// `g_u = 2 t (1 - t^2) / (1 - t^2 + eps)`,
///
/// `d logpi / d mu = g_u` and `d logpi / d rho = mask * (-1 + g_u * sigma * xi)`.
pub fn sampled_log_prob_grads(s: &SampledAction) -> (Vec<f64>, Vec<f64>) {
    let dim = s.action.len();
    let mut dmu = Vec::with_capacity(dim);
    let mut drho = Vec::with_capacity(dim);
    for j in 0..dim {
        let t = s.action[j];
        let one_m = 1.0 - t * t;
        let g_u = 2.0 * t * one_m / (one_m + TANH_EPS);
        dmu.push(g_u);
        drho.push(s.clamp_mask[j] * (-1.0 + g_u * s.sigma[j] * s.noise[j]));
    }
    (dmu, drho)
}

/// Partials of the sampled action itself w.r.t. the head outputs:
/// `da/dmu = 1 - a^2`, `da/drho = (1 - a^2) * sigma * xi * mask`.
/// These chain a critic's action gradient back into the policy network.
pub fn sampled_action_grads(s: &SampledAction) -> (Vec<f64>, Vec<f64>) {
    let dim = s.action.len();
    let mut dmu = Vec::with_capacity(dim);
    let mut drho = Vec::with_capacity(dim);
    for j in 0..dim {
        let one_m = 1.0 - s.action[j] * s.action[j];
        dmu.push(one_m);
        drho.push(one_m * s.sigma[j] * s.noise[j] * s.clamp_mask[j]);
    }
    (dmu, drho)
}

#[derive(Debug, Clone)]
pub struct FixedLogProb {
    pub log_prob: f64,
    pub dmu: Vec<f64>,
    pub drho: Vec<f64>,
}

/// Log density of a *given* action (a dataset action, not a fresh draw),
/// with its gradients w.r.t. the head outputs:
///
/// `d logpi / d mu = (u_a - mu) / sigma^2`,
/// `d logpi / d rho = mask * (((u_a - mu)/sigma)^2 - 1)`,
///
/// where `u_a = atanh(a)` after nudging `a` off the exact boundary.
pub fn log_prob_of(mu: &[f64], rho: &[f64], action: &[f64]) -> FixedLogProb {
    let dim = mu.len();
    let mut out = FixedLogProb {
        log_prob: 0.0,
        dmu: Vec::with_capacity(dim),
        drho: Vec::with_capacity(dim),
    };
    let lim = 1.0 - TANH_EPS;
    for j in 0..dim {
        let a = action[j].clamp(-lim, lim);
        let u = a.atanh();
        let (sigma, mask) = squash_std(rho[j]);
        let z = (u - mu[j]) / sigma;
        out.log_prob += -sigma.ln() - HALF_LN_2PI - 0.5 * z * z - (1.0 - a * a + TANH_EPS).ln();
        out.dmu.push(z / sigma);
        out.drho.push(mask * (z * z - 1.0));
    }
    out
}

/// Single-draw entropy estimate `-logpi(a~|s)` averaged over `n` draws.
pub fn entropy_estimate(mu: &[f64], rho: &[f64], rng: &mut ChaCha8Rng, n: usize) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n.max(1) {
        acc -= sample_squashed(mu, rho, rng).log_prob;
    }
    acc / n.max(1) as f64
}
