//! Out-of-distribution value penalty for critic ensembles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::actor_critic::concat_input;
use super::AgentError;
use crate::nn::{mlp_backward, mlp_forward, Mat, MlpConfig, ParamTree};

/// Per-critic penalty values and parameter gradients.
#[derive(Debug)]
pub struct CqlPenalty {
    pub values: Vec<f64>,
    pub grads: Vec<ParamTree>,
}

impl CqlPenalty {
    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// The penalty with caller-provided probe actions, for reproducible tests:
/// `t * mean_s LSE_k(Q(s, a_k) / t) - mean_s Q(s, a_data)`.
///
/// `probes` holds `n` actions per observation, row `b * n + k` pairing with
/// observation `b`. A temperature below 1e-12 switches the log-sum-exp to a
/// hard max over the probes. A constant critic scores exactly
/// `t * ln(n)`: the probe term collapses to the constant plus `t ln n` and
/// the data term subtracts the constant.
pub fn cql_penalty_with_actions(
    critics: &[ParamTree],
    critic_cfg: &MlpConfig,
    obs: &Mat,
    data_act: &Mat,
    probes: &Mat,
    temperature: f64,
) -> Result<CqlPenalty, AgentError> {
    let b = obs.rows;
    if b == 0 || probes.rows % b != 0 || probes.rows == 0 {
        return Err(AgentError::BadConfig("probe action count must be a positive multiple of the batch".into()));
    }
    let n = probes.rows / b;
    let act_dim = data_act.cols;
    let mut stacked = Mat::zeros(b * n, obs.cols + act_dim);
    for bi in 0..b {
        for k in 0..n {
            let row = stacked.row_mut(bi * n + k);
            row[..obs.cols].copy_from_slice(obs.row(bi));
            row[obs.cols..].copy_from_slice(probes.row(bi * n + k));
        }
    }
    let data_input = concat_input(obs, data_act);
    let batch = b as f64;
    let mut values = Vec::with_capacity(critics.len());
    let mut grads = Vec::with_capacity(critics.len());
    for critic in critics {
        let (q_probe, probe_tape) = mlp_forward(critic, critic_cfg, &stacked)?;
        let (q_data, data_tape) = mlp_forward(critic, critic_cfg, &data_input)?;
        let mut dy_probe = Mat::zeros(b * n, 1);
        let mut probe_term = 0.0;
        for bi in 0..b {
            let qs: Vec<f64> = (0..n).map(|k| q_probe.at(bi * n + k, 0)).collect();
            let top = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if temperature < 1e-12 {
                // Hard-max limit: all weight on the first maximizer.
                let arg = qs.iter().position(|&q| q == top).unwrap();
                probe_term += top / batch;
                *dy_probe.at_mut(bi * n + arg, 0) = 1.0 / batch;
            } else {
                let exps: Vec<f64> = qs.iter().map(|q| ((q - top) / temperature).exp()).collect();
                let z: f64 = exps.iter().sum();
                probe_term += (top + temperature * z.ln()) / batch;
                for k in 0..n {
                    *dy_probe.at_mut(bi * n + k, 0) = exps[k] / z / batch;
                }
            }
        }
        let data_term = (0..b).map(|bi| q_data.at(bi, 0)).sum::<f64>() / batch;
        let dy_data = Mat::zeros(b, 1).map(|_| -1.0 / batch);
        let (mut g, _) = mlp_backward(critic, critic_cfg, &probe_tape, &dy_probe)?;
        let (g_data, _) = mlp_backward(critic, critic_cfg, &data_tape, &dy_data)?;
        g.add_scaled(&g_data, 1.0)?;
        values.push(probe_term - data_term);
        grads.push(g);
    }
    Ok(CqlPenalty { values, grads })
}

/// Draws `n_actions` uniform probe actions from the unit box per
/// observation (shared across critics) and evaluates the penalty.
pub fn cql_penalty(
    critics: &[ParamTree],
    critic_cfg: &MlpConfig,
    obs: &Mat,
    data_act: &Mat,
    n_actions: usize,
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CqlPenalty, AgentError> {
    let act_dim = data_act.cols;
    let mut probes = Mat::zeros(obs.rows * n_actions, act_dim);
    for v in probes.data_mut() {
        *v = rng.random_range(-1.0..=1.0);
    }
    cql_penalty_with_actions(critics, critic_cfg, obs, data_act, &probes, temperature)
}
