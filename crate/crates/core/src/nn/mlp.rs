//! Fully-connected ReLU networks with optional per-layer normalization.
//!
//! The forward pass records the activations a hand-written reverse pass
//! needs. Normalization sits between each hidden linear map and its ReLU
//! (never on the output layer), uses the population variance of each sample's
//! features, and owns a gain and shift per feature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::param::{ParamTree, TreeStamp};
use super::NnError;

fn default_ln_eps() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub layer_norm: bool,
    #[serde(default = "default_ln_eps")]
    pub ln_eps: f64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        MlpConfig { input_dim, hidden, output_dim, layer_norm: false, ln_eps: default_ln_eps() }
    }

    pub fn with_layer_norm(mut self) -> Self {
        self.layer_norm = true;
        self
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(NnError::BadConfig("all layer widths must be positive".into()));
        }
        if !self.ln_eps.is_finite() || self.ln_eps <= 0.0 {
            return Err(NnError::BadConfig(format!("ln_eps must be positive, got {}", self.ln_eps)));
        }
        Ok(())
    }

    /// Layer dimensions including input and output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden);
        d.push(self.output_dim);
        d
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }
}

/// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`;
/// normalization gains start at one, shifts at zero.
pub fn mlp_init(cfg: &MlpConfig, seed: u64) -> Result<ParamTree, NnError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = cfg.dims();
    let mut params = ParamTree::new();
    for i in 0..cfg.n_layers() {
        let (fan_in, fan_out) = (dims[i], dims[i + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut w = Mat::zeros(fan_in, fan_out);
        for v in w.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut b = Mat::zeros(1, fan_out);
        for v in b.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
        params.insert(format!("l{i}.w"), w);
        params.insert(format!("l{i}.b"), b);
        if cfg.layer_norm && i + 1 < cfg.n_layers() {
            params.insert(format!("l{i}.ln_g"), Mat::row_vector(vec![1.0; fan_out]));
            params.insert(format!("l{i}.ln_b"), Mat::zeros(1, fan_out));
        }
    }
    Ok(params)
}

struct LnTape {
    /// Normalized pre-gain activations, `[B, D]`.
    xhat: Mat,
    /// `1 / sqrt(var + eps)` per sample.
    inv_std: Vec<f64>,
}

struct LayerTape {
    /// Input to the layer, `[B, fan_in]`.
    x: Mat,
    ln: Option<LnTape>,
    /// ReLU input (post-normalization), `None` for the output layer.
    act_in: Option<Mat>,
}

/// Activations recorded by [`mlp_forward`], tied to the exact parameter
/// version that produced them.
pub struct Tape {
    stamp: TreeStamp,
    layers: Vec<LayerTape>,
    batch: usize,
}

fn layer_norm_forward(z: &Mat, gain: &Mat, shift: &Mat, eps: f64) -> (Mat, LnTape) {
    let d = z.cols as f64;
    let mut xhat = Mat::zeros(z.rows, z.cols);
    let mut inv_std = Vec::with_capacity(z.rows);
    let mut out = Mat::zeros(z.rows, z.cols);
    for r in 0..z.rows {
        let row = z.row(r);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std.push(inv);
        for c in 0..z.cols {
            let xh = (row[c] - mean) * inv;
            *xhat.at_mut(r, c) = xh;
            *out.at_mut(r, c) = gain.at(0, c) * xh + shift.at(0, c);
        }
    }
    (out, LnTape { xhat, inv_std })
}

/// `dL/dz` from `dL/d(xhat)`: `inv_std * (d - mean(d) - xhat * mean(d * xhat))`
/// per sample row, the population-variance normalization backward rule.
fn layer_norm_backward_rows(dxhat: &Mat, ln: &LnTape) -> Mat {
    let d = dxhat.cols as f64;
    let mut dz = Mat::zeros(dxhat.rows, dxhat.cols);
    for r in 0..dxhat.rows {
        let dh = dxhat.row(r);
        let xh = ln.xhat.row(r);
        let mean_d = dh.iter().sum::<f64>() / d;
        let mean_dx = dh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d;
        for c in 0..dxhat.cols {
            *dz.at_mut(r, c) = ln.inv_std[r] * (dh[c] - mean_d - xh[c] * mean_dx);
        }
    }
    dz
}

/// Runs the network on a `[B, input_dim]` batch, returning the `[B,
/// output_dim]` result and the tape for the reverse pass.
pub fn mlp_forward(params: &ParamTree, cfg: &MlpConfig, x: &Mat) -> Result<(Mat, Tape), NnError> {
    cfg.validate()?;
    if x.cols != cfg.input_dim {
        return Err(NnError::ShapeMismatch {
            context: "mlp_forward input",
            expected: (x.rows, cfg.input_dim),
            got: (x.rows, x.cols),
        });
    }
    let n_layers = cfg.n_layers();
    let mut layers = Vec::with_capacity(n_layers);
    let mut cur = x.clone();
    for i in 0..n_layers {
        let w = params.expect(&format!("l{i}.w"))?;
        let b = params.expect(&format!("l{i}.b"))?;
        let mut z = cur.matmul(w)?;
        z.add_row_broadcast(b)?;
        if i + 1 == n_layers {
            layers.push(LayerTape { x: cur, ln: None, act_in: None });
            cur = z;
        } else {
            let (h, ln) = if cfg.layer_norm {
                let g = params.expect(&format!("l{i}.ln_g"))?;
                let s = params.expect(&format!("l{i}.ln_b"))?;
                let (h, tape) = layer_norm_forward(&z, g, s, cfg.ln_eps);
                (h, Some(tape))
            } else {
                (z, None)
            };
            let a = h.map(|v| v.max(0.0));
            layers.push(LayerTape { x: cur, ln, act_in: Some(h) });
            cur = a;
        }
    }
    Ok((cur, Tape { stamp: params.stamp(), layers, batch: x.rows }))
}

/// Reverse pass: gradients for every parameter leaf plus `dL/dx` for the
/// batch. `dy` is `dL/d(output)`, `[B, output_dim]`. Fails if the parameters
/// have been touched since the tape was recorded.
pub fn mlp_backward(
    params: &ParamTree,
    cfg: &MlpConfig,
    tape: &Tape,
    dy: &Mat,
) -> Result<(ParamTree, Mat), NnError> {
    let stamp = params.stamp();
    if stamp != tape.stamp {
        return Err(NnError::StaleTape { recorded: tape.stamp, current: stamp });
    }
    if dy.rows != tape.batch || dy.cols != cfg.output_dim {
        return Err(NnError::ShapeMismatch {
            context: "mlp_backward dy",
            expected: (tape.batch, cfg.output_dim),
            got: (dy.rows, dy.cols),
        });
    }
    let mut grads = ParamTree::new();
    let mut upstream = dy.clone();
    for i in (0..cfg.n_layers()).rev() {
        let layer = &tape.layers[i];
        // Through the activation (hidden layers only).
        let dz = if let Some(h) = &layer.act_in {
            let masked = upstream.zip_map(h, |g, hv| if hv > 0.0 { g } else { 0.0 })?;
            if let Some(ln) = &layer.ln {
                let gain = params.expect(&format!("l{i}.ln_g"))?;
                let mut dgain = Mat::zeros(1, masked.cols);
                let mut dshift = Mat::zeros(1, masked.cols);
                for r in 0..masked.rows {
                    for c in 0..masked.cols {
                        *dgain.at_mut(0, c) += masked.at(r, c) * ln.xhat.at(r, c);
                        *dshift.at_mut(0, c) += masked.at(r, c);
                    }
                }
                let dxhat = Mat::from_vec(
                    masked.rows,
                    masked.cols,
                    (0..masked.rows)
                        .flat_map(|r| {
                            let row = masked.row(r);
                            (0..masked.cols).map(move |c| row[c] * gain.at(0, c))
                        })
                        .collect(),
                )?;
                grads.insert(format!("l{i}.ln_g"), dgain);
                grads.insert(format!("l{i}.ln_b"), dshift);
                layer_norm_backward_rows(&dxhat, ln)
            } else {
                masked
            }
        } else {
            upstream.clone()
        };
        let w = params.expect(&format!("l{i}.w"))?;
        grads.insert(format!("l{i}.w"), layer.x.matmul_tn(&dz)?);
        grads.insert(format!("l{i}.b"), dz.col_sums());
        upstream = dz.matmul_nt(w)?;
    }
    Ok((grads, upstream))
}
