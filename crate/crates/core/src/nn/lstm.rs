//! Single-layer LSTM with an affine head on the final hidden state, plus
//! full backpropagation through time.
//!
//! Gate layout inside the stacked tensors is `[input, forget, cell, output]`
//! in blocks of `hidden_dim`:
//!
//! ```text
//! gates = sigmoid/tanh(W_x x_t + W_h h_{t-1} + b)
//! c_t   = f . c_{t-1} + i . g
//! h_t   = o . tanh(c_t)
//! out   = W_out h_T + b_out
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl LstmConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig("all LSTM dims must be >= 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Everything the backward sweep needs, recorded per step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Vec<Vec<f64>>,
    /// Post-activation gates, stacked [i, f, g, o], 4H per step.
    gates: Vec<Vec<f64>>,
    /// Cell states c_1..c_T.
    cells: Vec<Vec<f64>>,
    /// tanh(c_t) per step.
    tanh_cells: Vec<Vec<f64>>,
    /// Hidden states h_1..h_T (h_0 = 0 is implicit).
    hiddens: Vec<Vec<f64>>,
}

/// Runs the recurrence over the whole sequence. Returns all hidden states,
/// the affine head applied to the final one, and the backward cache.
pub fn lstm_forward(
    params: &ParamStore,
    config: &LstmConfig,
    sequence: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, LstmCache)> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    let h_dim = config.hidden_dim;
    let w_x = params.get("w_x");
    let w_h = params.get("w_h");
    let b = params.get("b");
    let w_out = params.get("w_out");
    let b_out = params.get("b_out");

    let mut cache = LstmCache {
        inputs: Vec::with_capacity(sequence.len()),
        gates: Vec::with_capacity(sequence.len()),
        cells: Vec::with_capacity(sequence.len()),
        tanh_cells: Vec::with_capacity(sequence.len()),
        hiddens: Vec::with_capacity(sequence.len()),
    };

    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut pre = vec![0.0; 4 * h_dim];
    let mut pre_h = vec![0.0; 4 * h_dim];

    for x in sequence {
        if x.len() != config.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "lstm step has {} entries, expected {}",
                x.len(),
                config.input_dim
            )));
        }
        w_x.matvec(x, &mut pre);
        w_h.matvec(&h, &mut pre_h);
        for ((p, ph), bi) in pre.iter_mut().zip(&pre_h).zip(&b.data) {
            *p += ph + bi;
        }

        let mut gates = vec![0.0; 4 * h_dim];
        for j in 0..h_dim {
            gates[j] = sigmoid(pre[j]); // input
            gates[h_dim + j] = sigmoid(pre[h_dim + j]); // forget
            gates[2 * h_dim + j] = pre[2 * h_dim + j].tanh(); // candidate
            gates[3 * h_dim + j] = sigmoid(pre[3 * h_dim + j]); // output
        }

        let mut tanh_c = vec![0.0; h_dim];
        for j in 0..h_dim {
            c[j] = gates[h_dim + j] * c[j] + gates[j] * gates[2 * h_dim + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[3 * h_dim + j] * tanh_c[j];
        }

        cache.inputs.push(x.clone());
        cache.gates.push(gates);
        cache.cells.push(c.clone());
        cache.tanh_cells.push(tanh_c);
        cache.hiddens.push(h.clone());
    }

    let mut output = vec![0.0; config.output_dim];
    w_out.matvec(&h, &mut output);
    for (o, bi) in output.iter_mut().zip(&b_out.data) {
        *o += bi;
    }
    Ok((cache.hiddens.clone(), output, cache))
}

/// Gradients of `<grad_out, output>` back through every step.
pub fn lstm_backward(
    params: &ParamStore,
    config: &LstmConfig,
    cache: &LstmCache,
    grad_out: &[f64],
) -> Result<ParamStore> {
    if grad_out.len() != config.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "grad_out has {} entries, expected {}",
            grad_out.len(),
            config.output_dim
        )));
    }
    let h_dim = config.hidden_dim;
    let steps = cache.inputs.len();
    let w_h = params.get("w_h");
    let w_out = params.get("w_out");
    let mut grads = params.zeros_like();

    let h_last = &cache.hiddens[steps - 1];
    grads.get_mut("w_out").add_outer(grad_out, h_last);
    for (g, d) in grads.get_mut("b_out").data.iter_mut().zip(grad_out) {
        *g += d;
    }

    let mut dh = vec![0.0; h_dim];
    w_out.matvec_t_add(grad_out, &mut dh);
    let mut dc = vec![0.0; h_dim];
    let zeros = vec![0.0; h_dim];

    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let tanh_c = &cache.tanh_cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hiddens[t - 1] } else { &zeros };

        let mut dgates = vec![0.0; 4 * h_dim];
        for j in 0..h_dim {
            let (i, f, g, o) = (
                gates[j],
                gates[h_dim + j],
                gates[2 * h_dim + j],
                gates[3 * h_dim + j],
            );
            let d_out_gate = dh[j] * tanh_c[j];
            let dc_total = dc[j] + dh[j] * o * (1.0 - tanh_c[j] * tanh_c[j]);
            let di = dc_total * g;
            let df = dc_total * c_prev[j];
            let dg = dc_total * i;
            dgates[j] = di * i * (1.0 - i);
            dgates[h_dim + j] = df * f * (1.0 - f);
            dgates[2 * h_dim + j] = dg * (1.0 - g * g);
            dgates[3 * h_dim + j] = d_out_gate * o * (1.0 - o);
            dc[j] = dc_total * f;
        }

        grads.get_mut("w_x").add_outer(&dgates, &cache.inputs[t]);
        grads.get_mut("w_h").add_outer(&dgates, h_prev);
        for (g, d) in grads.get_mut("b").data.iter_mut().zip(&dgates) {
            *g += d;
        }

        dh.iter_mut().for_each(|v| *v = 0.0);
        w_h.matvec_t_add(&dgates, &mut dh);
    }
    Ok(grads)
}

/// Glorot-uniform weights, zero biases except the forget-gate block of `b`,
/// which starts at 1.0.
pub fn init_lstm_params(config: &LstmConfig, seed: u64) -> Result<ParamStore> {
    config.validate()?;
    let mut rng = crate::rng::SplitMix64::new(seed);
    let h_dim = config.hidden_dim;
    let mut params = ParamStore::new();

    let glorot = |rows: usize, cols: usize, rng: &mut crate::rng::SplitMix64| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect(),
        )
        .expect("sized above")
    };

    params.insert("w_x", glorot(4 * h_dim, config.input_dim, &mut rng));
    params.insert("w_h", glorot(4 * h_dim, h_dim, &mut rng));
    let mut b = Tensor::zeros(4 * h_dim, 1);
    for j in h_dim..2 * h_dim {
        b.data[j] = 1.0;
    }
    params.insert("b", b);
    params.insert("w_out", glorot(config.output_dim, h_dim, &mut rng));
    params.insert("b_out", Tensor::zeros(config.output_dim, 1));
    Ok(params)
}
