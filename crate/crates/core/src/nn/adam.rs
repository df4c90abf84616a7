//! Adam with bias correction; the only optimizer used by the training loops.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step: u64,
    first_moment: ParamStore,
    second_moment: ParamStore,
}

impl AdamState {
    /// Moment buffers shaped like `params`, zeroed, step counter at 0.
    pub fn new(params: &ParamStore, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            step: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
        }
    }
}

/// One Adam update in place. Deterministic: same (params, grads, state)
/// always produces the same result.
pub fn adam_step(params: &mut ParamStore, grads: &ParamStore, state: &mut AdamState) -> Result<()> {
    params.check_shapes_match(grads)?;
    params.check_shapes_match(&state.first_moment)?;
    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    let bias1 = 1.0 - h.beta1.powi(t);
    let bias2 = 1.0 - h.beta2.powi(t);

    for (((_, p), (_, g)), ((_, m), (_, v))) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for i in 0..p.data.len() {
            let grad = g.data[i];
            m.data[i] = h.beta1 * m.data[i] + (1.0 - h.beta1) * grad;
            v.data[i] = h.beta2 * v.data[i] + (1.0 - h.beta2) * grad * grad;
            let m_hat = m.data[i] / bias1;
            let v_hat = v.data[i] / bias2;
            p.data[i] -= h.lr * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }
    Ok(())
}
