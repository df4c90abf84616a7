//! Deterministic LSTM baseline.
//!
//! The context window is fed step by step as normalized scalars; the final
//! hidden state drives an affine head that emits the whole horizon at once.
//! Trained with mean-squared error. Deliberately no distributional output:
//! the API has no quantiles or intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, init_lstm_params, lstm_backward, lstm_forward, AdamHyper, AdamState, LstmConfig,
    ParamStore, GRAD_CLIP_NORM,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::timeseries::{normalize, ForecastWindow};

const SHUFFLE_STREAM: u64 = 0x4C_53_54_4D;

/// Point forecast in denormalized traffic units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub beam_id: String,
    /// Epoch-hour of the first forecast step.
    pub origin_time: i64,
    pub values: Vec<f64>,
}

impl PointForecast {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmForecasterConfig {
    pub context_len: usize,
    pub horizon: usize,
    pub hidden_dim: usize,
    /// Normalization policy tag recorded in checkpoints.
    pub normalization: String,
}

impl LstmForecasterConfig {
    fn cell(&self) -> LstmConfig {
        LstmConfig::new(1, self.hidden_dim, self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden_dim: usize,
}

impl LstmHyper {
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 8,
            batch_size: 32,
            lr: 1e-3,
            seed,
            hidden_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub config: LstmForecasterConfig,
    pub params: ParamStore,
    pub seed: u64,
    /// Mean MSE per epoch (normalized units).
    pub training_log: Vec<f64>,
}

/// Mean of squared differences.
pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "mse over {} vs {} entries",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64)
}

fn context_as_steps(context_norm: &[f64]) -> Vec<Vec<f64>> {
    context_norm.iter().map(|v| vec![*v]).collect()
}

/// Mean MSE and parameter gradient over one batch. Shared by the training
/// loop and the gradient-check harness.
pub fn batch_loss_grad(
    params: &ParamStore,
    config: &LstmForecasterConfig,
    windows: &[&ForecastWindow],
) -> Result<(f64, ParamStore)> {
    let cell = config.cell();
    let horizon = config.horizon;
    let mut total_loss = 0.0;
    let mut grads = params.zeros_like();

    for window in windows {
        if window.context.len() != config.context_len || window.horizon_truth.len() != horizon {
            return Err(Error::ShapeMismatch(format!(
                "window ({}, {}) vs model ({}, {})",
                window.context.len(),
                window.horizon_truth.len(),
                config.context_len,
                horizon
            )));
        }
        let (ctx_norm, stats) = normalize(&window.context);
        let steps = context_as_steps(&ctx_norm);
        let (_, pred, cache) = lstm_forward(params, &cell, &steps)?;

        let mut grad_out = vec![0.0; horizon];
        let inv_h = 1.0 / horizon as f64;
        for t in 0..horizon {
            let y = (window.horizon_truth[t] - stats.mean) / stats.std;
            let diff = pred[t] - y;
            total_loss += diff * diff * inv_h;
            grad_out[t] = 2.0 * diff * inv_h;
        }
        grads.add_assign(&lstm_backward(params, &cell, &cache, &grad_out)?);
    }

    let scale = 1.0 / windows.len() as f64;
    grads.scale(scale);
    Ok((total_loss * scale, grads))
}

/// Trains the LSTM baseline. Deterministic in `hyper.seed`.
pub fn train_lstm(
    windows: &[ForecastWindow],
    hyper: &LstmHyper,
    horizon: usize,
) -> Result<LstmModel> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let config = LstmForecasterConfig {
        context_len: windows[0].context.len(),
        horizon,
        hidden_dim: hyper.hidden_dim,
        normalization: "per-window".into(),
    };
    let mut params = init_lstm_params(&config.cell(), hyper.seed)?;
    let mut adam = AdamState::new(&params, AdamHyper::with_lr(hyper.lr));
    let mut shuffle_rng = SplitMix64::new(derive_seed(hyper.seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut training_log = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size.max(1)) {
            let refs: Vec<&ForecastWindow> = batch.iter().map(|i| &windows[*i]).collect();
            let (loss, mut grads) = batch_loss_grad(&params, &config, &refs)?;
            epoch_loss += loss * refs.len() as f64;
            grads.clip_global_norm(GRAD_CLIP_NORM);
            adam_step(&mut params, &grads, &mut adam)?;
        }
        training_log.push(epoch_loss / windows.len() as f64);
    }

    Ok(LstmModel {
        config,
        params,
        seed: hyper.seed,
        training_log,
    })
}

impl LstmModel {
    /// Point forecast for one context window. Pure function.
    pub fn predict(
        &self,
        beam_id: &str,
        origin_time: i64,
        context: &[f64],
    ) -> Result<PointForecast> {
        if context.len() != self.config.context_len {
            return Err(Error::ShapeMismatch(format!(
                "context has {} samples, model wants {}",
                context.len(),
                self.config.context_len
            )));
        }
        let (ctx_norm, stats) = normalize(context);
        let steps = context_as_steps(&ctx_norm);
        let (_, pred, _) = lstm_forward(&self.params, &self.config.cell(), &steps)?;
        Ok(PointForecast {
            beam_id: beam_id.to_string(),
            origin_time,
            values: pred.iter().map(|v| v * stats.std + stats.mean).collect(),
        })
    }
}
