//! Probabilistic feed-forward forecaster.
//!
//! An MLP maps a normalized context window to per-step Gaussian parameters
//! (mu, sigma) for the whole horizon in one pass, trained by minimizing the
//! Gaussian negative log-likelihood. The distributional output supports
//! closed-form quantiles and Monte-Carlo sample paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, init_mlp_params, mlp_backward, mlp_forward, AdamHyper, AdamState, MlpConfig,
    ParamStore, GRAD_CLIP_NORM,
};
use crate::normal;
use crate::rng::{derive_seed, SplitMix64};
use crate::timeseries::{normalize, ForecastWindow};

/// Additive floor on the normalized sigma head, keeping the likelihood away
/// from the sigma -> 0 singularity.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Stream label for the epoch-shuffle RNG, kept distinct from init streams.
const SHUFFLE_STREAM: u64 = 0x53_48_55_46;

/// Per-step Gaussian forecast in denormalized traffic units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianForecast {
    pub beam_id: String,
    /// Epoch-hour of the first forecast step.
    pub origin_time: i64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianForecast {
    pub fn horizon(&self) -> usize {
        self.mu.len()
    }
}

/// Monte-Carlo paths drawn from a [`GaussianForecast`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePaths {
    /// `n x H`: one row per path.
    pub paths: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SamplePaths {
    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffConfig {
    pub context_len: usize,
    pub horizon: usize,
    pub hidden_dims: Vec<usize>,
    /// Normalization policy tag recorded in checkpoints.
    pub normalization: String,
}

impl SffConfig {
    fn mlp(&self) -> MlpConfig {
        MlpConfig::new(self.context_len, self.hidden_dims.clone(), 2 * self.horizon)
    }
}

/// Training hyperparameters. The seed is mandatory: no implicit entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
}

impl SffHyper {
    /// Defaults tuned on the synthetic benchmark: long NLL training
    /// memorizes horizon noise and collapses sigma (held-out 90% coverage
    /// drops below 0.5 by epoch 300), so the default stops while the
    /// intervals are still honest.
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 16,
            batch_size: 32,
            lr: 1e-3,
            seed,
            hidden_dims: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffModel {
    pub config: SffConfig,
    pub params: ParamStore,
    pub seed: u64,
    /// Mean NLL per epoch.
    pub training_log: Vec<f64>,
}

/// Negative log-likelihood of `y` under Normal(mu, sigma):
/// `0.5 ln(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2)`.
pub fn gaussian_nll(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let z = (y - mu) / sigma;
    Ok(0.5 * (std::f64::consts::TAU * sigma * sigma).ln() + 0.5 * z * z)
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
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

/// Mean NLL and its parameter gradient over one batch of windows. Shared by
/// the training loop and the gradient-check harness.
pub fn batch_loss_grad(
    params: &ParamStore,
    config: &SffConfig,
    windows: &[&ForecastWindow],
) -> Result<(f64, ParamStore)> {
    let mlp = config.mlp();
    let horizon = config.horizon;
    let mut total_loss = 0.0;
    let mut grads = params.zeros_like();

    for window in windows {
        if window.context.len() != config.context_len {
            return Err(Error::ShapeMismatch(format!(
                "window context {} != model context {}",
                window.context.len(),
                config.context_len
            )));
        }
        if window.horizon_truth.len() != horizon {
            return Err(Error::ShapeMismatch(format!(
                "window horizon {} != model horizon {}",
                window.horizon_truth.len(),
                horizon
            )));
        }
        let (ctx_norm, stats) = normalize(&window.context);
        let (out, cache) = mlp_forward(params, &mlp, &ctx_norm)?;

        let mut grad_out = vec![0.0; 2 * horizon];
        let inv_h = 1.0 / horizon as f64;
        for t in 0..horizon {
            let y = (window.horizon_truth[t] - stats.mean) / stats.std;
            let mu = out[t];
            let raw = out[horizon + t];
            let sigma = softplus(raw) + SIGMA_FLOOR;
            total_loss += gaussian_nll(mu, sigma, y)? * inv_h;
            let diff = mu - y;
            grad_out[t] = diff / (sigma * sigma) * inv_h;
            grad_out[horizon + t] =
                (1.0 / sigma - diff * diff / (sigma * sigma * sigma)) * sigmoid(raw) * inv_h;
        }
        grads.add_assign(&mlp_backward(params, &mlp, &cache, &grad_out)?);
    }

    let scale = 1.0 / windows.len() as f64;
    grads.scale(scale);
    Ok((total_loss * scale, grads))
}

/// Trains an SFF model on the window set. Deterministic in `hyper.seed`.
pub fn train_sff(windows: &[ForecastWindow], hyper: &SffHyper, horizon: usize) -> Result<SffModel> {
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let context_len = windows[0].context.len();
    let config = SffConfig {
        context_len,
        horizon,
        hidden_dims: hyper.hidden_dims.clone(),
        normalization: "per-window".into(),
    };
    let mut params = init_mlp_params(&config.mlp(), hyper.seed)?;
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

    Ok(SffModel {
        config,
        params,
        seed: hyper.seed,
        training_log,
    })
}

impl SffModel {
    /// Distributional forecast for one context window. Pure function.
    pub fn predict(
        &self,
        beam_id: &str,
        origin_time: i64,
        context: &[f64],
    ) -> Result<GaussianForecast> {
        if context.len() != self.config.context_len {
            return Err(Error::ShapeMismatch(format!(
                "context has {} samples, model wants {}",
                context.len(),
                self.config.context_len
            )));
        }
        let (ctx_norm, stats) = normalize(context);
        let (out, _) = mlp_forward(&self.params, &self.config.mlp(), &ctx_norm)?;
        let horizon = self.config.horizon;
        let mut mu = Vec::with_capacity(horizon);
        let mut sigma = Vec::with_capacity(horizon);
        for t in 0..horizon {
            mu.push(out[t] * stats.std + stats.mean);
            sigma.push((softplus(out[horizon + t]) + SIGMA_FLOOR) * stats.std);
        }
        Ok(GaussianForecast {
            beam_id: beam_id.to_string(),
            origin_time,
            mu,
            sigma,
        })
    }
}

/// Per-step quantile `mu + z(p) sigma` via the inverse normal CDF.
pub fn quantile_closed_form(forecast: &GaussianForecast, p: f64) -> Result<Vec<f64>> {
    let z = normal::inv_cdf(p)?;
    Ok(forecast
        .mu
        .iter()
        .zip(&forecast.sigma)
        .map(|(m, s)| m + z * s)
        .collect())
}

/// Draws `n` independent paths, step `t` from Normal(mu_t, sigma_t),
/// Box-Muller from a seeded 64-bit PRNG. Deterministic in `seed`.
pub fn sample_paths(forecast: &GaussianForecast, n: usize, seed: u64) -> SamplePaths {
    assert!(n >= 1, "need at least one sample path");
    let mut rng = SplitMix64::new(seed);
    let paths = (0..n)
        .map(|_| {
            forecast
                .mu
                .iter()
                .zip(&forecast.sigma)
                .map(|(m, s)| m + s * rng.normal())
                .collect()
        })
        .collect();
    SamplePaths { paths, seed }
}
