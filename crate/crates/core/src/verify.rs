//! Model-level gradient verification: randomized toy instances of both
//! training losses checked against central finite differences.

use crate::lstm::LstmForecasterConfig;
use crate::nn::{grad_check, init_lstm_params, init_mlp_params};
use crate::rng::{derive_seed, SplitMix64};
use crate::sff::SffConfig;
use crate::timeseries::ForecastWindow;
use crate::{lstm, sff};

/// Threshold every check must stay under.
pub const MAX_REL_ERROR: f64 = 1e-4;

/// Step used for central differences.
pub const EPSILON: f64 = 1e-5;

fn random_windows(rng: &mut SplitMix64, count: usize, c: usize, h: usize) -> Vec<ForecastWindow> {
    (0..count)
        .map(|i| ForecastWindow {
            beam_id: format!("b{i}"),
            context: (0..c).map(|_| rng.uniform(20.0, 180.0)).collect(),
            horizon_truth: (0..h).map(|_| rng.uniform(20.0, 180.0)).collect(),
        })
        .collect()
}

/// Runs both checks on randomized instances; returns `(name, max rel err)`
/// per model. Deterministic in `seed`.
pub fn run_gradcheck_suite(seed: u64) -> Vec<(String, f64)> {
    let mut results = Vec::new();

    {
        let mut rng = SplitMix64::new(derive_seed(seed, 1));
        let windows = random_windows(&mut rng, 3, 16, 4);
        let refs: Vec<&ForecastWindow> = windows.iter().collect();
        let config = SffConfig {
            context_len: 16,
            horizon: 4,
            hidden_dims: vec![8, 6],
            normalization: "per-window".into(),
        };
        let params = init_mlp_params(
            &crate::nn::MlpConfig::new(16, vec![8, 6], 8),
            derive_seed(seed, 2),
        )
        .expect("valid config");
        let err = grad_check(
            |p| sff::batch_loss_grad(p, &config, &refs).expect("toy batch"),
            &params,
            EPSILON,
        );
        results.push(("mlp_gaussian_nll".to_string(), err));
    }

    {
        let mut rng = SplitMix64::new(derive_seed(seed, 3));
        let windows = random_windows(&mut rng, 2, 10, 3);
        let refs: Vec<&ForecastWindow> = windows.iter().collect();
        let config = LstmForecasterConfig {
            context_len: 10,
            horizon: 3,
            hidden_dim: 5,
            normalization: "per-window".into(),
        };
        let params = init_lstm_params(
            &crate::nn::LstmConfig::new(1, 5, 3),
            derive_seed(seed, 4),
        )
        .expect("valid config");
        let err = grad_check(
            |p| lstm::batch_loss_grad(p, &config, &refs).expect("toy batch"),
            &params,
            EPSILON,
        );
        results.push(("lstm_mse".to_string(), err));
    }

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_threshold() {
        for (name, err) in run_gradcheck_suite(42) {
            assert!(err <= MAX_REL_ERROR, "{name}: {err:e}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(run_gradcheck_suite(7), run_gradcheck_suite(7));
    }
}
