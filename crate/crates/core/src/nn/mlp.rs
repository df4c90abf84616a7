//! Fully-connected network with ReLU hidden layers and a linear output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig("all MLP dims must be >= 1".into()));
        }
        Ok(())
    }

    /// Layer widths including input and output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn n_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

/// Per-pass state needed by the backward sweep.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// activations[0] is the input; activations[l] the output of layer l-1
    /// after its nonlinearity (linear for the final layer).
    activations: Vec<Vec<f64>>,
    /// Pre-activation values z_l = W_l a_{l-1} + b_l per layer.
    preacts: Vec<Vec<f64>>,
}

pub fn mlp_forward(
    params: &ParamStore,
    config: &MlpConfig,
    x: &[f64],
) -> Result<(Vec<f64>, MlpCache)> {
    if x.len() != config.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "mlp input has {} entries, expected {}",
            x.len(),
            config.input_dim
        )));
    }
    let n_layers = config.n_layers();
    let mut activations = Vec::with_capacity(n_layers + 1);
    let mut preacts = Vec::with_capacity(n_layers);
    activations.push(x.to_vec());

    for layer in 0..n_layers {
        let w = params.get(&format!("w{layer}"));
        let b = params.get(&format!("b{layer}"));
        let mut z = vec![0.0; w.rows];
        w.matvec(activations.last().unwrap(), &mut z);
        for (zi, bi) in z.iter_mut().zip(&b.data) {
            *zi += bi;
        }
        let a = if layer + 1 < n_layers {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        preacts.push(z);
        activations.push(a);
    }
    let y = activations.last().unwrap().clone();
    Ok((y, MlpCache { activations, preacts }))
}

/// Gradients of `<grad_y, y>` with respect to every parameter.
pub fn mlp_backward(
    params: &ParamStore,
    config: &MlpConfig,
    cache: &MlpCache,
    grad_y: &[f64],
) -> Result<ParamStore> {
    if grad_y.len() != config.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "grad_y has {} entries, expected {}",
            grad_y.len(),
            config.output_dim
        )));
    }
    let n_layers = config.n_layers();
    let mut grads = params.zeros_like();
    let mut delta = grad_y.to_vec();

    for layer in (0..n_layers).rev() {
        // Output layer is linear; hidden layers gate delta through ReLU'.
        if layer + 1 < n_layers {
            for (d, z) in delta.iter_mut().zip(&cache.preacts[layer]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let input = &cache.activations[layer];
        grads
            .get_mut(&format!("w{layer}"))
            .add_outer(&delta, input);
        for (g, d) in grads
            .get_mut(&format!("b{layer}"))
            .data
            .iter_mut()
            .zip(&delta)
        {
            *g += d;
        }
        if layer > 0 {
            let w = params.get(&format!("w{layer}"));
            let mut next = vec![0.0; w.cols];
            w.matvec_t_add(&delta, &mut next);
            delta = next;
        }
    }
    Ok(grads)
}

/// Glorot-uniform weights, zero biases, named `w0/b0, w1/b1, ...`.
pub fn init_mlp_params(config: &MlpConfig, seed: u64) -> Result<ParamStore> {
    config.validate()?;
    let mut rng = crate::rng::SplitMix64::new(seed);
    let dims = config.dims();
    let mut params = ParamStore::new();
    for layer in 0..config.n_layers() {
        let (fan_in, fan_out) = (dims[layer], dims[layer + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        params.insert(
            format!("w{layer}"),
            Tensor::from_vec(fan_out, fan_in, data)?,
        );
        params.insert(format!("b{layer}"), Tensor::zeros(fan_out, 1));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> MlpConfig {
        MlpConfig::new(2, vec![3], 2)
    }

    #[test]
    fn zero_params_give_zero_output() {
        let config = tiny_config();
        let params = init_mlp_params(&config, 1).unwrap().zeros_like();
        let (y, _) = mlp_forward(&params, &config, &[1.5, -2.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_weights_pass_output_bias_through() {
        let config = tiny_config();
        let mut params = init_mlp_params(&config, 1).unwrap().zeros_like();
        params.get_mut("b1").data.copy_from_slice(&[0.5, -0.25]);
        let (y, _) = mlp_forward(&params, &config, &[3.0, 4.0]).unwrap();
        assert_eq!(y, vec![0.5, -0.25]);
    }

    #[test]
    fn relu_kills_negative_preactivation() {
        // 1-1-1 net, unit weights, zero biases, x = -3: hidden ReLU clamps.
        let config = MlpConfig::new(1, vec![1], 1);
        let mut params = init_mlp_params(&config, 1).unwrap().zeros_like();
        params.get_mut("w0").data[0] = 1.0;
        params.get_mut("w1").data[0] = 1.0;
        let (y, _) = mlp_forward(&params, &config, &[-3.0]).unwrap();
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn init_is_deterministic_with_bounded_weights() {
        let config = MlpConfig::new(5, vec![7, 3], 4);
        let a = init_mlp_params(&config, 42).unwrap();
        let b = init_mlp_params(&config, 42).unwrap();
        assert_eq!(a, b);
        let dims = config.dims();
        for layer in 0..config.n_layers() {
            let bound = (6.0 / (dims[layer] + dims[layer + 1]) as f64).sqrt();
            let w = a.get(&format!("w{layer}"));
            assert!(w.data.iter().all(|v| v.abs() <= bound));
            assert!(a.get(&format!("b{layer}")).data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backward_zero_grad_gives_zero() {
        let config = tiny_config();
        let params = init_mlp_params(&config, 3).unwrap();
        let (_, cache) = mlp_forward(&params, &config, &[0.3, -0.7]).unwrap();
        let grads = mlp_backward(&params, &config, &cache, &[0.0, 0.0]).unwrap();
        assert!(grads.iter().all(|(_, t)| t.data.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_linear_layer_closed_form() {
        // y = Wx + b; d/db = grad_y, d/dW = grad_y x^T.
        let config = MlpConfig::new(2, vec![], 2);
        let params = init_mlp_params(&config, 11).unwrap();
        let x = [0.4, -1.2];
        let (_, cache) = mlp_forward(&params, &config, &x).unwrap();
        let grad_y = [2.0, -0.5];
        let grads = mlp_backward(&params, &config, &cache, &grad_y).unwrap();
        assert_eq!(grads.get("b0").data, vec![2.0, -0.5]);
        let gw = grads.get("w0");
        for (r, gy) in grad_y.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                assert!((gw.at(r, c) - gy * xc).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn input_shape_checked() {
        let config = tiny_config();
        let params = init_mlp_params(&config, 1).unwrap();
        assert!(matches!(
            mlp_forward(&params, &config, &[1.0]).unwrap_err(),
            Error::ShapeMismatch(_)
        ));
    }
}
