//! Finite-difference gradient checking.

use crate::nn::params::ParamStore;

/// Compares the analytic gradient of `loss_and_grad` against central
/// differences at `params`, coordinate by coordinate. Returns the worst
/// relative error `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// `loss_and_grad` must be pure; the numeric side only uses its loss value.
pub fn grad_check<F>(loss_and_grad: F, params: &ParamStore, epsilon: f64) -> f64
where
    F: Fn(&ParamStore) -> (f64, ParamStore),
{
    let (_, analytic) = loss_and_grad(params);
    let mut worst = 0.0f64;
    let mut probe = params.clone();

    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let len = params.get(name).data.len();
        for i in 0..len {
            let original = params.get(name).data[i];
            probe.get_mut(name).data[i] = original + epsilon;
            let (up, _) = loss_and_grad(&probe);
            probe.get_mut(name).data[i] = original - epsilon;
            let (down, _) = loss_and_grad(&probe);
            probe.get_mut(name).data[i] = original;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic.get(name).data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}
