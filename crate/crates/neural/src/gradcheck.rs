//! Finite-difference validation of the analytic gradients.

use crate::net::LstmNet;
use crate::train::{batch_gradient, Sample};

/// Central-difference step used throughout.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub num_params: usize,
}

/// Mean analytic gradient over the batch (backpropagation through time).
pub fn analytic_gradient(net: &LstmNet, data: &[Sample]) -> (f64, Vec<f64>) {
    let refs: Vec<&Sample> = data.iter().collect();
    batch_gradient(net, &refs)
}

/// Mean numeric gradient by central differences on the batch loss.
pub fn numeric_gradient(net: &LstmNet, data: &[Sample], step: f64) -> Vec<f64> {
    let mut probe = net.clone();
    let batch_loss = |n: &LstmNet| -> f64 {
        data.iter()
            .map(|(seq, target)| n.loss(seq, target).expect("valid batch"))
            .sum::<f64>()
            / data.len() as f64
    };
    let mut grads = vec![0.0; net.num_params()];
    for i in 0..net.num_params() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + step;
        let hi = batch_loss(&probe);
        probe.params_mut()[i] = original - step;
        let lo = batch_loss(&probe);
        probe.params_mut()[i] = original;
        grads[i] = (hi - lo) / (2.0 * step);
    }
    grads
}

/// Compares analytic to numeric gradients over every parameter. The relative
/// error divides by max(1e-3, |analytic|, |numeric|): the floor keeps
/// finite-difference noise on near-zero gradients from dominating while any
/// genuinely wrong gradient still reports errors orders of magnitude above
/// the 1e-4 acceptance bar.
pub fn gradient_check(net: &LstmNet, data: &[Sample]) -> GradCheckReport {
    let (_, analytic) = analytic_gradient(net, data);
    let numeric = numeric_gradient(net, data, FD_STEP);
    let mut max_rel_error = 0.0;
    let mut worst_param = 0;
    for (i, (&ga, &gn)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-3);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_param = i;
        }
    }
    GradCheckReport {
        max_rel_error,
        worst_param,
        num_params: net.num_params(),
    }
}
