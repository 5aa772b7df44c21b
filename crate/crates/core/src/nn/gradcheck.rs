//! Finite-difference verification of the backward passes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::softmax_cross_entropy;
use super::{ModelSpec, Network, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES_PER_PARAMETER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterCheck {
    pub name: String,
    pub checked: usize,
    /// Elements whose ±ε perturbation flipped a ReLU or pooling decision.
    pub skipped: usize,
    pub max_rel_error: f64,
    /// `‖a − n‖ / max(‖a‖, ‖n‖)` over the checked elements.
    pub tensor_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    /// Largest elementwise relative error.
    pub max_rel_error: f64,
    /// Largest per-tensor norm-wise relative error.
    pub max_tensor_rel_error: f64,
    pub parameters: Vec<ParameterCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.parameters.iter().map(|p| p.checked).sum()
    }
}

fn loss_of(net: &Network, x: &Tensor, class: usize) -> Result<(f64, Vec<usize>)> {
    let trace = net.forward(x, None)?;
    let (loss, _) = softmax_cross_entropy(&trace.logits, class)?;
    Ok((loss, trace.activation_pattern(&net.layers)))
}

/// Compares analytic gradients against `(f(θ+ε) − f(θ−ε)) / 2ε` with dropout
/// off, for [`DEFAULT_SAMPLES_PER_PARAMETER`] elements of each parameter
/// tensor (all of them if the tensor is smaller).
pub fn grad_check(net: &Network, x: &Tensor, class: usize, epsilon: f64) -> Result<GradCheckReport> {
    grad_check_with(net, x, class, epsilon, DEFAULT_SAMPLES_PER_PARAMETER, 0)
}

/// As [`grad_check`] with an explicit sample count and sampling seed.
///
/// Elements whose perturbation changes the activation pattern sit on a
/// ReLU kink or pooling tie, where the central difference is meaningless;
/// they are skipped and replaced by further samples.
pub fn grad_check_with(
    net: &Network,
    x: &Tensor,
    class: usize,
    epsilon: f64,
    samples_per_parameter: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let trace = net.forward(x, None)?;
    let (_, grad_logits) = softmax_cross_entropy(&trace.logits, class)?;
    let mut analytic = net.zero_grads();
    net.backward(&trace, &grad_logits, &mut analytic)?;
    let base_pattern = trace.activation_pattern(&net.layers);

    let names = net.parameter_names();
    let mut probe = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport { epsilon, max_rel_error: 0.0, max_tensor_rel_error: 0.0, parameters: Vec::new() };

    for (p, name) in names.iter().enumerate() {
        let len = analytic[p].len();
        let mut candidates: Vec<usize> = (0..len).collect();
        candidates.shuffle(&mut rng);
        let mut check =
            ParameterCheck { name: name.clone(), checked: 0, skipped: 0, max_rel_error: 0.0, tensor_rel_error: 0.0 };
        let (mut diff_sq, mut a_sq, mut n_sq) = (0.0, 0.0, 0.0);
        for idx in candidates {
            if check.checked >= samples_per_parameter {
                break;
            }
            let original = probe.parameters()[p].1.data()[idx];
            probe.parameters_mut()[p].data_mut()[idx] = original + epsilon;
            let (plus, pattern_plus) = loss_of(&probe, x, class)?;
            probe.parameters_mut()[p].data_mut()[idx] = original - epsilon;
            let (minus, pattern_minus) = loss_of(&probe, x, class)?;
            probe.parameters_mut()[p].data_mut()[idx] = original;
            if pattern_plus != base_pattern || pattern_minus != base_pattern {
                check.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[p].data()[idx];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::invalid(format!("non-finite gradient for {name}[{idx}]")));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            check.max_rel_error = check.max_rel_error.max(rel);
            check.checked += 1;
            diff_sq += (a - numeric).powi(2);
            a_sq += a * a;
            n_sq += numeric * numeric;
        }
        let scale = f64::max(a_sq, n_sq).sqrt();
        check.tensor_rel_error = if scale > 0.0 { diff_sq.sqrt() / scale } else { 0.0 };
        report.max_rel_error = report.max_rel_error.max(check.max_rel_error);
        report.max_tensor_rel_error = report.max_tensor_rel_error.max(check.tensor_rel_error);
        report.parameters.push(check);
    }
    Ok(report)
}

/// Built-in networks for the command-line check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyCase {
    /// The full conv+dense architecture on a 10×10×2 input.
    FullCnn,
    /// Dense layers without activations (a smooth network).
    DenseOnly,
}

/// Builds a toy network plus a random input and target class.
pub fn toy_case(case: ToyCase, seed: u64) -> Result<(Network, Tensor, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (spec, shape, amplitude) = match case {
        ToyCase::FullCnn => (ModelSpec::Cnn { in_bands: 2, height: 10, width: 10, n_classes: 3 }, vec![2, 10, 10], 1.0),
        ToyCase::DenseOnly => (ModelSpec::Linear { input_dim: 12, hidden: vec![16, 16], n_classes: 3 }, vec![12], 0.5),
    };
    let net = Network::build(spec, seed)?;
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    let x = Tensor::new(shape, data)?;
    Ok((net, x, 1))
}
