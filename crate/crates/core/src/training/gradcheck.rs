//! Central finite-difference verification of analytic gradients.

use super::backward::{backward, Gradients};
use super::loss::{loss_delta, Target};
use super::TrainError;
use crate::nncore::Model;

/// Largest-disagreement summary of a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, element)` in [`Model::params`] order where the maximum
    /// occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for every
/// parameter, where `L` is the mean loss over `batch`.
///
/// The difference `L(θ+ε) − L(θ−ε)` is taken per example from the two
/// logit vectors (see [`loss_delta`]) rather than by subtracting two
/// rounded loss values, which would bury gradients below ~1e-6 in noise.
pub fn compare_gradients(
    model: &Model,
    batch: &[(&[u8], Target)],
    epsilon: f64,
    analytic: &Gradients,
) -> Result<GradCheckReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut probe = model.clone();
    let params = model.params();
    let grads = analytic.tensors();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        params_checked: 0,
    };
    for (ti, (values, grad)) in params.iter().zip(&grads).enumerate() {
        for (e, (&original, &a)) in values.iter().zip(grad.iter()).enumerate() {
            probe.params_mut()[ti][e] = original + epsilon;
            let up = all_logits(&probe, batch);
            probe.params_mut()[ti][e] = original - epsilon;
            let down = all_logits(&probe, batch);
            probe.params_mut()[ti][e] = original;
            let delta: f64 = batch
                .iter()
                .zip(up.iter().zip(&down))
                .map(|((_, target), (u, d))| loss_delta(u, d, target))
                .sum();
            let numeric = delta / batch.len() as f64 / (2.0 * epsilon);
            let err = relative_error(a, numeric);
            report.params_checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (ti, e);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

fn all_logits(model: &Model, batch: &[(&[u8], Target)]) -> Vec<Vec<f64>> {
    let prepared = model.prepare();
    batch
        .iter()
        .map(|(indices, _)| {
            prepared
                .logits_for_indices(indices)
                .expect("batch sequences are non-empty")
        })
        .collect()
}

/// Runs backprop and checks it against finite differences.
pub fn grad_check(model: &Model, batch: &[(&[u8], Target)], epsilon: f64) -> Result<GradCheckReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let (_, analytic) = backward(model, batch);
    compare_gradients(model, batch, epsilon, &analytic)
}
