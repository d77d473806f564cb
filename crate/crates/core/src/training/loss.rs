//! Classification and distillation losses, with their gradients with
//! respect to the (student) logits.

use crate::nncore::{log_softmax, log_sum_exp, softmax};

/// `-ln softmax(logits)[label]`, computed as `logsumexp(z) - z[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// `-ln probs[label]` for an already-normalized distribution.
pub fn cross_entropy_from_probs(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

/// `KL(p ‖ q)` from log-probabilities. Terms with `p = 0` contribute 0.
pub fn kl_divergence_from_logs(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .map(|(&lp, &lq)| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (lp - lq)
            }
        })
        .sum()
}

fn scaled(z: &[f64], temperature: f64) -> Vec<f64> {
    z.iter().map(|v| v / temperature).collect()
}

/// Soft-target KL term: `KL(softmax(teacher/T) ‖ softmax(student/T))`.
pub fn soft_kl(student_logits: &[f64], teacher_logits: &[f64], temperature: f64) -> f64 {
    kl_divergence_from_logs(
        &log_softmax(&scaled(teacher_logits, temperature)),
        &log_softmax(&scaled(student_logits, temperature)),
    )
}

/// `alpha·CE(student, label) + (1 − alpha)·T²·KL(teacher_T ‖ student_T)`.
pub fn distill_loss(student_logits: &[f64], teacher_logits: &[f64], label: usize, temperature: f64, alpha: f64) -> f64 {
    let hard = cross_entropy(student_logits, label);
    let soft = soft_kl(student_logits, teacher_logits, temperature);
    alpha * hard + (1.0 - alpha) * temperature * temperature * soft
}

/// Teacher guidance for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTarget {
    pub teacher_logits: Vec<f64>,
    pub temperature: f64,
    pub alpha: f64,
}

/// What one example's logits are trained towards.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub label: usize,
    pub soft: Option<SoftTarget>,
}

impl Target {
    pub fn hard(label: usize) -> Self {
        Self { label, soft: None }
    }
}

/// `logsumexp(a) − logsumexp(b)` without cancellation when `a ≈ b`.
fn lse_delta(a: &[f64], b: &[f64]) -> f64 {
    let m = b.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let (mut base, mut change) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let w = (y - m).exp();
        base += w;
        change += w * (x - y).exp_m1();
    }
    (change / base).ln_1p()
}

/// `loss(a) − loss(b)` for two logit vectors of the same target, evaluated
/// from logit differences so that nearby inputs keep full precision.
pub fn loss_delta(a: &[f64], b: &[f64], target: &Target) -> f64 {
    let y = target.label;
    let hard = lse_delta(a, b) - (a[y] - b[y]);
    match &target.soft {
        None => hard,
        Some(soft) => {
            let (t, alpha) = (soft.temperature, soft.alpha);
            let pt = softmax(&scaled(&soft.teacher_logits, t));
            let (at, bt) = (scaled(a, t), scaled(b, t));
            let cross: f64 = pt.iter().zip(at.iter().zip(&bt)).map(|(p, (x, z))| p * (x - z)).sum();
            alpha * hard + (1.0 - alpha) * t * t * (lse_delta(&at, &bt) - cross)
        }
    }
}

/// Loss for one example and its gradient with respect to the logits.
pub fn loss_and_grad(logits: &[f64], target: &Target) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let mut hard_grad = p;
    hard_grad[target.label] -= 1.0;
    match &target.soft {
        None => (cross_entropy(logits, target.label), hard_grad),
        Some(soft) => {
            let (t, alpha) = (soft.temperature, soft.alpha);
            let loss = distill_loss(logits, &soft.teacher_logits, target.label, t, alpha);
            // d/dz [T² KL(p_t ‖ softmax(z/T))] = T (softmax(z/T) − p_t)
            let q = softmax(&scaled(logits, t));
            let pt = softmax(&scaled(&soft.teacher_logits, t));
            let grad = hard_grad
                .iter()
                .zip(q.iter().zip(&pt))
                .map(|(&h, (&qs, &ps))| alpha * h + (1.0 - alpha) * t * (qs - ps))
                .collect();
            (loss, grad)
        }
    }
}
