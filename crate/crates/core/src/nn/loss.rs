//! MSE and binary cross-entropy losses with analytic gradients.

use alloc::vec::Vec;

use crate::math::ln;

/// Clamp bound for BCE probabilities; the loss is undefined at 0 and 1.
pub const BCE_EPS: f64 = 1e-7;

/// Mean squared error over a batch of scalars (or flattened tensors).
/// Returns (loss, dloss/dpred).
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "mse shape mismatch");
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    (loss / n, grad)
}

/// Mean binary cross-entropy with element predictions in (0,1) and labels
/// in {0,1}. Predictions are clamped to [BCE_EPS, 1-BCE_EPS].
pub fn bce(pred: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), labels.len(), "bce shape mismatch");
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p_raw, &z) in pred.iter().zip(labels.iter()) {
        let p = p_raw.clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss += -(z * ln(p) + (1.0 - z) * ln(1.0 - p));
        // Gradient is zero in the clamped region.
        let g = if p_raw <= BCE_EPS || p_raw >= 1.0 - BCE_EPS {
            0.0
        } else {
            (-(z / p) + (1.0 - z) / (1.0 - p)) / n
        };
        grad.push(g);
    }
    (loss / n, grad)
}
