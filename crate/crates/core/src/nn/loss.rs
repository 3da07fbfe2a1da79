use alloc::vec::Vec;

/// Predictions are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to the
/// (clamped) predictions.
pub fn bce_loss(predictions: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(predictions.len(), targets.len(), "bce_loss length mismatch");
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(predictions.len());
    for (&p, &y) in predictions.iter().zip(targets) {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p);
        grad.push((p - y) / (p * (1.0 - p)) / n);
    }
    (loss / n, grad)
}

/// Per-element loss and logit gradient for a sigmoid output, fused so the
/// gradient stays `p - y` even when the loss clamp is active.
#[inline]
pub fn bce_logit_grad(p: f64, y: f64) -> (f64, f64) {
    let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let loss = -(y * libm::log(pc) + (1.0 - y) * libm::log(1.0 - pc));
    (loss, p - y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_prediction_costs_ln2() {
        let (l, _) = bce_loss(&[0.5], &[1.0]);
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn exact_predictions_cost_nothing() {
        let (l, _) = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert!(l <= 1e-6);
        let (l, g) = bce_loss(&[0.0, 1.0], &[1.0, 0.0]);
        assert!(l.is_finite() && g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gradient_sign_follows_error() {
        let (_, g) = bce_loss(&[0.8, 0.2, 0.3, 0.9], &[0.0, 1.0, 0.0, 1.0]);
        assert!(g[0] > 0.0 && g[1] < 0.0 && g[2] > 0.0 && g[3] < 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.3, 0.75, 0.52];
        let y = [1.0, 0.0, 1.0];
        let (_, g) = bce_loss(&p, &y);
        for i in 0..3 {
            let mut up = p;
            let mut dn = p;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (bce_loss(&up, &y).0 - bce_loss(&dn, &y).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn fused_matches_chain_rule() {
        let z: f64 = 0.4;
        let p = 1.0 / (1.0 + libm::exp(-z));
        let (l, dz) = bce_logit_grad(p, 1.0);
        let (l2, dp) = bce_loss(&[p], &[1.0]);
        assert!((l - l2).abs() < 1e-15);
        assert!((dz - dp[0] * p * (1.0 - p)).abs() < 1e-12);
    }
}
