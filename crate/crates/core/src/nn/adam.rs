use alloc::vec;
use alloc::vec::Vec;

use super::tensor::ParamTensor;
use crate::error::{shape_err, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[ParamTensor], config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [ParamTensor], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(shape_err("adam: parameter, gradient and moment counts differ"));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(shape_err(alloc::format!("adam: size mismatch for {}", p.name)));
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = state.config;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(b1, t);
    let c2 = 1.0 - libm::pow(b2, t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.values[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}

/// Scales every gradient so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(groups: &mut [&mut Vec<Vec<f64>>], max_norm: f64) -> f64 {
    let sq: f64 = groups
        .iter()
        .flat_map(|g| g.iter())
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum();
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in groups.iter_mut() {
            for t in g.iter_mut() {
                t.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Vec<ParamTensor> {
        vec![
            ParamTensor::new("w", vec![2, 2], vec![0.5, -0.25, 1.0, 2.0]).unwrap(),
            ParamTensor::new("b", vec![2], vec![0.0, 0.1]).unwrap(),
        ]
    }

    fn grads() -> Vec<Vec<f64>> {
        vec![vec![0.3, -2.0, 1e-3, 0.0], vec![-0.7, 5.0]]
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let mut p = params();
        let mut st = AdamState::new(&p, AdamConfig::with_lr(0.0));
        adam_step(&mut p, &grads(), &mut st).unwrap();
        assert_eq!(p, params());
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps).
        let lr = 0.01;
        let mut p = params();
        let mut st = AdamState::new(&p, AdamConfig::with_lr(lr));
        adam_step(&mut p, &grads(), &mut st).unwrap();
        for ((after, before), g) in p.iter().zip(params()).zip(grads()) {
            for i in 0..g.len() {
                let want = before.values[i] - lr * g[i] / (g[i].abs() + 1e-8);
                assert!((after.values[i] - want).abs() < 1e-15);
                if g[i].abs() > 1e-4 {
                    let delta = after.values[i] - before.values[i];
                    assert!((delta.abs() - lr).abs() < 1e-6 * lr * 100.0);
                    assert_eq!(delta.signum(), -g[i].signum());
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = params();
            let mut st = AdamState::new(&p, AdamConfig::default());
            for _ in 0..5 {
                adam_step(&mut p, &grads(), &mut st).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.values.iter().zip(&y.values) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = params();
        let mut st = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &[vec![0.0; 4]], &mut st).is_err());
        assert!(adam_step(&mut p, &[vec![0.0; 3], vec![0.0; 2]], &mut st).is_err());
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut a = vec![vec![3.0, 0.0]];
        let mut b = vec![vec![4.0]];
        let norm = clip_grad_norm(&mut [&mut a, &mut b], 0.5);
        assert_eq!(norm, 5.0);
        let after = libm::sqrt(a[0][0] * a[0][0] + b[0][0] * b[0][0]);
        assert!((after - 0.5).abs() < 1e-12);
    }
}
