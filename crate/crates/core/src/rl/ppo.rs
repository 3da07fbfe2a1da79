use alloc::format;
use alloc::vec::Vec;

use super::buffer::RolloutBuffer;
use super::{PolicyValueNets, PpoConfig, PpoOptimizer};
use crate::error::{shape_err, Error, Result};
use crate::nn::{adam_step, clip_grad_norm, Categorical, Matrix};
use crate::rng::SplitMix64;

const ADV_EPS: f64 = 1e-8;

/// Minibatch averages over one update, plus diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - clip, 1 + clip]`.
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` in the first minibatch, before any step.
    pub first_ratio_deviation: f64,
    /// Global gradient norm before clipping, averaged over minibatches.
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Shifts to zero mean and scales to unit population standard deviation.
/// A spread below `1e-8` is treated as `1e-8`.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.is_empty() {
        return Vec::new();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var).max(ADV_EPS);
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Clipped-surrogate PPO over `epochs_per_rollout` shuffled passes.
pub fn ppo_update(
    nets: &mut PolicyValueNets,
    optimizer: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    returns: &[f64],
    config: &PpoConfig,
    seed: u64,
) -> Result<PpoStats> {
    buffer.validate()?;
    let n = buffer.len();
    if advantages.len() != n || returns.len() != n {
        return Err(shape_err("advantages and returns must match the buffer length"));
    }
    if n == 0 {
        return Err(shape_err("empty rollout"));
    }
    optimizer.policy.config.learning_rate = config.learning_rate;
    optimizer.value.config.learning_rate = config.learning_rate;
    let adv = normalize_advantages(advantages);
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats::default();
    let mut clipped = 0usize;
    let mut samples = 0usize;

    for epoch in 0..config.epochs_per_rollout {
        rng.shuffle(&mut order);
        for (m, batch) in order.chunks(config.minibatch_size).enumerate() {
            let b = batch.len();
            let inv = 1.0 / b as f64;
            let mut obs = Matrix::zeros(b, buffer.obs_dim);
            for (r, &i) in batch.iter().enumerate() {
                obs.row_mut(r).copy_from_slice(buffer.observation(i));
            }
            let (logits, p_rec) = nets.policy.forward(&obs)?;
            let (values, v_rec) = nets.value.forward(&obs)?;
            let mut g_logits = Matrix::zeros(b, logits.cols);
            let mut g_values = Matrix::zeros(b, 1);
            let (mut pl, mut vl, mut ent) = (0.0, 0.0, 0.0);
            for (r, &i) in batch.iter().enumerate() {
                let dist = Categorical::from_logits(logits.row(r));
                let a = buffer.actions[i];
                let ratio = libm::exp(dist.log_prob(a) - buffer.log_probs[i]);
                if stats.minibatches == 0 {
                    stats.first_ratio_deviation = stats.first_ratio_deviation.max((ratio - 1.0).abs());
                }
                if (ratio - 1.0).abs() > config.clip_ratio {
                    clipped += 1;
                }
                let clipped_ratio = ratio.clamp(1.0 - config.clip_ratio, 1.0 + config.clip_ratio);
                let surr1 = ratio * adv[i];
                let surr2 = clipped_ratio * adv[i];
                pl -= surr1.min(surr2);
                // d(-min)/dlogp is -ratio*A when the unclipped term is the minimum, zero otherwise.
                if surr1 <= surr2 {
                    dist.log_prob_grad(a, -ratio * adv[i] * inv, g_logits.row_mut(r));
                }
                let h = dist.entropy();
                ent += h;
                dist.entropy_grad(-config.entropy_coef * inv, g_logits.row_mut(r));
                let err = values.row(r)[0] - returns[i];
                vl += err * err;
                g_values.row_mut(r)[0] = 2.0 * config.value_loss_coef * err * inv;
            }
            pl *= inv;
            vl *= inv;
            ent *= inv;
            let loss = pl + config.value_loss_coef * vl - config.entropy_coef * ent;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    at: format!("ppo epoch {} minibatch {}", epoch + 1, m + 1),
                });
            }
            let (mut gp, _) = nets.policy.backward(&p_rec, &g_logits)?;
            let (mut gv, _) = nets.value.backward(&v_rec, &g_values)?;
            let norm = clip_grad_norm(&mut [&mut gp, &mut gv], config.max_grad_norm);
            adam_step(nets.policy.params_mut(), &gp, &mut optimizer.policy)?;
            adam_step(nets.value.params_mut(), &gv, &mut optimizer.value)?;
            if !nets.is_finite() {
                return Err(Error::Diverged {
                    at: format!("ppo epoch {} minibatch {}", epoch + 1, m + 1),
                });
            }
            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.entropy += ent;
            stats.grad_norm += norm;
            stats.minibatches += 1;
            samples += b;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.grad_norm /= k;
    stats.clip_fraction = clipped as f64 / samples.max(1) as f64;
    Ok(stats)
}
