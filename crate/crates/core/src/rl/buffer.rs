use alloc::vec::Vec;

use super::env::Env;
use super::PolicyValueNets;
use crate::error::{shape_err, Result};
use crate::rng::SplitMix64;

/// Fixed-length trajectory storage. All per-step arrays share one length
/// and `terminals[t] && timeouts[t]` never holds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    /// Row-major, `len() * obs_dim` entries.
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub intrinsic: Vec<f64>,
    pub terminals: Vec<bool>,
    pub timeouts: Vec<bool>,
    /// Value of the pre-reset observation at timeouts, zero elsewhere.
    pub timeout_values: Vec<f64>,
    /// Value of the observation after the last step.
    pub bootstrap_value: f64,
    /// Returns of the episodes that ended inside this rollout.
    pub episode_returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, t: usize) -> &[f64] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.log_probs.len(),
            self.values.len(),
            self.rewards.len(),
            self.intrinsic.len(),
            self.terminals.len(),
            self.timeouts.len(),
            self.timeout_values.len(),
        ];
        if lens.iter().any(|&l| l != n) || self.observations.len() != n * self.obs_dim {
            return Err(shape_err("rollout buffer arrays differ in length"));
        }
        if self.terminals.iter().zip(&self.timeouts).any(|(a, b)| *a && *b) {
            return Err(shape_err("a step is flagged both terminal and timeout"));
        }
        Ok(())
    }
}

/// Runs the sampling policy for `length` steps. The environment keeps its
/// episode state across calls.
pub fn collect_rollout(
    nets: &PolicyValueNets,
    env: &mut dyn Env,
    length: usize,
    rng: &mut SplitMix64,
) -> Result<RolloutBuffer> {
    let obs_dim = env.obs_dim();
    if obs_dim != nets.obs_dim() || env.num_actions() != nets.num_actions() {
        return Err(shape_err("networks do not match the environment"));
    }
    let mut buf = RolloutBuffer {
        obs_dim,
        ..RolloutBuffer::default()
    };
    let mut obs = Vec::with_capacity(obs_dim);
    for _ in 0..length {
        env.observe(&mut obs);
        let dist = nets.distribution(&obs)?;
        let action = dist.sample(rng);
        buf.observations.extend_from_slice(&obs);
        buf.actions.push(action);
        buf.log_probs.push(dist.log_prob(action));
        buf.values.push(nets.value_of(&obs)?);
        let tr = env.step(action)?;
        buf.rewards.push(tr.reward);
        buf.intrinsic.push(tr.intrinsic);
        buf.terminals.push(tr.terminal);
        buf.timeouts.push(tr.timeout);
        buf.timeout_values.push(match &tr.final_obs {
            Some(last) if tr.timeout => nets.value_of(last)?,
            _ => 0.0,
        });
        if let Some(ret) = tr.episode_return {
            buf.episode_returns.push(ret);
        }
    }
    env.observe(&mut obs);
    buf.bootstrap_value = nets.value_of(&obs)?;
    Ok(buf)
}

/// Generalized advantage estimates and value targets.
///
/// The recursion stops at every episode boundary. A goal-reached step has
/// no successor value; a timeout step bootstraps from the value of the
/// observation it reached; the last step bootstraps from `bootstrap_value`.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    buffer.validate()?;
    let n = buffer.len();
    let mut adv = alloc::vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = buffer.bootstrap_value;
    for t in (0..n).rev() {
        if buffer.terminals[t] {
            next_value = 0.0;
            next_adv = 0.0;
        } else if buffer.timeouts[t] {
            next_value = buffer.timeout_values[t];
            next_adv = 0.0;
        }
        let delta = buffer.rewards[t] + gamma * next_value - buffer.values[t];
        adv[t] = delta + gamma * lambda * next_adv;
        next_adv = adv[t];
        next_value = buffer.values[t];
    }
    let returns = adv.iter().zip(&buffer.values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
