//! Proximal policy optimization over the arena.
//!
//! Separate policy and value networks, a fixed-length rollout buffer,
//! generalized advantage estimation, the clipped surrogate update, greedy
//! evaluation and the outer training loop that logs one row per update.

mod buffer;
mod env;
mod ppo;
mod train;

pub use buffer::{collect_rollout, compute_gae, RolloutBuffer};
pub use env::{ArrangementEnv, Env, Transition};
pub use ppo::{normalize_advantages, ppo_update, PpoStats};
pub use train::{evaluate_policy, train, train_with, GreedyPolicy, LogRow, Method, RunConfig, TrainOutcome};

use alloc::vec::Vec;

use crate::error::{config_err, shape_err, Result};
use crate::nn::{init_mlp, Activation, AdamConfig, AdamState, Categorical, Mlp, MlpSpec, ParamTensor};
use crate::rng::derive;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub rollout_length: usize,
    pub epochs_per_rollout: usize,
    pub minibatch_size: usize,
    pub clip_ratio: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_loss_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub hidden_width: usize,
    pub total_updates: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            rollout_length: 128,
            epochs_per_rollout: 3,
            minibatch_size: 32,
            clip_ratio: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            value_loss_coef: 0.5,
            entropy_coef: 0.01,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            hidden_width: 64,
            total_updates: 500,
            eval_every: 50,
            eval_episodes: 100,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ppo.rollout_length", self.rollout_length),
            ("ppo.epochs_per_rollout", self.epochs_per_rollout),
            ("ppo.minibatch_size", self.minibatch_size),
            ("ppo.hidden_width", self.hidden_width),
            ("ppo.eval_every", self.eval_every),
            ("ppo.eval_episodes", self.eval_episodes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(config_err(alloc::format!("{key} must be >= 1")));
            }
        }
        if self.minibatch_size > self.rollout_length {
            return Err(config_err("ppo.minibatch_size must not exceed ppo.rollout_length"));
        }
        let unit = [("ppo.gamma", self.gamma), ("ppo.gae_lambda", self.gae_lambda)];
        for (key, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_err(alloc::format!("{key} must lie in [0, 1]")));
            }
        }
        let nonneg = [
            ("ppo.clip_ratio", self.clip_ratio),
            ("ppo.value_loss_coef", self.value_loss_coef),
            ("ppo.entropy_coef", self.entropy_coef),
            ("ppo.learning_rate", self.learning_rate),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(alloc::format!("{key} must be >= 0")));
            }
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(config_err("ppo.max_grad_norm must be > 0"));
        }
        Ok(())
    }
}

/// Policy `obs -> hidden -> hidden -> logits` and value `obs -> hidden -> hidden -> 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValueNets {
    pub policy: Mlp,
    pub value: Mlp,
}

impl PolicyValueNets {
    pub fn init(obs_dim: usize, num_actions: usize, hidden: usize, seed: u64) -> Result<Self> {
        let policy = MlpSpec::new(&[obs_dim, hidden, hidden, num_actions], Activation::Identity);
        let value = MlpSpec::new(&[obs_dim, hidden, hidden, 1], Activation::Identity);
        Ok(Self {
            policy: init_mlp(&policy, derive(seed, 0), "policy")?,
            value: init_mlp(&value, derive(seed, 1), "value")?,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.spec().input_width()
    }

    pub fn num_actions(&self) -> usize {
        self.policy.spec().output_width()
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<Categorical> {
        Ok(Categorical::from_logits(&self.policy.forward_one(obs)?))
    }

    pub fn value_of(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.forward_one(obs)?[0])
    }

    /// Rebuilds from tensors named `policy.*` and `value.*`, in any order.
    pub fn from_tensors(obs_dim: usize, num_actions: usize, hidden: usize, tensors: &[ParamTensor]) -> Result<Self> {
        let init = Self::init(obs_dim, num_actions, hidden, 0)?;
        let pick = |net: &Mlp| -> Result<Vec<ParamTensor>> {
            net.params()
                .iter()
                .map(|p| {
                    tensors
                        .iter()
                        .find(|t| t.name == p.name)
                        .cloned()
                        .ok_or_else(|| shape_err(alloc::format!("missing tensor {}", p.name)))
                })
                .collect()
        };
        Ok(Self {
            policy: Mlp::from_params(init.policy.spec(), pick(&init.policy)?)?,
            value: Mlp::from_params(init.value.spec(), pick(&init.value)?)?,
        })
    }

    /// Policy tensors followed by value tensors.
    pub fn tensors(&self) -> Vec<ParamTensor> {
        self.policy.params().iter().chain(self.value.params()).cloned().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.policy.params().iter().chain(self.value.params()).all(|p| p.is_finite())
    }
}

/// Adam moments for both networks.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoOptimizer {
    pub policy: AdamState,
    pub value: AdamState,
}

impl PpoOptimizer {
    pub fn new(nets: &PolicyValueNets, learning_rate: f64) -> Self {
        let adam = AdamConfig::with_lr(learning_rate);
        Self {
            policy: AdamState::new(nets.policy.params(), adam),
            value: AdamState::new(nets.value.params(), adam),
        }
    }
}
