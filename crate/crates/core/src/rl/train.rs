use alloc::format;
use alloc::vec::Vec;

use super::buffer::{collect_rollout, compute_gae};
use super::env::{episode_start, ArrangementEnv};
use super::ppo::ppo_update;
use super::{PolicyValueNets, PpoConfig, PpoOptimizer};
use crate::classifier::QuestionScorer;
use crate::error::{config_err, Error, Result};
use crate::questions::QuestionCatalog;
use crate::reward::{QueryConfig, SelectionPolicy};
use crate::rng::{derive, SplitMix64};
use crate::seeds::{subsystem_seed, Subsystem};
use crate::world::{check_success, observe_into, step, ActionId, ArenaConfig};

/// The four compared agents. They differ only in question selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Classifier top-n selection.
    Ours,
    /// Every catalog question.
    Ane,
    /// `n` uniformly random questions.
    Random,
    /// Sparse reward only.
    Ppo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ours, Method::Ane, Method::Random, Method::Ppo];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Ane => "ane",
            Method::Random => "random",
            Method::Ppo => "ppo",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn needs_classifier(self) -> bool {
        self == Method::Ours
    }

    pub fn selection<'m>(self, n: usize, scorer: Option<&'m QuestionScorer>) -> Result<SelectionPolicy<'m>> {
        Ok(match self {
            Method::Ours => SelectionPolicy::ClassifierTopN {
                n,
                scorer: scorer.ok_or_else(|| config_err("method ours needs a trained classifier"))?,
            },
            Method::Ane => SelectionPolicy::AllQuestions,
            Method::Random => SelectionPolicy::RandomN { n },
            Method::Ppo => SelectionPolicy::NoQuestions,
        })
    }
}

/// Everything that defines one training run besides the catalog and classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub arena: ArenaConfig,
    pub query: QueryConfig,
    pub ppo: PpoConfig,
    pub method: Method,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self, catalog: &QuestionCatalog) -> Result<()> {
        self.arena.validate_with_catalog(catalog)?;
        self.query.validate()?;
        self.ppo.validate()
    }
}

/// A deterministic action chooser for evaluation.
pub trait GreedyPolicy {
    fn greedy_action(&self, obs: &[f64]) -> Result<usize>;
}

impl GreedyPolicy for PolicyValueNets {
    fn greedy_action(&self, obs: &[f64]) -> Result<usize> {
        Ok(self.distribution(obs)?.argmax())
    }
}

/// Fraction of `episodes` greedy episodes whose goal is reached before the
/// step cap. Episode `i` starts from `derive(seed, i)`.
pub fn evaluate_policy(
    policy: &dyn GreedyPolicy,
    arena: &ArenaConfig,
    catalog: &QuestionCatalog,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    arena.validate_with_catalog(catalog)?;
    if episodes == 0 {
        return Err(config_err("evaluation needs at least one episode"));
    }
    let mut successes = 0usize;
    let mut obs = Vec::new();
    for i in 0..episodes {
        let (mut state, goal) = episode_start(arena, catalog, derive(seed, i as u64))?;
        while state.step_count < arena.max_episode_steps {
            observe_into(&state, goal, catalog, arena, &mut obs);
            state = step(&state, ActionId(policy.greedy_action(&obs)?), arena)?;
            if check_success(&state, goal, catalog)? {
                successes += 1;
                break;
            }
        }
    }
    Ok(successes as f64 / episodes as f64)
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    /// 1-based update index.
    pub update: usize,
    pub env_steps: u64,
    /// Greedy success rate, on evaluation updates only.
    pub success_rate: Option<f64>,
    /// Mean intrinsic reward per rollout step.
    pub mean_intrinsic: f64,
    /// Mean return of the episodes that ended during the rollout, if any.
    pub mean_return: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub nets: PolicyValueNets,
    pub log: Vec<LogRow>,
}

impl TrainOutcome {
    /// Success rate of the last evaluated update.
    pub fn final_success(&self) -> Option<f64> {
        self.log.iter().rev().find_map(|r| r.success_rate)
    }
}

pub fn train(run: &RunConfig, catalog: &QuestionCatalog, scorer: Option<&QuestionScorer>) -> Result<TrainOutcome> {
    train_with(run, catalog, scorer, |_, _| Ok(()))
}

/// Runs `total_updates` iterations of collect, GAE and update. Evaluation
/// happens every `eval_every` updates and after the last one, always on the
/// same episode seeds. `on_update` sees each row and the updated networks.
pub fn train_with(
    run: &RunConfig,
    catalog: &QuestionCatalog,
    scorer: Option<&QuestionScorer>,
    mut on_update: impl FnMut(&LogRow, &PolicyValueNets) -> Result<()>,
) -> Result<TrainOutcome> {
    run.validate(catalog)?;
    let ppo = &run.ppo;
    let selection = run.method.selection(run.query.n, scorer)?;
    let mut env = ArrangementEnv::new(
        &run.arena,
        catalog,
        selection,
        &run.query,
        subsystem_seed(run.seed, Subsystem::Environment),
        subsystem_seed(run.seed, Subsystem::Selection),
    )?;
    let obs_dim = 2 * run.arena.num_objects + catalog.len();
    let mut nets = PolicyValueNets::init(
        obs_dim,
        run.arena.num_actions(),
        ppo.hidden_width,
        subsystem_seed(run.seed, Subsystem::PolicyInit),
    )?;
    let mut optimizer = PpoOptimizer::new(&nets, ppo.learning_rate);
    let mut action_rng = SplitMix64::new(subsystem_seed(run.seed, Subsystem::Actions));
    let update_seed = subsystem_seed(run.seed, Subsystem::Update);
    let eval_seed = subsystem_seed(run.seed, Subsystem::Evaluation);
    let mut log = Vec::with_capacity(ppo.total_updates);
    let mut env_steps = 0u64;

    for u in 1..=ppo.total_updates {
        let buffer = collect_rollout(&nets, &mut env, ppo.rollout_length, &mut action_rng)?;
        env_steps += buffer.len() as u64;
        let (adv, ret) = compute_gae(&buffer, ppo.gamma, ppo.gae_lambda)?;
        let stats = ppo_update(&mut nets, &mut optimizer, &buffer, &adv, &ret, ppo, derive(update_seed, u as u64))
            .map_err(|e| match e {
                Error::Diverged { at } => Error::Diverged {
                    at: format!("update {u}, {at}"),
                },
                other => other,
            })?;
        let success_rate = if u % ppo.eval_every == 0 || u == ppo.total_updates {
            Some(evaluate_policy(&nets, &run.arena, catalog, ppo.eval_episodes, eval_seed)?)
        } else {
            None
        };
        let mean_return = (!buffer.episode_returns.is_empty())
            .then(|| buffer.episode_returns.iter().sum::<f64>() / buffer.episode_returns.len() as f64);
        let row = LogRow {
            update: u,
            env_steps,
            success_rate,
            mean_intrinsic: buffer.intrinsic.iter().sum::<f64>() / buffer.len() as f64,
            mean_return,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        };
        on_update(&row, &nets)?;
        log.push(row);
    }
    Ok(TrainOutcome { nets, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ClassifierHyper, RelevanceModel};
    use crate::questions::default_catalog;
    use crate::rl::{Env, Transition};

    fn small_run(method: Method, beta: f64, updates: usize) -> RunConfig {
        RunConfig {
            arena: ArenaConfig::default(),
            query: QueryConfig {
                beta,
                ..QueryConfig::default()
            },
            ppo: PpoConfig {
                total_updates: updates,
                eval_every: 2,
                eval_episodes: 5,
                ..PpoConfig::default()
            },
            method,
            seed: 11,
        }
    }

    fn fresh(run: &RunConfig, catalog: &QuestionCatalog) -> (PolicyValueNets, super::super::RolloutBuffer) {
        let nets = PolicyValueNets::init(2 * 5 + catalog.len(), 40, 64, 3).unwrap();
        let mut env = ArrangementEnv::new(&run.arena, catalog, SelectionPolicy::AllQuestions, &run.query, 1, 2).unwrap();
        let mut rng = SplitMix64::new(4);
        let buf = collect_rollout(&nets, &mut env, 128, &mut rng).unwrap();
        (nets, buf)
    }

    #[test]
    fn stored_log_probs_match_policy() {
        let cat = default_catalog();
        let run = small_run(Method::Ane, 0.1, 1);
        let (nets, buf) = fresh(&run, &cat);
        assert_eq!(buf.len(), 128);
        buf.validate().unwrap();
        for t in 0..buf.len() {
            let lp = nets.distribution(buf.observation(t)).unwrap().log_prob(buf.actions[t]);
            assert!((lp - buf.log_probs[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn first_minibatch_ratio_is_one() {
        let cat = default_catalog();
        let run = small_run(Method::Ane, 0.1, 1);
        let (mut nets, buf) = fresh(&run, &cat);
        let (adv, ret) = compute_gae(&buf, 0.99, 0.95).unwrap();
        let mut opt = PpoOptimizer::new(&nets, 3e-4);
        let stats = ppo_update(&mut nets, &mut opt, &buf, &adv, &ret, &run.ppo, 9).unwrap();
        assert!(stats.first_ratio_deviation < 1e-9);
        assert_eq!(stats.minibatches, 12);
        assert!(stats.entropy > 0.0 && stats.entropy <= libm::log(40.0) + 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cat = default_catalog();
        let mut run = small_run(Method::Ane, 0.1, 1);
        run.ppo.learning_rate = 0.0;
        let (mut nets, buf) = fresh(&run, &cat);
        let before = nets.clone();
        let (adv, ret) = compute_gae(&buf, 0.99, 0.95).unwrap();
        let mut opt = PpoOptimizer::new(&nets, 0.0);
        ppo_update(&mut nets, &mut opt, &buf, &adv, &ret, &run.ppo, 9).unwrap();
        for (a, b) in nets.tensors().iter().zip(before.tensors()) {
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cat = default_catalog();
        let run = small_run(Method::Random, 0.1, 3);
        let a = train(&run, &cat, None).unwrap();
        let b = train(&run, &cat, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log.len(), 3);
        assert!(a.log[0].success_rate.is_none());
        assert!(a.log[1].success_rate.is_some() && a.log[2].success_rate.is_some());
        assert_eq!(a.log[2].env_steps, 3 * 128);
        assert!(a.log.iter().all(|r| r.mean_intrinsic >= 0.0));
        let mut other = run.clone();
        other.seed = 12;
        assert_ne!(train(&other, &cat, None).unwrap().nets, a.nets);
    }

    #[test]
    fn zero_beta_matches_sparse_baseline() {
        let cat = default_catalog();
        let model = RelevanceModel::init(10, &cat, &ClassifierHyper::default(), 1).unwrap();
        let scorer = QuestionScorer::new(&model, &cat).unwrap();
        let ours = train(&small_run(Method::Ours, 0.0, 2), &cat, Some(&scorer)).unwrap();
        let ppo = train(&small_run(Method::Ppo, 0.0, 2), &cat, None).unwrap();
        assert_eq!(ours.nets, ppo.nets);
        assert!(ours.log.iter().any(|r| r.mean_intrinsic > 0.0));
        assert!(ppo.log.iter().all(|r| r.mean_intrinsic == 0.0));
    }

    #[test]
    fn ours_requires_a_classifier() {
        let cat = default_catalog();
        assert!(train(&small_run(Method::Ours, 0.1, 1), &cat, None).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()), Some(m));
        }
        assert_eq!(Method::from_name("sac"), None);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        let nets = PolicyValueNets::init(90, 40, 64, 5).unwrap();
        let a = evaluate_policy(&nets, &arena, &cat, 20, 3).unwrap();
        assert_eq!(a, evaluate_policy(&nets, &arena, &cat, 20, 3).unwrap());
        assert!((0.0..=1.0).contains(&a));
        assert!(evaluate_policy(&nets, &arena, &cat, 0, 3).is_err());
    }

    /// One-step episodes; action 1 pays 1, action 0 pays 0.
    struct Bandit;

    impl Env for Bandit {
        fn obs_dim(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            2
        }
        fn observe(&self, out: &mut Vec<f64>) {
            out.clear();
            out.push(1.0);
        }
        fn step(&mut self, action: usize) -> Result<Transition> {
            let reward = action as f64;
            Ok(Transition {
                reward,
                intrinsic: 0.0,
                terminal: true,
                timeout: false,
                final_obs: None,
                episode_return: Some(reward),
            })
        }
    }

    #[test]
    fn learns_a_bandit() {
        let cfg = PpoConfig::default();
        let mut nets = PolicyValueNets::init(1, 2, 16, 0).unwrap();
        let mut opt = PpoOptimizer::new(&nets, 3e-3);
        let mut cfg_fast = cfg.clone();
        cfg_fast.learning_rate = 3e-3;
        let mut rng = SplitMix64::new(1);
        for u in 0..40 {
            let buf = collect_rollout(&nets, &mut Bandit, 128, &mut rng).unwrap();
            let (adv, ret) = compute_gae(&buf, cfg.gamma, cfg.gae_lambda).unwrap();
            ppo_update(&mut nets, &mut opt, &buf, &adv, &ret, &cfg_fast, u).unwrap();
        }
        assert!(nets.distribution(&[1.0]).unwrap().probs()[1] > 0.95);
    }

    #[test]
    fn tensors_round_trip() {
        let nets = PolicyValueNets::init(90, 40, 64, 5).unwrap();
        let mut t = nets.tensors();
        t.reverse();
        assert_eq!(PolicyValueNets::from_tensors(90, 40, 64, &t).unwrap(), nets);
        t.pop();
        assert!(PolicyValueNets::from_tensors(90, 40, 64, &t).is_err());
    }
}
