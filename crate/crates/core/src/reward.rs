//! Question selection and the answer-flip curiosity reward.
//!
//! At an inquiry step the agent picks questions for the pre-transition
//! state, asks the oracle before and after its push, and earns one unit for
//! every selected question whose answer changed. The sparse task reward is
//! added on top.

use alloc::format;
use alloc::vec::Vec;

use crate::classifier::QuestionScorer;
use crate::error::{config_err, shape_err, Result};
use crate::questions::{answer, QuestionCatalog};
use crate::rng::SplitMix64;
use crate::world::{check_success, ArenaConfig, Goal, WorldState};

/// Paid once when the goal question flips to "yes".
pub const SUCCESS_REWARD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Sum,
    Mean,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Sum => "sum",
            Aggregate::Mean => "mean",
        }
    }

    fn combine(self, flips: usize, asked: usize) -> f64 {
        match self {
            Aggregate::Sum => flips as f64,
            Aggregate::Mean if asked == 0 => 0.0,
            Aggregate::Mean => flips as f64 / asked as f64,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sum" => Some(Aggregate::Sum),
            "mean" => Some(Aggregate::Mean),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryConfig {
    /// Questions per inquiry (top-n or random-n selection).
    pub n: usize,
    /// Inquire every `period` environment steps.
    pub period: usize,
    /// Scale of the intrinsic term in the total reward.
    pub beta: f64,
    pub aggregate: Aggregate,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            n: 1,
            period: 1,
            beta: 0.1,
            aggregate: Aggregate::Sum,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(config_err("query.n must be >= 1"));
        }
        if self.period == 0 {
            return Err(config_err("query.period must be >= 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(config_err("query.beta must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SelectionPolicy<'m> {
    /// The `n` questions the relevance model scores highest.
    ClassifierTopN { n: usize, scorer: &'m QuestionScorer },
    /// Every catalog question.
    AllQuestions,
    RandomN { n: usize },
    NoQuestions,
}

impl SelectionPolicy<'_> {
    pub fn validate(&self, catalog: &QuestionCatalog) -> Result<()> {
        match *self {
            SelectionPolicy::ClassifierTopN { scorer, .. } if scorer.num_questions() != catalog.len() => {
                Err(shape_err("relevance scorer was built for a different catalog"))
            }
            SelectionPolicy::ClassifierTopN { n, .. } | SelectionPolicy::RandomN { n } => {
                if n == 0 || n > catalog.len() {
                    return Err(config_err(format!(
                        "selection size {n} must lie in [1, {}]",
                        catalog.len()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn asks_questions(&self) -> bool {
        !matches!(self, SelectionPolicy::NoQuestions)
    }
}

/// Indices of the `n` largest scores, descending; equal scores keep index order.
pub fn top_n(scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

pub fn select_questions(
    policy: &SelectionPolicy<'_>,
    state_features: &[f64],
    catalog: &QuestionCatalog,
    seed: u64,
) -> Result<Vec<usize>> {
    policy.validate(catalog)?;
    Ok(match *policy {
        SelectionPolicy::ClassifierTopN { n, scorer } => top_n(&scorer.scores(state_features)?, n),
        SelectionPolicy::AllQuestions => (0..catalog.len()).collect(),
        SelectionPolicy::RandomN { n } => {
            // Partial Fisher-Yates from the front.
            let mut idx: Vec<usize> = (0..catalog.len()).collect();
            let mut rng = SplitMix64::new(seed);
            for i in 0..n {
                let j = i + rng.below(idx.len() - i);
                idx.swap(i, j);
            }
            idx.truncate(n);
            idx
        }
        SelectionPolicy::NoQuestions => Vec::new(),
    })
}

/// Count (or fraction, for `Mean`) of selected answers that changed.
pub fn intrinsic_reward(before: &[bool], after: &[bool], selected: &[usize], aggregate: Aggregate) -> Result<f64> {
    if before.len() != after.len() {
        return Err(shape_err("answer vectors differ in length"));
    }
    let mut flips = 0usize;
    for &i in selected {
        if i >= before.len() {
            return Err(shape_err(format!("selected question {i} is out of range")));
        }
        if before[i] != after[i] {
            flips += 1;
        }
    }
    Ok(aggregate.combine(flips, selected.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReward {
    pub total: f64,
    pub extrinsic: f64,
    pub intrinsic: f64,
}

/// Reward for the transition `before -> after` at episode step `t`.
///
/// Questions are chosen from `before`; only steps with `t % period == 0`
/// inquire. `seed` drives random selection.
#[allow(clippy::too_many_arguments)]
pub fn compute_step_reward(
    before: &WorldState,
    after: &WorldState,
    goal: Goal,
    catalog: &QuestionCatalog,
    arena: &ArenaConfig,
    policy: &SelectionPolicy<'_>,
    query: &QueryConfig,
    t: usize,
    seed: u64,
) -> Result<StepReward> {
    let extrinsic = if check_success(after, goal, catalog)? {
        SUCCESS_REWARD
    } else {
        0.0
    };
    let mut intrinsic = 0.0;
    if policy.asks_questions() && t % query.period == 0 {
        let features = before.normalized_features(arena.half_extent);
        let selected = select_questions(policy, &features, catalog, seed)?;
        let mut flips = 0usize;
        for &i in &selected {
            let q = &catalog.questions()[i];
            if answer(before, q)? != answer(after, q)? {
                flips += 1;
            }
        }
        intrinsic = query.aggregate.combine(flips, selected.len());
    }
    Ok(StepReward {
        total: extrinsic + query.beta * intrinsic,
        extrinsic,
        intrinsic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{predict_scores, ClassifierHyper, RelevanceModel};
    use crate::questions::{answer_all, default_catalog, Question, Relation};
    use crate::world::{reset, step, ActionId};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn top_n_breaks_ties_by_index() {
        assert_eq!(top_n(&[0.1, 0.9, 0.9, 0.2], 2), vec![1, 2]);
        assert_eq!(top_n(&[0.1, 0.3, 0.2, 0.95, 0.4], 1), vec![3]);
    }

    #[test]
    fn selection_variants() {
        let cat = default_catalog();
        let f = [0.0; 10];
        let all = select_questions(&SelectionPolicy::AllQuestions, &f, &cat, 0).unwrap();
        assert_eq!(all, (0..80).collect::<Vec<_>>());
        assert!(select_questions(&SelectionPolicy::NoQuestions, &f, &cat, 0).unwrap().is_empty());

        let r1 = select_questions(&SelectionPolicy::RandomN { n: 5 }, &f, &cat, 9).unwrap();
        let r2 = select_questions(&SelectionPolicy::RandomN { n: 5 }, &f, &cat, 9).unwrap();
        assert_eq!(r1, r2);
        let mut dedup = r1.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 5);
        assert!(select_questions(&SelectionPolicy::RandomN { n: 81 }, &f, &cat, 9).is_err());
        assert!(select_questions(&SelectionPolicy::RandomN { n: 0 }, &f, &cat, 9).is_err());
    }

    #[test]
    fn classifier_selection_is_top_scores() {
        let cat = default_catalog();
        let model = RelevanceModel::init(10, &cat, &ClassifierHyper::default(), 4).unwrap();
        let f = [0.3, -0.2, 0.1, 0.5, -0.7, 0.9, 0.0, 0.4, -0.1, 0.2];
        let scorer = QuestionScorer::new(&model, &cat).unwrap();
        let policy = SelectionPolicy::ClassifierTopN { n: 3, scorer: &scorer };
        let picked = select_questions(&policy, &f, &cat, 0).unwrap();
        let scores = predict_scores(&model, &f, &cat).unwrap();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(scores[picked[0]], best);
        assert!(scores[picked[0]] >= scores[picked[1]] && scores[picked[1]] >= scores[picked[2]]);
        assert_eq!(picked, select_questions(&policy, &f, &cat, 123).unwrap());
    }

    #[test]
    fn intrinsic_examples() {
        let (y, n) = (true, false);
        assert_eq!(intrinsic_reward(&[y, n, y], &[y, y, n], &[1, 2], Aggregate::Sum).unwrap(), 2.0);
        assert_eq!(intrinsic_reward(&[y, n, y], &[y, n, y], &[0, 1, 2], Aggregate::Sum).unwrap(), 0.0);
        assert_eq!(intrinsic_reward(&[y, n], &[n, n], &[0, 1], Aggregate::Mean).unwrap(), 0.5);
        assert!(intrinsic_reward(&[y, n], &[n, n], &[2], Aggregate::Sum).is_err());
        assert!(intrinsic_reward(&[y, n], &[n], &[0], Aggregate::Sum).is_err());
    }

    fn scene(points: &[[f64; 2]]) -> WorldState {
        WorldState {
            positions: points.to_vec(),
            color_ids: (0..points.len()).collect(),
            step_count: 0,
        }
    }

    #[test]
    fn step_reward_examples() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        // Goal: green left of red. Green starts just right of red; one push west solves it.
        let goal = Goal {
            question_index: cat.index_of(&Question::new(0, 2, Relation::Left)).unwrap(),
        };
        let mut pts = [[0.5, 0.5], [-0.5, 0.5], [0.55, -0.5], [-0.5, -0.5], [0.0, 0.0]];
        let before = scene(&pts);
        let after = step(&before, ActionId(2 * 8 + 4), &arena).unwrap();
        let q0 = QueryConfig {
            beta: 0.0,
            ..QueryConfig::default()
        };
        let r = compute_step_reward(&before, &after, goal, &cat, &arena, &SelectionPolicy::AllQuestions, &q0, 0, 0)
            .unwrap();
        assert_eq!((r.total, r.extrinsic), (10.0, 10.0));
        assert!(r.intrinsic > 0.0);

        pts[2] = [0.9, -0.5];
        let still = scene(&pts);
        let r = compute_step_reward(
            &still,
            &still,
            goal,
            &cat,
            &arena,
            &SelectionPolicy::AllQuestions,
            &QueryConfig::default(),
            0,
            0,
        )
        .unwrap();
        assert_eq!((r.total, r.extrinsic, r.intrinsic), (0.0, 0.0, 0.0));
    }

    #[test]
    fn inquiry_period_skips_steps() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        let q = QueryConfig {
            period: 3,
            ..QueryConfig::default()
        };
        let s = reset(&arena, 4).unwrap();
        let goal = crate::world::sample_goal(&s, &cat, 1).unwrap();
        // A push that is guaranteed to flip something: move an object across another.
        let mut flipped = None;
        for a in 0..40 {
            let next = step(&s, ActionId(a), &arena).unwrap();
            if answer_all(&s, &cat).unwrap() != answer_all(&next, &cat).unwrap() {
                flipped = Some(next);
                break;
            }
        }
        let after = flipped.expect("some push flips an answer");
        for t in 0..9 {
            let r = compute_step_reward(&s, &after, goal, &cat, &arena, &SelectionPolicy::AllQuestions, &q, t, 0)
                .unwrap();
            if t % 3 == 0 {
                assert!(r.intrinsic > 0.0);
            } else {
                assert_eq!(r.intrinsic, 0.0);
            }
        }
    }

    #[test]
    fn beta_scales_only_intrinsic() {
        let cat = default_catalog();
        let arena = ArenaConfig::default();
        let s = scene(&[[0.0, 0.0], [0.05, 0.3], [0.5, 0.5], [-0.5, -0.5], [0.7, -0.7]]);
        let after = step(&s, ActionId(4), &arena).unwrap();
        let goal = Goal { question_index: 0 };
        let q = QueryConfig {
            beta: 0.25,
            ..QueryConfig::default()
        };
        let r = compute_step_reward(&s, &after, goal, &cat, &arena, &SelectionPolicy::AllQuestions, &q, 0, 0).unwrap();
        assert!((r.total - (r.extrinsic + 0.25 * r.intrinsic)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hamming_bound_and_monotone(
            before in proptest::collection::vec(any::<bool>(), 20),
            after in proptest::collection::vec(any::<bool>(), 20),
            sel in proptest::collection::btree_set(0usize..20, 0..20),
            extra in proptest::collection::btree_set(0usize..20, 0..20),
        ) {
            let sel: Vec<usize> = sel.into_iter().collect();
            let r = intrinsic_reward(&before, &after, &sel, Aggregate::Sum).unwrap();
            prop_assert!(r >= 0.0 && r <= sel.len() as f64);
            let mut sup: Vec<usize> = sel.iter().chain(extra.iter()).copied().collect();
            sup.sort();
            sup.dedup();
            prop_assert!(intrinsic_reward(&before, &after, &sup, Aggregate::Sum).unwrap() >= r);
            let all: Vec<usize> = (0..20).collect();
            let hamming = before.iter().zip(&after).filter(|(a, b)| a != b).count();
            prop_assert_eq!(intrinsic_reward(&before, &after, &all, Aggregate::Sum).unwrap(), hamming as f64);
        }
    }

    #[test]
    fn empty_selection_mean_is_zero() {
        assert_eq!(intrinsic_reward(&[true], &[false], &[], Aggregate::Mean).unwrap(), 0.0);
    }
}
