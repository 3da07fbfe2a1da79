use alloc::vec::Vec;

use crate::error::Result;
use crate::questions::QuestionCatalog;
use crate::reward::{compute_step_reward, QueryConfig, SelectionPolicy};
use crate::rng::derive;
use crate::world::{observe, observe_into, reset, sample_goal, step, ActionId, ArenaConfig, Goal, WorldState};

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// The reward the learner optimizes.
    pub reward: f64,
    pub intrinsic: f64,
    /// The episode reached its goal.
    pub terminal: bool,
    /// The episode hit the step cap without reaching its goal.
    pub timeout: bool,
    /// Observation reached by this step before the automatic reset; set on timeouts.
    pub final_obs: Option<Vec<f64>>,
    /// Sum of `reward` over the episode; set when the episode ended.
    pub episode_return: Option<f64>,
}

/// An auto-resetting episodic environment. `terminal` and `timeout` are
/// never both set.
pub trait Env {
    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn observe(&self, out: &mut Vec<f64>);
    fn step(&mut self, action: usize) -> Result<Transition>;
}

/// Initial state and goal of the episode seeded by `seed`.
pub(crate) fn episode_start(arena: &ArenaConfig, catalog: &QuestionCatalog, seed: u64) -> Result<(WorldState, Goal)> {
    let state = reset(arena, derive(seed, 0))?;
    let goal = sample_goal(&state, catalog, derive(seed, 1))?;
    Ok((state, goal))
}

/// The arena with a goal question, shaped by a question-selection policy.
///
/// Episode `k` starts from element `k` of the `episode_seed` stream;
/// selection seeds are elements of the `selection_seed` stream indexed by
/// the global step count.
#[derive(Clone, Debug)]
pub struct ArrangementEnv<'a> {
    arena: &'a ArenaConfig,
    catalog: &'a QuestionCatalog,
    selection: SelectionPolicy<'a>,
    query: &'a QueryConfig,
    episode_base: u64,
    selection_base: u64,
    episodes_started: u64,
    total_steps: u64,
    state: WorldState,
    goal: Goal,
    episode_return: f64,
}

impl<'a> ArrangementEnv<'a> {
    pub fn new(
        arena: &'a ArenaConfig,
        catalog: &'a QuestionCatalog,
        selection: SelectionPolicy<'a>,
        query: &'a QueryConfig,
        episode_seed: u64,
        selection_seed: u64,
    ) -> Result<Self> {
        arena.validate_with_catalog(catalog)?;
        query.validate()?;
        selection.validate(catalog)?;
        let (state, goal) = episode_start(arena, catalog, derive(episode_seed, 0))?;
        Ok(Self {
            arena,
            catalog,
            selection,
            query,
            episode_base: episode_seed,
            selection_base: selection_seed,
            episodes_started: 1,
            total_steps: 0,
            state,
            goal,
            episode_return: 0.0,
        })
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn goal(&self) -> Goal {
        self.goal
    }

    fn next_episode(&mut self) -> Result<()> {
        let seed = derive(self.episode_base, self.episodes_started);
        let (state, goal) = episode_start(self.arena, self.catalog, seed)?;
        self.state = state;
        self.goal = goal;
        self.episodes_started += 1;
        self.episode_return = 0.0;
        Ok(())
    }
}

impl Env for ArrangementEnv<'_> {
    fn obs_dim(&self) -> usize {
        2 * self.arena.num_objects + self.catalog.len()
    }

    fn num_actions(&self) -> usize {
        self.arena.num_actions()
    }

    fn observe(&self, out: &mut Vec<f64>) {
        observe_into(&self.state, self.goal, self.catalog, self.arena, out);
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let next = step(&self.state, ActionId(action), self.arena)?;
        let r = compute_step_reward(
            &self.state,
            &next,
            self.goal,
            self.catalog,
            self.arena,
            &self.selection,
            self.query,
            self.state.step_count,
            derive(self.selection_base, self.total_steps),
        )?;
        self.total_steps += 1;
        self.episode_return += r.total;
        let terminal = r.extrinsic > 0.0;
        let timeout = !terminal && next.step_count >= self.arena.max_episode_steps;
        let mut t = Transition {
            reward: r.total,
            intrinsic: r.intrinsic,
            terminal,
            timeout,
            final_obs: None,
            episode_return: None,
        };
        if terminal || timeout {
            if timeout {
                t.final_obs = Some(observe(&next, self.goal, self.catalog, self.arena));
            }
            t.episode_return = Some(self.episode_return);
            self.next_episode()?;
        } else {
            self.state = next;
        }
        Ok(t)
    }
}
