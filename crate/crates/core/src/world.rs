//! Kinematic tabletop arena.
//!
//! Colored balls sit on a bounded square plane. An action pushes one ball a
//! fixed distance in one of eight compass directions; the moved ball is
//! clamped to the walls and passes through the others. The goal of an
//! episode is a catalog question that must come to answer "yes".

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, Error, Result};
use crate::questions::{answer, QuestionCatalog};
use crate::rng::SplitMix64;

pub const NUM_DIRECTIONS: usize = 8;

/// Consecutive rejected placements after which `reset` gives up.
pub const MAX_PLACEMENT_REJECTIONS: usize = 10_000;

const D: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Unit vectors for direction `d`, at `45° * d` counterclockwise from +x.
pub const DIRECTIONS: [(f64, f64); NUM_DIRECTIONS] = [
    (1.0, 0.0),
    (D, D),
    (0.0, 1.0),
    (-D, D),
    (-1.0, 0.0),
    (-D, -D),
    (0.0, -1.0),
    (D, -D),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ArenaConfig {
    pub half_extent: f64,
    /// Only used to keep balls apart at reset.
    pub object_radius: f64,
    pub push_distance: f64,
    pub num_objects: usize,
    pub max_episode_steps: usize,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            half_extent: 1.0,
            object_radius: 0.1,
            push_distance: 0.15,
            num_objects: 5,
            max_episode_steps: 50,
        }
    }
}

impl ArenaConfig {
    /// Geometry checks. The lower bound of two objects is enforced where a
    /// catalog is attached, see [`ArenaConfig::validate_with_catalog`].
    pub fn validate(&self) -> Result<()> {
        let h = self.half_extent;
        if !(h.is_finite() && h > 0.0) {
            return Err(config_err("arena.half_extent must be > 0"));
        }
        let r = self.object_radius;
        if !(r > 0.0 && r < h) {
            return Err(config_err("arena.object_radius must lie in (0, half_extent)"));
        }
        let p = self.push_distance;
        if !(p > 0.0 && p < 2.0 * h) {
            return Err(config_err("arena.push_distance must lie in (0, 2*half_extent)"));
        }
        if self.num_objects == 0 {
            return Err(config_err("arena.num_objects must be >= 1"));
        }
        if self.max_episode_steps == 0 {
            return Err(config_err("arena.max_episode_steps must be >= 1"));
        }
        Ok(())
    }

    pub fn validate_with_catalog(&self, catalog: &QuestionCatalog) -> Result<()> {
        self.validate()?;
        if self.num_objects < 2 || self.num_objects > catalog.num_colors() {
            return Err(config_err(alloc::format!(
                "arena.num_objects must lie in [2, {}] for this palette",
                catalog.num_colors()
            )));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        self.num_objects * NUM_DIRECTIONS
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub positions: Vec<[f64; 2]>,
    /// `color_ids[o]` is the color of object `o`.
    pub color_ids: Vec<usize>,
    pub step_count: usize,
}

impl WorldState {
    pub fn num_objects(&self) -> usize {
        self.positions.len()
    }

    /// Position of the first object carrying `color`.
    pub fn position_of(&self, color: usize) -> Option<[f64; 2]> {
        self.color_ids
            .iter()
            .position(|&c| c == color)
            .map(|o| self.positions[o])
    }

    /// Positions in color-index order, each coordinate divided by `half_extent`.
    pub fn normalized_features(&self, half_extent: f64) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.num_objects()];
        self.write_normalized_features(half_extent, &mut out);
        out
    }

    fn write_normalized_features(&self, half_extent: f64, out: &mut [f64]) {
        for (o, &c) in self.color_ids.iter().enumerate() {
            out[2 * c] = self.positions[o][0] / half_extent;
            out[2 * c + 1] = self.positions[o][1] / half_extent;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Goal {
    pub question_index: usize,
}

pub fn reset(config: &ArenaConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let lo = -config.half_extent + config.object_radius;
    let hi = config.half_extent - config.object_radius;
    let min_sep = 2.0 * config.object_radius;
    let mut rng = SplitMix64::new(seed);
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(config.num_objects);
    while positions.len() < config.num_objects {
        let mut rejections = 0;
        loop {
            let x = rng.uniform(lo, hi);
            let y = rng.uniform(lo, hi);
            let clear = positions
                .iter()
                .all(|p| libm::hypot(p[0] - x, p[1] - y) >= min_sep);
            if clear {
                positions.push([x, y]);
                break;
            }
            rejections += 1;
            if rejections == MAX_PLACEMENT_REJECTIONS {
                return Err(config_err(alloc::format!(
                    "could not place object {} after {MAX_PLACEMENT_REJECTIONS} attempts",
                    positions.len()
                )));
            }
        }
    }
    Ok(WorldState {
        positions,
        color_ids: (0..config.num_objects).collect(),
        step_count: 0,
    })
}

/// Splits an action into `(object index, direction index)`.
pub fn decode_action(action: ActionId, config: &ArenaConfig) -> Result<(usize, usize)> {
    let num_actions = config.num_actions();
    if action.0 >= num_actions {
        return Err(Error::InvalidAction {
            action: action.0,
            num_actions,
        });
    }
    Ok((action.0 / NUM_DIRECTIONS, action.0 % NUM_DIRECTIONS))
}

pub fn step(state: &WorldState, action: ActionId, config: &ArenaConfig) -> Result<WorldState> {
    let mut next = state.clone();
    step_in_place(&mut next, action, config)?;
    Ok(next)
}

pub(crate) fn step_in_place(
    state: &mut WorldState,
    action: ActionId,
    config: &ArenaConfig,
) -> Result<()> {
    let (object, direction) = decode_action(action, config)?;
    if object >= state.num_objects() {
        return Err(Error::InvalidAction {
            action: action.0,
            num_actions: state.num_objects() * NUM_DIRECTIONS,
        });
    }
    let (dx, dy) = DIRECTIONS[direction];
    let h = config.half_extent;
    let p = &mut state.positions[object];
    p[0] = (p[0] + config.push_distance * dx).clamp(-h, h);
    p[1] = (p[1] + config.push_distance * dy).clamp(-h, h);
    state.step_count += 1;
    Ok(())
}

/// Policy input: normalized positions in color order, then a one-hot of the goal.
pub fn observe(
    state: &WorldState,
    goal: Goal,
    catalog: &QuestionCatalog,
    config: &ArenaConfig,
) -> Vec<f64> {
    let mut out = Vec::new();
    observe_into(state, goal, catalog, config, &mut out);
    out
}

pub fn observe_into(
    state: &WorldState,
    goal: Goal,
    catalog: &QuestionCatalog,
    config: &ArenaConfig,
    out: &mut Vec<f64>,
) {
    let n = state.num_objects();
    out.clear();
    out.resize(2 * n + catalog.len(), 0.0);
    state.write_normalized_features(config.half_extent, &mut out[..2 * n]);
    out[2 * n + goal.question_index] = 1.0;
}

pub fn check_success(state: &WorldState, goal: Goal, catalog: &QuestionCatalog) -> Result<bool> {
    answer(state, &catalog.questions()[goal.question_index])
}

/// Uniform over the catalog questions currently answered "no".
pub fn sample_goal(state: &WorldState, catalog: &QuestionCatalog, seed: u64) -> Result<Goal> {
    let mut open = Vec::new();
    for (i, q) in catalog.questions().iter().enumerate() {
        if !answer(state, q)? {
            open.push(i);
        }
    }
    if open.is_empty() {
        return Err(Error::Internal(
            "every catalog question already answers yes".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    Ok(Goal {
        question_index: open[rng.below(open.len())],
    })
}
