//! Question-guided curiosity for sparse-reward reinforcement learning.
//!
//! A kinematic arena of colored balls, a templated spatial-question catalog
//! with a ground-truth oracle, a from-scratch network toolkit, a relevance
//! classifier that scores which questions a single push can flip, the
//! answer-flip intrinsic reward, and a PPO trainer tying them together.
//!
//! The crate is `no_std` and only needs `alloc`. Everything is a pure
//! function of its inputs and a `u64` seed; randomness comes exclusively
//! from [`rng::SplitMix64`].

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod error;
pub mod nn;
pub mod questions;
pub mod reward;
pub mod rl;
pub mod rng;
pub mod seeds;
pub mod world;

pub use error::{Error, Result};
