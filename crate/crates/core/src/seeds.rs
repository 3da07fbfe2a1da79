//! Per-subsystem seed derivation.
//!
//! A subsystem seed is `splitmix64(master ^ tag)`, i.e. the first output of
//! the generator seeded with `master ^ tag`. Each subsystem owns a distinct
//! tag, so adding a new one never perturbs the existing streams.

use crate::rng::derive;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Subsystem {
    Environment = 0x454E_5649_524F_4E00,
    PolicyInit = 0x504F_4C49_4359_0000,
    Actions = 0x4143_5449_4F4E_5300,
    Selection = 0x5345_4C45_4354_0000,
    Update = 0x5550_4441_5445_0000,
    Evaluation = 0x4556_414C_0000_0000,
    Dataset = 0x4441_5441_5345_5400,
    Split = 0x5350_4C49_5400_0000,
    Classifier = 0x434C_4153_5349_4600,
}

impl Subsystem {
    pub const ALL: [Subsystem; 9] = [
        Subsystem::Environment,
        Subsystem::PolicyInit,
        Subsystem::Actions,
        Subsystem::Selection,
        Subsystem::Update,
        Subsystem::Evaluation,
        Subsystem::Dataset,
        Subsystem::Split,
        Subsystem::Classifier,
    ];

    pub fn tag(self) -> u64 {
        self as u64
    }
}

pub fn subsystem_seed(master: u64, subsystem: Subsystem) -> u64 {
    derive(master ^ subsystem.tag(), 0)
}
