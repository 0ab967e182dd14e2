//! Reference policies that are given the ground truth, plus a uniform control.

use std::sync::Arc;

use rand::Rng;

use crate::arms::ArmSet;
use crate::env::RewardModel;
use crate::error::{Error, Result};
use crate::ground_truth::PhaseAnnotation;
use crate::policy::{Policy, Turn};
use crate::rng::{Purpose, StreamKey, StreamRng};

/// Per-round arm sets `S_t`, validated against a phase annotation:
/// non-empty, `S_t ⊆ G_t`, and non-increasing inside each phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSetSequence {
    num_arms: usize,
    sets: Vec<ArmSet>,
}

impl SafeSetSequence {
    pub fn new(sets: Vec<ArmSet>, annotation: &PhaseAnnotation) -> Result<Self> {
        if sets.len() != annotation.horizon {
            return Err(Error::Validation(format!(
                "{} sets for horizon {}",
                sets.len(),
                annotation.horizon
            )));
        }
        for (i, &set) in sets.iter().enumerate() {
            let t = i + 1;
            if set.is_empty() {
                return Err(Error::Validation(format!("S_{t} is empty")));
            }
            let safe = annotation.safe_set(t);
            if !set.is_subset(safe) {
                return Err(Error::Validation(format!(
                    "S_{t} = {set:?} is not contained in the safe set {safe:?}"
                )));
            }
            if t > 1
                && annotation.phase_of(t) == annotation.phase_of(t - 1)
                && !set.is_subset(sets[i - 1])
            {
                return Err(Error::Validation(format!(
                    "S_{t} = {set:?} grows inside a phase (S_{} = {:?})",
                    t - 1,
                    sets[i - 1]
                )));
            }
        }
        Ok(SafeSetSequence {
            num_arms: annotation.num_arms,
            sets,
        })
    }

    /// `S_t = G_t`.
    pub fn safe_sets(annotation: &PhaseAnnotation) -> Self {
        SafeSetSequence {
            num_arms: annotation.num_arms,
            sets: (1..=annotation.horizon)
                .map(|t| annotation.safe_set(t))
                .collect(),
        }
    }

    /// `S_t = {last safe arm of the current phase}`.
    pub fn last_safe(annotation: &PhaseAnnotation) -> Self {
        SafeSetSequence {
            num_arms: annotation.num_arms,
            sets: (1..=annotation.horizon)
                .map(|t| ArmSet::singleton(annotation.last_safe_arm_at(t)))
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    pub fn get(&self, t: usize) -> ArmSet {
        self.sets[t - 1]
    }
}

/// Plays uniformly from `S_t` each round.
#[derive(Debug, Clone)]
pub struct SetSequencePolicy {
    sets: Arc<SafeSetSequence>,
    t: usize,
    rng: StreamRng,
    turn: Turn,
}

impl SetSequencePolicy {
    pub fn new(sets: Arc<SafeSetSequence>, seed: StreamKey) -> Self {
        SetSequencePolicy {
            sets,
            t: 1,
            rng: StreamKey::new(seed.seed, seed.trial, Purpose::ArmSelection).rng(),
            turn: Turn::default(),
        }
    }
}

impl Policy for SetSequencePolicy {
    fn num_arms(&self) -> usize {
        self.sets.num_arms
    }

    fn select(&mut self) -> Result<usize> {
        self.turn.ensure_idle()?;
        if self.t > self.sets.horizon() {
            return Err(Error::EndOfHorizon);
        }
        let set = self.sets.get(self.t);
        let arm = set
            .nth(self.rng.random_range(0..set.len()))
            .expect("non-empty set");
        self.turn.begin(arm)
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.turn.finish(arm, reward)?;
        self.t += 1;
        Ok(())
    }
}

/// Uniform play over the safe sets `G_t` of `annotation`, which must have been
/// computed from `model`.
pub fn oracle_policy(
    annotation: &PhaseAnnotation,
    model: &RewardModel,
    seed: StreamKey,
) -> Result<SetSequencePolicy> {
    annotation.ensure_matches(model)?;
    Ok(SetSequencePolicy::new(
        Arc::new(SafeSetSequence::safe_sets(annotation)),
        seed,
    ))
}

/// Deterministic play of the last safe arm of each phase.
pub fn safe_singleton_policy(
    annotation: &PhaseAnnotation,
    model: &RewardModel,
    seed: StreamKey,
) -> Result<SetSequencePolicy> {
    annotation.ensure_matches(model)?;
    Ok(SetSequencePolicy::new(
        Arc::new(SafeSetSequence::last_safe(annotation)),
        seed,
    ))
}

/// Uniform over all arms, forever.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    num_arms: usize,
    rng: StreamRng,
    turn: Turn,
}

impl UniformPolicy {
    pub fn new(num_arms: usize, seed: StreamKey) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::range("K", num_arms, ">= 1"));
        }
        Ok(UniformPolicy {
            num_arms,
            rng: StreamKey::new(seed.seed, seed.trial, Purpose::ArmSelection).rng(),
            turn: Turn::default(),
        })
    }
}

impl Policy for UniformPolicy {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn select(&mut self) -> Result<usize> {
        self.turn.ensure_idle()?;
        let arm = self.rng.random_range(0..self.num_arms);
        self.turn.begin(arm)
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.turn.finish(arm, reward)
    }
}
