//! Structural quantities computed from the true means: significant shifts,
//! safe-arm sets, total variation, best-arm switches and the regret
//! yardsticks built from them.
//!
//! Arm `a` has *significant regret* on `[s1, s2]` (with `s1 < s2`) when
//! `sum_{t=s1}^{s2} delta_t(a) >= sqrt(K * (s2 - s1))`, where
//! `delta_t(a) = max_b mu_t(b) - mu_t(a)`. A significant shift is recorded at
//! the first round by which every arm has had significant regret on some
//! interval inside the current phase.

use serde::{Deserialize, Serialize};

use crate::arms::ArmSet;
use crate::env::RewardModel;
use crate::error::{Error, Result};

/// Default cap on `T` for the exact `O(T^2 K)` scan.
pub const DEFAULT_ROUND_CAP: usize = 20_000;

/// Ground-truth phase structure. Rounds are 1-based, arms 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnnotation {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub num_arms: usize,
    /// `[1, tau_1, .., tau_L, T + 1]`.
    pub tau: Vec<usize>,
    /// Last arm to trigger in each phase (smallest index on ties).
    pub last_safe_arm: Vec<usize>,
    /// `first_trigger[i][a]`: the round at which arm `a` first has
    /// significant regret inside phase `i`, or `T + 1`.
    pub first_trigger: Vec<Vec<usize>>,
    /// Fingerprint of the model this annotation was computed from.
    pub model_fingerprint: String,
}

impl PhaseAnnotation {
    /// Number of significant shifts `L`.
    pub fn num_shifts(&self) -> usize {
        self.tau.len() - 2
    }

    pub fn num_phases(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn phase_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.tau.windows(2).map(|w| w[1] - w[0])
    }

    /// Index of the phase containing round `t`.
    pub fn phase_of(&self, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.horizon);
        self.tau.partition_point(|&start| start <= t) - 1
    }

    /// Safe arms `G_t`.
    pub fn safe_set(&self, t: usize) -> ArmSet {
        let phase = self.phase_of(t);
        self.first_trigger[phase]
            .iter()
            .enumerate()
            .filter(|&(_, &e)| e > t)
            .map(|(a, _)| a)
            .collect()
    }

    /// Last safe arm of the phase containing `t`.
    pub fn last_safe_arm_at(&self, t: usize) -> usize {
        self.last_safe_arm[self.phase_of(t)]
    }

    /// Check that the annotation was computed from `model`.
    pub fn ensure_matches(&self, model: &RewardModel) -> Result<()> {
        if self.horizon != model.horizon()
            || self.num_arms != model.num_arms()
            || self.model_fingerprint != model.fingerprint()
        {
            return Err(Error::Usage(
                "phase annotation was computed for a different environment".into(),
            ));
        }
        Ok(())
    }
}

/// `delta_t(a)` for every round, starting at `from`.
fn worst_gaps(model: &RewardModel, from: usize, arm: usize) -> impl Iterator<Item = f64> + '_ {
    (from..=model.horizon()).map(move |t| {
        let row = model.row(t);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best - row[arm]
    })
}

/// First round `s2 in (phase_start, T]` such that `arm` has significant
/// regret on some `[s1, s2]` with `phase_start <= s1 < s2`.
pub fn significant_regret_trigger(
    model: &RewardModel,
    phase_start: usize,
    arm: usize,
) -> Option<usize> {
    let horizon = model.horizon();
    if phase_start == 0 || phase_start > horizon || arm >= model.num_arms() {
        return None;
    }
    let k = model.num_arms() as f64;
    // prefix[j] = sum of gaps over rounds phase_start .. phase_start + j - 1
    let mut prefix = Vec::with_capacity(horizon - phase_start + 2);
    prefix.push(0.0);
    let mut acc = 0.0;
    for gap in worst_gaps(model, phase_start, arm) {
        acc += gap;
        prefix.push(acc);
    }
    if acc <= 0.0 {
        return None;
    }
    for j2 in 1..prefix.len() - 1 {
        // s2 = phase_start + j2, s1 = phase_start + j1
        let end = prefix[j2 + 1];
        let hit = (0..j2).any(|j1| end - prefix[j1] >= (k * (j2 - j1) as f64).sqrt());
        if hit {
            return Some(phase_start + j2);
        }
    }
    None
}

/// Significant shifts of `model` with the default round cap.
pub fn compute_significant_shifts(model: &RewardModel) -> Result<PhaseAnnotation> {
    compute_significant_shifts_capped(model, DEFAULT_ROUND_CAP)
}

pub fn compute_significant_shifts_capped(
    model: &RewardModel,
    round_cap: usize,
) -> Result<PhaseAnnotation> {
    let horizon = model.horizon();
    if horizon > round_cap {
        return Err(Error::Resource {
            cap: round_cap,
            requested: horizon,
        });
    }
    let num_arms = model.num_arms();
    let never = horizon + 1;

    let mut tau = vec![1];
    let mut last_safe_arm = Vec::new();
    let mut first_trigger = Vec::new();
    loop {
        let start = *tau.last().unwrap();
        let triggers: Vec<usize> = (0..num_arms)
            .map(|a| significant_regret_trigger(model, start, a).unwrap_or(never))
            .collect();
        let (arm, &latest) = triggers
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|&(_, e)| *e)
            .expect("at least one arm");
        last_safe_arm.push(arm);
        first_trigger.push(triggers.clone());
        if latest == never {
            tau.push(never);
            break;
        }
        tau.push(latest);
    }

    Ok(PhaseAnnotation {
        horizon,
        num_arms,
        tau,
        last_safe_arm,
        first_trigger,
        model_fingerprint: model.fingerprint(),
    })
}

/// `V = sum_{t=2}^T max_a |mu_t(a) - mu_{t-1}(a)|`.
pub fn compute_total_variation(model: &RewardModel) -> f64 {
    model
        .rows()
        .zip(model.rows().skip(1))
        .map(|(prev, cur)| {
            prev.iter()
                .zip(cur)
                .map(|(p, c)| (c - p).abs())
                .fold(0.0, f64::max)
        })
        .sum()
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &m) in row.iter().enumerate() {
        if m > row[best] {
            best = a;
        }
    }
    best
}

/// Number of rounds `t >= 2` where the best arm (smallest index on ties)
/// differs from round `t - 1`.
pub fn count_best_arm_switches(model: &RewardModel) -> usize {
    let best: Vec<usize> = model.rows().map(argmax_first).collect();
    best.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of rounds `t >= 2` where any mean changes.
pub fn count_change_rounds(model: &RewardModel) -> usize {
    model
        .rows()
        .zip(model.rows().skip(1))
        .filter(|(p, c)| p != c)
        .count()
}

/// Regret yardsticks, without log factors or constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    /// `sum_i sqrt(K (tau_{i+1} - tau_i))`.
    pub sum_sqrt: f64,
    /// `sqrt((L + 1) K T)`.
    pub jensen_bound: f64,
    /// `sqrt(K T) + (2 K V)^{1/3} T^{2/3}`.
    pub tv_bound: f64,
}

pub fn theoretical_bounds(annotation: &PhaseAnnotation, total_variation: f64) -> TheoreticalBounds {
    let k = annotation.num_arms as f64;
    let t = annotation.horizon as f64;
    let sum_sqrt = annotation
        .phase_lengths()
        .map(|len| (k * len as f64).sqrt())
        .sum();
    TheoreticalBounds {
        sum_sqrt,
        jensen_bound: ((annotation.num_phases() as f64) * k * t).sqrt(),
        tv_bound: (k * t).sqrt() + (2.0 * k * total_variation).cbrt() * t.powf(2.0 / 3.0),
    }
}

/// Everything the `ground-truth` subcommand reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub tau: Vec<usize>,
    #[serde(rename = "L")]
    pub num_shifts: usize,
    pub last_safe_arm: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_trigger: Option<Vec<Vec<usize>>>,
    #[serde(rename = "S")]
    pub best_arm_switches: usize,
    #[serde(rename = "V")]
    pub total_variation: f64,
    pub change_rounds: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub num_arms: usize,
    pub bounds: TheoreticalBounds,
    pub model_fingerprint: String,
}

impl GroundTruthReport {
    pub fn compute(model: &RewardModel, round_cap: usize, with_triggers: bool) -> Result<Self> {
        let ann = compute_significant_shifts_capped(model, round_cap)?;
        Ok(Self::from_annotation(model, &ann, with_triggers))
    }

    pub fn from_annotation(
        model: &RewardModel,
        ann: &PhaseAnnotation,
        with_triggers: bool,
    ) -> Self {
        let v = compute_total_variation(model);
        GroundTruthReport {
            tau: ann.tau.clone(),
            num_shifts: ann.num_shifts(),
            last_safe_arm: ann.last_safe_arm.clone(),
            first_trigger: with_triggers.then(|| ann.first_trigger.clone()),
            best_arm_switches: count_best_arm_switches(model),
            total_variation: v,
            change_rounds: count_change_rounds(model),
            horizon: model.horizon(),
            num_arms: model.num_arms(),
            bounds: theoretical_bounds(ann, v),
            model_fingerprint: ann.model_fingerprint.clone(),
        }
    }
}
