//! Importance-weighted gap statistics and the eviction test.
//!
//! Each round adds `w_t(b) = |A_t| * Y_t * 1{b played}` to arm `b`'s prefix
//! sum, so the summed estimator over `[s1, s2]` is a difference of two prefix
//! differences.

use serde::{Deserialize, Serialize};

use crate::arms::ArmSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdVariant {
    /// `ln(T) * sqrt(C0 * max(K d, K^2))`
    #[default]
    Main,
    /// `sqrt(C0 * max(K ln(T) d, K^2 ln(T)^2))`
    Remark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Every `s1` in the window.
    Exact,
    /// `s1 = s2 + 1 - 2^j` (j >= 1) plus the window start.
    #[default]
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvictionConfig {
    pub c0: f64,
    pub threshold: ThresholdVariant,
    pub scan: ScanMode,
}

impl Default for EvictionConfig {
    fn default() -> Self {
        EvictionConfig {
            c0: 4.0,
            threshold: ThresholdVariant::Main,
            scan: ScanMode::Dyadic,
        }
    }
}

impl EvictionConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(crate::Error::Config(format!(
                "c0 = {} must be positive",
                self.c0
            )));
        }
        Ok(())
    }

    /// Eviction threshold for an interval with `s2 - s1 = span`.
    pub fn threshold(&self, horizon: usize, num_arms: usize, span: usize) -> f64 {
        let log_t = (horizon as f64).ln();
        let k = num_arms as f64;
        let d = span as f64;
        match self.threshold {
            ThresholdVariant::Main => log_t * (self.c0 * (k * d).max(k * k)).sqrt(),
            ThresholdVariant::Remark => {
                (self.c0 * (k * log_t * d).max(k * k * log_t * log_t)).sqrt()
            }
        }
    }
}

/// Per-arm prefix sums of importance weights, `P(b, t)` for `t = 0..=rounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSums {
    num_arms: usize,
    data: Vec<f64>,
}

impl PrefixSums {
    pub fn new(num_arms: usize) -> Self {
        PrefixSums {
            num_arms,
            data: vec![0.0; num_arms],
        }
    }

    pub fn with_capacity(num_arms: usize, rounds: usize) -> Self {
        let mut data = Vec::with_capacity((rounds + 1) * num_arms);
        data.resize(num_arms, 0.0);
        PrefixSums { num_arms, data }
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// Rounds recorded so far.
    pub fn rounds(&self) -> usize {
        self.data.len() / self.num_arms - 1
    }

    /// Append a round in which `arm` was played with weight `weight`.
    pub fn push(&mut self, arm: usize, weight: f64) {
        let k = self.num_arms;
        let start = self.data.len() - k;
        self.data.extend_from_within(start..);
        let last = self.data.len() - k;
        self.data[last + arm] += weight;
    }

    /// `P(arm, t)`.
    pub fn get(&self, arm: usize, t: usize) -> f64 {
        self.data[t * self.num_arms + arm]
    }

    /// `sum_{t=s1}^{s2} w_t(arm)`.
    pub fn window(&self, arm: usize, s1: usize, s2: usize) -> f64 {
        self.get(arm, s2) - self.get(arm, s1 - 1)
    }
}

/// `sum_{t=s1}^{s2} hat delta_t(better, arm)`.
pub fn gap_estimate_sum(p: &PrefixSums, better: usize, arm: usize, s1: usize, s2: usize) -> f64 {
    debug_assert!(1 <= s1 && s1 <= s2);
    p.window(better, s1, s2) - p.window(arm, s1, s2)
}

/// Arms whose worst estimated gap over `[s1, s2]` exceeds `threshold`.
fn triggered_at(p: &PrefixSums, s1: usize, s2: usize, threshold: f64) -> ArmSet {
    let k = p.num_arms();
    let mut best = f64::NEG_INFINITY;
    for b in 0..k {
        best = best.max(p.window(b, s1, s2));
    }
    (0..k)
        .filter(|&a| best - p.window(a, s1, s2) > threshold)
        .collect()
}

/// Whether `arm` should be evicted at round `now` for the window starting at
/// `window_start`, checking every interval `[s1, now - 1]` with
/// `window_start <= s1 < now - 1`. Intervals ending earlier were checked in
/// earlier rounds.
pub fn eviction_trigger(
    p: &PrefixSums,
    arm: usize,
    window_start: usize,
    now: usize,
    horizon: usize,
    cfg: &EvictionConfig,
) -> bool {
    if now < 2 || window_start + 1 >= now {
        return false;
    }
    let s2 = now - 1;
    let k = p.num_arms();
    let hit = |s1: usize| {
        let thr = cfg.threshold(horizon, k, s2 - s1);
        (0..k).any(|b| gap_estimate_sum(p, b, arm, s1, s2) > thr)
    };
    match cfg.scan {
        ScanMode::Exact => (window_start..s2).any(hit),
        ScanMode::Dyadic => dyadic_starts(s2, window_start).any(hit) || hit(window_start),
    }
}

/// `s2 + 1 - 2^j` for `j >= 1`, down to `floor`.
fn dyadic_starts(s2: usize, floor: usize) -> impl Iterator<Item = usize> {
    (1..usize::BITS)
        .map(move |j| (s2 + 1).checked_sub(1usize << j))
        .take_while(move |s1| s1.is_some_and(|s| s >= floor && s >= 1))
        .map(Option::unwrap)
}

/// Evaluates the eviction test for several nested windows at once.
///
/// `starts` must be sorted in non-increasing order; the result holds, for each
/// start, the set of arms with a triggering interval ending at `now - 1`.
#[derive(Debug, Clone)]
pub(crate) struct WindowScanner {
    thresholds: Vec<f64>,
}

impl WindowScanner {
    pub(crate) fn new(horizon: usize, num_arms: usize, cfg: &EvictionConfig) -> Self {
        WindowScanner {
            thresholds: (0..=horizon.max(1))
                .map(|d| cfg.threshold(horizon, num_arms, d))
                .collect(),
        }
    }

    fn threshold(&self, span: usize) -> f64 {
        self.thresholds[span]
    }

    pub(crate) fn scan(
        &self,
        p: &PrefixSums,
        now: usize,
        starts: &[usize],
        mode: ScanMode,
        out: &mut Vec<ArmSet>,
    ) {
        out.clear();
        out.resize(starts.len(), ArmSet::EMPTY);
        if now < 2 {
            return;
        }
        let s2 = now - 1;
        let floor = match starts.last() {
            Some(&f) => f,
            None => return,
        };
        if floor >= s2 {
            return;
        }
        match mode {
            ScanMode::Exact => {
                let mut acc = ArmSet::EMPTY;
                let mut idx = 0;
                // skip windows with no interval
                while idx < starts.len() && starts[idx] >= s2 {
                    idx += 1;
                }
                let mut s1 = s2 - 1;
                loop {
                    acc = acc.union(triggered_at(p, s1, s2, self.threshold(s2 - s1)));
                    while idx < starts.len() && starts[idx] == s1 {
                        out[idx] = acc;
                        idx += 1;
                    }
                    if s1 == floor {
                        break;
                    }
                    s1 -= 1;
                }
            }
            ScanMode::Dyadic => {
                let mut acc = ArmSet::EMPTY;
                let mut idx = 0;
                while idx < starts.len() && starts[idx] >= s2 {
                    idx += 1;
                }
                let mut points = dyadic_starts(s2, floor).peekable();
                while idx < starts.len() {
                    let start = starts[idx];
                    while let Some(&s1) = points.peek() {
                        if s1 < start {
                            break;
                        }
                        acc = acc.union(triggered_at(p, s1, s2, self.threshold(s2 - s1)));
                        points.next();
                    }
                    let own = triggered_at(p, start, s2, self.threshold(s2 - start));
                    out[idx] = acc.union(own);
                    idx += 1;
                }
            }
        }
    }
}
