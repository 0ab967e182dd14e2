use std::collections::BTreeMap;

use rand::Rng;

use crate::rng::StreamRng;

/// Replay durations `{2, 4, .., 2^ceil(log2 T)}`.
pub fn duration_grid(horizon: usize) -> Vec<usize> {
    let top = if horizon <= 1 {
        0
    } else {
        usize::BITS - (horizon - 1).leading_zeros()
    };
    (1..=top).map(|j| 1usize << j).collect()
}

/// Probability that a replay of duration `m` is scheduled `offset` rounds
/// after the episode start.
pub fn fire_probability(duration: usize, offset: usize) -> f64 {
    (1.0 / ((duration * offset) as f64).sqrt()).min(1.0)
}

#[derive(Debug, Clone)]
enum Source {
    Random(Box<StreamRng>),
    Scripted(BTreeMap<usize, Vec<usize>>),
}

/// The Bernoulli replay schedule `B_{s,m}` of one episode, sampled lazily:
/// each round is drawn once, when it is first reached.
#[derive(Debug, Clone)]
pub struct ReplaySchedule {
    episode_start: usize,
    grid: Vec<usize>,
    source: Source,
}

impl ReplaySchedule {
    pub fn new(horizon: usize, episode_start: usize, rng: StreamRng) -> Self {
        ReplaySchedule {
            episode_start,
            grid: duration_grid(horizon),
            source: Source::Random(Box::new(rng)),
        }
    }

    /// A schedule that fires exactly the listed durations at the listed rounds.
    pub fn scripted(
        horizon: usize,
        episode_start: usize,
        fired: BTreeMap<usize, Vec<usize>>,
    ) -> Self {
        ReplaySchedule {
            episode_start,
            grid: duration_grid(horizon),
            source: Source::Scripted(fired),
        }
    }

    pub fn episode_start(&self) -> usize {
        self.episode_start
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    /// Durations `m` with `B_{round,m} = 1`, in increasing order.
    pub fn fired(&mut self, round: usize) -> Vec<usize> {
        if round <= self.episode_start {
            return Vec::new();
        }
        let offset = round - self.episode_start;
        match &mut self.source {
            Source::Random(rng) => self
                .grid
                .iter()
                .copied()
                .filter(|&m| rng.random::<f64>() < fire_probability(m, offset))
                .collect(),
            Source::Scripted(map) => {
                let mut v = map.get(&round).cloned().unwrap_or_default();
                v.sort_unstable();
                v
            }
        }
    }

    /// The longest replay scheduled at `round`, if any.
    pub fn longest_fired(&mut self, round: usize) -> Option<usize> {
        self.fired(round).last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        assert!(duration_grid(1).is_empty());
        assert_eq!(duration_grid(2), vec![2]);
        assert_eq!(duration_grid(8), vec![2, 4, 8]);
        assert_eq!(duration_grid(9), vec![2, 4, 8, 16]);
        assert_eq!(*duration_grid(4096).last().unwrap(), 4096);
    }

    #[test]
    fn probability_is_clipped() {
        assert_eq!(fire_probability(2, 1), 1.0 / 2f64.sqrt());
        assert!((fire_probability(8, 2) - 0.25).abs() < 1e-15);
        assert_eq!(fire_probability(1, 1), 1.0);
    }

    #[test]
    fn scripted_takes_largest() {
        let mut s = ReplaySchedule::scripted(64, 1, BTreeMap::from([(5, vec![8, 2])]));
        assert_eq!(s.longest_fired(5), Some(8));
        assert_eq!(s.longest_fired(6), None);
    }
}
