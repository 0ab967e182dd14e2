use crate::error::{Error, Result};
use crate::policy::{Event, Policy};
use crate::rng::StreamKey;

use super::{EvictionConfig, MetaPolicy};

/// Horizon-free wrapper: epoch `k = 1, 2, ..` runs a fresh [`MetaPolicy`] with
/// horizon `2^k` over global rounds `[2^k - 1, 2^{k+1} - 2]`.
#[derive(Debug, Clone)]
pub struct DoublingMeta {
    num_arms: usize,
    cfg: EvictionConfig,
    seed: StreamKey,
    epoch: u32,
    /// Global rounds completed before the current epoch.
    offset: usize,
    inner: MetaPolicy,
    horizons: Vec<usize>,
    events: Vec<Event>,
}

impl DoublingMeta {
    pub fn new(num_arms: usize, cfg: EvictionConfig, seed: StreamKey) -> Result<Self> {
        let inner = MetaPolicy::new(2, num_arms, cfg, seed.child(1))?;
        Ok(DoublingMeta {
            num_arms,
            cfg,
            seed,
            epoch: 1,
            offset: 0,
            inner,
            horizons: vec![2],
            events: Vec::new(),
        })
    }

    /// Horizon of the instance currently playing.
    pub fn current_horizon(&self) -> usize {
        self.inner.horizon()
    }

    /// Horizons of every instance created so far.
    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    /// Next global round to be played.
    pub fn round(&self) -> usize {
        self.offset + self.inner.round()
    }

    pub fn inner(&self) -> &MetaPolicy {
        &self.inner
    }

    fn collect_inner_events(&mut self) {
        let offset = self.offset;
        self.events
            .extend(self.inner.drain_events().into_iter().map(|mut e| {
                e.round += offset;
                e
            }));
    }

    fn advance_epoch(&mut self) -> Result<()> {
        if self.epoch + 2 >= usize::BITS {
            return Err(Error::Numeric("doubling epochs overflow usize".into()));
        }
        self.collect_inner_events();
        self.offset += self.inner.horizon();
        self.epoch += 1;
        let horizon = 1usize << self.epoch;
        self.inner = MetaPolicy::new(
            horizon,
            self.num_arms,
            self.cfg,
            self.seed.child(self.epoch as u64),
        )?;
        self.horizons.push(horizon);
        Ok(())
    }
}

impl Policy for DoublingMeta {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn select(&mut self) -> Result<usize> {
        if self.inner.round() > self.inner.horizon() {
            self.advance_epoch()?;
        }
        self.inner.select_arm()
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.inner.observe_reward(arm, reward)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        self.collect_inner_events();
        std::mem::take(&mut self.events)
    }
}
