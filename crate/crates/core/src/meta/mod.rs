//! Elimination with randomized replays and restarts.
//!
//! An episode starts with every arm in the master set and a single base frame
//! spanning the rest of the horizon. At every round a Bernoulli schedule may
//! start a replay: a child frame that resets its candidate set to all arms for
//! a fixed duration. Only the top frame selects arms. Frames evict arms whose
//! importance-weighted gap to some other arm exceeds the threshold over an
//! interval inside the frame; any eviction also removes the arm from the
//! master set, and an empty master set starts a new episode.
//!
//! Child frames are kept on an explicit stack instead of recursing, because a
//! child may outlive its parent's scheduled duration.

mod doubling;
pub mod eviction;
pub mod schedule;

use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::arms::{ArmSet, MAX_ARMS};
use crate::error::{Error, Result};
use crate::policy::{check_reward, Event, EventKind, Policy};
use crate::rng::{Purpose, StreamKey, StreamRng};

pub use doubling::DoublingMeta;
pub use eviction::{
    eviction_trigger, gap_estimate_sum, EvictionConfig, PrefixSums, ScanMode, ThresholdVariant,
};
pub use schedule::{duration_grid, fire_probability, ReplaySchedule};

use eviction::WindowScanner;

/// One running base-algorithm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub start: usize,
    pub duration: usize,
    /// Candidate set `A_t` while this frame is selecting.
    pub active: ArmSet,
    /// `A_current`, saved each round this frame plays.
    pub saved: ArmSet,
    /// Arms with a triggering interval inside `[start, t)`.
    flagged: ArmSet,
    reported: ArmSet,
}

impl Frame {
    fn new(start: usize, duration: usize, num_arms: usize) -> Self {
        let all = ArmSet::full(num_arms);
        Frame {
            start,
            duration,
            active: all,
            saved: all,
            flagged: ArmSet::EMPTY,
            reported: ArmSet::EMPTY,
        }
    }

    fn expired(&self, t: usize) -> bool {
        t > self.start + self.duration
    }
}

/// What the policy saw each round; needed for offline diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetaHistory {
    /// Candidate set from which round `t` was drawn (index `t - 1`).
    pub active: Vec<ArmSet>,
    /// Arm played in round `t` (index `t - 1`).
    pub arms: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetaStats {
    pub episodes: usize,
    pub replays: usize,
    /// `(duration, count)` pairs, ascending by duration.
    pub replays_by_duration: Vec<(usize, usize)>,
}

/// The adaptive restart policy for a known horizon.
#[derive(Debug, Clone)]
pub struct MetaPolicy {
    horizon: usize,
    num_arms: usize,
    cfg: EvictionConfig,
    seed: StreamKey,
    t: usize,
    episode: usize,
    episode_start: usize,
    master: ArmSet,
    master_flagged: ArmSet,
    frames: Vec<Frame>,
    prefix: PrefixSums,
    schedule: ReplaySchedule,
    select_rng: StreamRng,
    scanner: WindowScanner,
    pending: Option<(usize, usize)>,
    events: Vec<Event>,
    history: Option<MetaHistory>,
    stats: MetaStats,
    starts_buf: Vec<usize>,
    flags_buf: Vec<ArmSet>,
}

impl MetaPolicy {
    /// `seed` keys the selection and schedule streams; its `purpose` is
    /// ignored.
    pub fn new(
        horizon: usize,
        num_arms: usize,
        cfg: EvictionConfig,
        seed: StreamKey,
    ) -> Result<Self> {
        cfg.validate()?;
        if horizon == 0 {
            return Err(Error::range("T", horizon, ">= 1"));
        }
        if num_arms == 0 || num_arms > MAX_ARMS {
            return Err(Error::range("K", num_arms, format!("1..={MAX_ARMS}")));
        }
        let schedule_key = StreamKey::new(seed.seed, seed.trial, Purpose::ReplaySchedule);
        let mut policy = MetaPolicy {
            horizon,
            num_arms,
            cfg,
            seed,
            t: 1,
            episode: 0,
            episode_start: 1,
            master: ArmSet::full(num_arms),
            master_flagged: ArmSet::EMPTY,
            frames: Vec::new(),
            prefix: PrefixSums::with_capacity(num_arms, horizon),
            schedule: ReplaySchedule::new(horizon, 1, schedule_key.child(0).rng()),
            select_rng: StreamKey::new(seed.seed, seed.trial, Purpose::ArmSelection).rng(),
            scanner: WindowScanner::new(horizon, num_arms, &cfg),
            pending: None,
            events: Vec::new(),
            history: None,
            stats: MetaStats::default(),
            starts_buf: Vec::new(),
            flags_buf: Vec::new(),
        };
        policy.new_episode();
        Ok(policy)
    }

    /// Keep per-round candidate sets for [`crate::harness::diagnostics_e1`].
    pub fn record_history(mut self) -> Self {
        self.history = Some(MetaHistory::default());
        self
    }

    /// Start an episode at the current round.
    pub fn new_episode(&mut self) {
        self.episode += 1;
        self.episode_start = self.t;
        self.master = ArmSet::full(self.num_arms);
        self.master_flagged = ArmSet::EMPTY;
        let key = StreamKey::new(self.seed.seed, self.seed.trial, Purpose::ReplaySchedule)
            .child(self.episode as u64 - 1);
        self.schedule = ReplaySchedule::new(self.horizon, self.t, key.rng());
        self.frames.clear();
        self.frames
            .push(Frame::new(self.t, self.horizon + 1 - self.t, self.num_arms));
        self.stats.episodes += 1;
        self.events.push(Event {
            round: self.t,
            kind: EventKind::EpisodeStart {
                episode: self.episode,
            },
        });
    }

    /// Replace the current episode's replay schedule (e.g. a scripted one).
    pub fn set_schedule(&mut self, schedule: ReplaySchedule) {
        self.schedule = schedule;
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn config(&self) -> &EvictionConfig {
        &self.cfg
    }

    /// The next round to be played.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn episode_start(&self) -> usize {
        self.episode_start
    }

    pub fn master(&self) -> ArmSet {
        self.master
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn prefix_sums(&self) -> &PrefixSums {
        &self.prefix
    }

    pub fn history(&self) -> Option<&MetaHistory> {
        self.history.as_ref()
    }

    pub fn stats(&self) -> &MetaStats {
        &self.stats
    }

    fn top(&self) -> &Frame {
        self.frames.last().expect("episode running")
    }

    fn top_mut(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("episode running")
    }

    /// Flag arms with a triggering interval ending at `t - 1`, for the master
    /// window and every frame window.
    fn scan_windows(&mut self) {
        self.starts_buf.clear();
        self.starts_buf
            .extend(self.frames.iter().rev().map(|f| f.start));
        self.starts_buf.push(self.episode_start);
        self.scanner.scan(
            &self.prefix,
            self.t,
            &self.starts_buf,
            self.cfg.scan,
            &mut self.flags_buf,
        );
        let n = self.frames.len();
        for (i, frame) in self.frames.iter_mut().rev().enumerate() {
            frame.flagged = frame.flagged.union(self.flags_buf[i]);
        }
        self.master_flagged = self.master_flagged.union(self.flags_buf[n]);
    }

    fn push_replay(&mut self, duration: usize) {
        let depth = self.frames.len();
        self.frames
            .push(Frame::new(self.t, duration, self.num_arms));
        self.stats.replays += 1;
        match self
            .stats
            .replays_by_duration
            .binary_search_by_key(&duration, |&(d, _)| d)
        {
            Ok(i) => self.stats.replays_by_duration[i].1 += 1,
            Err(i) => self.stats.replays_by_duration.insert(i, (duration, 1)),
        }
        self.events.push(Event {
            round: self.t,
            kind: EventKind::ReplayStart { duration, depth },
        });
    }

    fn pop_frame(&mut self, early: bool) {
        let frame = self.frames.pop().expect("frame to pop");
        let depth = self.frames.len();
        if depth > 0 {
            self.events.push(Event {
                round: self.t,
                kind: EventKind::ReplayEnd {
                    start: frame.start,
                    duration: frame.duration,
                    depth,
                    early,
                },
            });
        }
    }

    /// Eviction and restart, run by the selecting frame after each round.
    /// Returns `true` if the master set became empty.
    fn evict(&mut self) -> bool {
        let t = self.t;
        let depth = self.frames.len() - 1;
        let top = self.top();
        let bad = self.master_flagged.union(top.flagged);
        let gone = self.master.intersection(bad);
        for arm in gone.iter() {
            self.events.push(Event {
                round: t,
                kind: EventKind::EvictMaster { arm },
            });
        }
        self.master = self.master.difference(gone);

        let top = self.top_mut();
        top.active = top.saved.difference(top.flagged);
        let newly = top.saved.intersection(top.flagged).difference(top.reported);
        top.reported = top.reported.union(newly);
        let frame_start = top.start;
        for arm in newly.iter() {
            self.events.push(Event {
                round: t,
                kind: EventKind::EvictFrame {
                    arm,
                    depth,
                    frame_start,
                },
            });
        }
        self.master.is_empty()
    }

    fn restart(&mut self) {
        self.events.push(Event {
            round: self.t,
            kind: EventKind::Restart {
                episode: self.episode,
            },
        });
        while !self.frames.is_empty() {
            self.pop_frame(true);
        }
        if self.t <= self.horizon {
            self.new_episode();
        }
    }

    /// Arm selection for the current round; draws uniformly from the top
    /// frame's candidate set.
    pub fn select_arm(&mut self) -> Result<usize> {
        if self.pending.is_some() {
            return Err(Error::Usage("select called twice without observe".into()));
        }
        if self.t > self.horizon || self.frames.is_empty() {
            return Err(Error::EndOfHorizon);
        }
        let active = self.top().active;
        if active.is_empty() {
            return Err(Error::Internal(format!(
                "empty candidate set at round {}",
                self.t
            )));
        }
        let idx = self.select_rng.random_range(0..active.len());
        let arm = active.nth(idx).expect("index within set");
        self.pending = Some((arm, active.len()));
        if let Some(h) = &mut self.history {
            h.active.push(active);
            h.arms.push(arm);
        }
        Ok(arm)
    }

    /// Record the reward of the selected arm and advance one round.
    pub fn observe_reward(&mut self, arm: usize, reward: f64) -> Result<()> {
        let (expected, size) = self
            .pending
            .ok_or_else(|| Error::Usage("observe called without a pending select".into()))?;
        if arm != expected {
            return Err(Error::Usage(format!(
                "observe reports arm {arm} but arm {expected} was selected"
            )));
        }
        check_reward(reward)?;
        self.pending = None;

        self.prefix.push(arm, size as f64 * reward);
        let top = self.top_mut();
        top.saved = top.active;
        self.t += 1;
        self.scan_windows();

        if self.t <= self.horizon {
            if let Some(m) = self.schedule.longest_fired(self.t) {
                self.push_replay(m);
                return Ok(());
            }
        }

        loop {
            if self.frames.is_empty() {
                break;
            }
            if self.top().expired(self.t) {
                self.pop_frame(false);
                continue;
            }
            if self.evict() {
                self.restart();
                break;
            }
            if self.top().active.is_empty() {
                self.pop_frame(true);
                if self.frames.is_empty() {
                    self.restart();
                    break;
                }
                continue;
            }
            break;
        }
        Ok(())
    }
}

impl Policy for MetaPolicy {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn select(&mut self) -> Result<usize> {
        self.select_arm()
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.observe_reward(arm, reward)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}

/// A restart whose episode did not evict every arm from the master set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartViolation {
    pub episode_start: usize,
    pub restart_round: usize,
    pub missing_arms: Vec<usize>,
}

/// Check that every logged restart was preceded, within its episode, by the
/// eviction of all `num_arms` arms from the master set.
pub fn audit_restarts(events: &[Event], num_arms: usize) -> Vec<RestartViolation> {
    let mut violations = Vec::new();
    let mut evicted = ArmSet::EMPTY;
    let mut start = 1;
    for e in events {
        match e.kind {
            EventKind::EpisodeStart { .. } => {
                evicted = ArmSet::EMPTY;
                start = e.round;
            }
            EventKind::EvictMaster { arm } => evicted.insert(arm),
            EventKind::Restart { .. } => {
                let missing = ArmSet::full(num_arms).difference(evicted);
                if !missing.is_empty() {
                    violations.push(RestartViolation {
                        episode_start: start,
                        restart_round: e.round,
                        missing_arms: missing.iter().collect(),
                    });
                }
            }
            _ => {}
        }
    }
    violations
}

/// Rounds at which restarts happened.
pub fn restart_rounds(events: &[Event]) -> Vec<usize> {
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Restart { .. }))
        .map(|e| e.round)
        .collect()
}
