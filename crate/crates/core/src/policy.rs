//! The online protocol every policy follows: `select`, then `observe`, once
//! per round.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Something a policy logs about its internal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub round: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    EpisodeStart {
        episode: usize,
    },
    ReplayStart {
        duration: usize,
        depth: usize,
    },
    ReplayEnd {
        start: usize,
        duration: usize,
        depth: usize,
        early: bool,
    },
    EvictMaster {
        arm: usize,
    },
    EvictFrame {
        arm: usize,
        depth: usize,
        frame_start: usize,
    },
    Restart {
        episode: usize,
    },
}

pub trait Policy: Send {
    fn num_arms(&self) -> usize;

    /// Arm to play this round. Returns [`crate::Error::EndOfHorizon`] once the
    /// policy's horizon is exhausted.
    fn select(&mut self) -> Result<usize>;

    /// Reward of the arm returned by the preceding `select`.
    fn observe(&mut self, arm: usize, reward: f64) -> Result<()>;

    /// Events logged since the last call.
    fn drain_events(&mut self) -> Vec<Event> {
        Vec::new()
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn num_arms(&self) -> usize {
        (**self).num_arms()
    }

    fn select(&mut self) -> Result<usize> {
        (**self).select()
    }

    fn observe(&mut self, arm: usize, reward: f64) -> Result<()> {
        (**self).observe(arm, reward)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        (**self).drain_events()
    }
}

/// Select/observe bookkeeping shared by the simple policies.
#[derive(Debug, Default, Clone)]
pub(crate) struct Turn {
    pending: Option<usize>,
}

impl Turn {
    pub(crate) fn begin(&mut self, arm: usize) -> Result<usize> {
        if self.pending.is_some() {
            return Err(crate::Error::Usage(
                "select called twice without observe".into(),
            ));
        }
        self.pending = Some(arm);
        Ok(arm)
    }

    pub(crate) fn ensure_idle(&self) -> Result<()> {
        if self.pending.is_some() {
            return Err(crate::Error::Usage(
                "select called twice without observe".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn finish(&mut self, arm: usize, reward: f64) -> Result<()> {
        match self.pending {
            None => Err(crate::Error::Usage(
                "observe called without a pending select".into(),
            )),
            Some(p) if p != arm => Err(crate::Error::Usage(format!(
                "observe reports arm {arm} but arm {p} was selected"
            ))),
            Some(_) => {
                check_reward(reward)?;
                self.pending = None;
                Ok(())
            }
        }
    }
}

pub(crate) fn check_reward(reward: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&reward) {
        return Err(crate::Error::Validation(format!(
            "reward {reward} outside [0, 1]"
        )));
    }
    Ok(())
}
