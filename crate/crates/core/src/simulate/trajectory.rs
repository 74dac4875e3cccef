use serde::{Deserialize, Serialize};

use crate::preisach::{MemoryStaircase, PreisachState};
use crate::sir::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub v: f64,
}

impl Sample {
    pub fn r(&self) -> f64 {
        1.0 - self.i - self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `S` falls through `delta/beta`: `I` peaks.
    NullclineMax,
    /// `S` rises through `delta/beta`: `I` bottoms out.
    NullclineMin,
    /// The input reached a relay threshold (relay-bank mode only).
    RelaySwitch,
}

impl EventKind {
    pub fn is_turning(self) -> bool {
        matches!(self, EventKind::NullclineMax | EventKind::NullclineMin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub kind: EventKind,
}

/// Accepted samples, detected events and operator states at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub initial_state: PreisachState,
    pub final_state: PreisachState,
}

impl Trajectory {
    /// Turning points `(t_k, I_k)` of `I` in time order.
    pub fn turning_points(&self) -> Vec<(f64, f64)> {
        self.events.iter().filter(|e| e.kind.is_turning()).map(|e| (e.t, e.i)).collect()
    }

    pub fn turning_events(&self) -> Vec<Event> {
        self.events.iter().filter(|e| e.kind.is_turning()).copied().collect()
    }

    pub fn last(&self) -> Sample {
        *self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    /// Rebuilds a trajectory from stored samples alone. Turning points are
    /// re-detected from sign changes of `S - delta/beta` with linear
    /// interpolation, and the operator state is replayed from a virgin
    /// start at the first sample.
    pub fn from_samples(samples: Vec<Sample>, p: &ModelParams) -> crate::Result<Self> {
        let first = samples.first().ok_or_else(|| crate::Error::Domain("no samples".into()))?;
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(crate::Error::Domain("sample times must be strictly increasing".into()));
        }
        let s_star = p.s_star();
        let mut events = Vec::new();
        for w in samples.windows(2) {
            let (g0, g1) = (w[0].s - s_star, w[1].s - s_star);
            if (g0 > 0.0 && g1 <= 0.0) || (g0 < 0.0 && g1 >= 0.0) {
                let th = g0 / (g0 - g1);
                let kind = if g0 > 0.0 { EventKind::NullclineMax } else { EventKind::NullclineMin };
                events.push(Event {
                    t: w[0].t + th * (w[1].t - w[0].t),
                    i: w[0].i + th * (w[1].i - w[0].i),
                    s: s_star,
                    kind,
                });
            }
        }
        let mut mem = MemoryStaircase::virgin(first.i.clamp(0.0, 1.0))?;
        let initial_state = PreisachState::Staircase(mem.clone());
        for x in &samples[1..] {
            mem.update(x.i);
        }
        Ok(Trajectory { samples, events, initial_state, final_state: PreisachState::Staircase(mem) })
    }
}
