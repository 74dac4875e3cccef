//! Non-ideal relay and the discrete Preisach operator built from a bank of
//! weighted relays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Switching thresholds of one relay: OFF at `alpha1`, ON at `alpha2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Thresholds {
    alpha1: f64,
    alpha2: f64,
}

impl Thresholds {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if 0.0 <= alpha1 && alpha1 < alpha2 && alpha2 <= 1.0 {
            Ok(Thresholds { alpha1, alpha2 })
        } else {
            Err(Error::InvalidThresholds { alpha1, alpha2 })
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
}

impl TryFrom<(f64, f64)> for Thresholds {
    type Error = Error;
    fn try_from((a1, a2): (f64, f64)) -> Result<Self> {
        Thresholds::new(a1, a2)
    }
}

impl From<Thresholds> for (f64, f64) {
    fn from(t: Thresholds) -> Self {
        (t.alpha1, t.alpha2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RelayState {
    Off,
    On,
}

impl RelayState {
    pub fn is_on(self) -> bool {
        self == RelayState::On
    }

    pub fn value(self) -> f64 {
        match self {
            RelayState::Off => 0.0,
            RelayState::On => 1.0,
        }
    }

    /// True when the state does not contradict the input level.
    pub fn compatible(self, th: Thresholds, input: f64) -> bool {
        match self {
            RelayState::On => input > th.alpha1,
            RelayState::Off => input < th.alpha2,
        }
    }
}

impl From<bool> for RelayState {
    fn from(on: bool) -> Self {
        if on {
            RelayState::On
        } else {
            RelayState::Off
        }
    }
}

impl TryFrom<u8> for RelayState {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(RelayState::Off),
            1 => Ok(RelayState::On),
            other => Err(format!("relay state must be 0 or 1, got {other}")),
        }
    }
}

impl From<RelayState> for u8 {
    fn from(s: RelayState) -> u8 {
        s as u8
    }
}

/// Advance one relay to `new_input`, assuming the input moved monotonically
/// since the previous sample. Thresholds are closed: reaching `alpha2`
/// switches ON, reaching `alpha1` switches OFF.
pub fn relay_step(th: Thresholds, s: RelayState, new_input: f64) -> RelayState {
    if new_input >= th.alpha2 {
        RelayState::On
    } else if new_input <= th.alpha1 {
        RelayState::Off
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relay {
    pub thresholds: Thresholds,
    pub weight: f64,
    pub state: RelayState,
}

/// Discrete Preisach operator: weighted relays driven by a common input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayBank {
    relays: Vec<Relay>,
    input: f64,
    v_nat: f64,
}

impl RelayBank {
    /// Builds a bank, checking weights and compatibility with `input`.
    pub fn new(relays: Vec<Relay>, input: f64, v_nat: f64) -> Result<Self> {
        for r in &relays {
            if !(r.weight >= 0.0) || !r.weight.is_finite() {
                return Err(Error::InvalidDensity(format!("relay weight must be >= 0, got {}", r.weight)));
            }
            if !r.state.compatible(r.thresholds, input) {
                return Err(Error::Domain(format!(
                    "relay ({}, {}) state {:?} incompatible with input {input}",
                    r.thresholds.alpha1, r.thresholds.alpha2, r.state
                )));
            }
        }
        Ok(RelayBank { relays, input, v_nat })
    }

    pub fn relays(&self) -> &[Relay] {
        &self.relays
    }

    pub fn input(&self) -> f64 {
        self.input
    }

    pub fn v_nat(&self) -> f64 {
        self.v_nat
    }

    pub fn update(&mut self, new_input: f64) {
        for r in &mut self.relays {
            r.state = relay_step(r.thresholds, r.state, new_input);
        }
        self.input = new_input;
    }

    pub fn updated(&self, new_input: f64) -> Self {
        let mut next = self.clone();
        next.update(new_input);
        next
    }

    /// `v_nat + sum of weights of relays that are ON`.
    pub fn output(&self) -> f64 {
        self.v_nat + self.relays.iter().filter(|r| r.state.is_on()).map(|r| r.weight).sum::<f64>()
    }

    pub fn total_weight(&self) -> f64 {
        self.relays.iter().map(|r| r.weight).sum()
    }

    /// Weighted count of relays whose states differ.
    pub fn distance(&self, other: &RelayBank) -> Result<f64> {
        if self.relays.len() != other.relays.len()
            || self.relays.iter().zip(&other.relays).any(|(a, b)| a.thresholds != b.thresholds || a.weight != b.weight)
        {
            return Err(Error::Domain("relay banks have different relay sets".into()));
        }
        Ok(self
            .relays
            .iter()
            .zip(&other.relays)
            .filter(|(a, b)| a.state != b.state)
            .map(|(a, _)| a.weight)
            .sum())
    }

    /// Smallest `alpha2` among OFF relays above the input and largest
    /// `alpha1` among ON relays below it: the next levels at which the
    /// output can jump.
    pub fn next_switch_levels(&self) -> (Option<f64>, Option<f64>) {
        let mut up: Option<f64> = None;
        let mut down: Option<f64> = None;
        for r in self.relays.iter().filter(|r| r.weight > 0.0) {
            match r.state {
                RelayState::Off => {
                    let a2 = r.thresholds.alpha2;
                    if up.is_none_or(|u| a2 < u) {
                        up = Some(a2);
                    }
                }
                RelayState::On => {
                    let a1 = r.thresholds.alpha1;
                    if down.is_none_or(|d| a1 > d) {
                        down = Some(a1);
                    }
                }
            }
        }
        (up, down)
    }
}
