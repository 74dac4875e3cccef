//! SIR model with births/deaths at rate `mu` and an externally supplied
//! vaccination rate `v`. Time is measured in weeks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epidemiological rates. `delta = gamma + mu` is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ModelParams {
    beta: f64,
    gamma: f64,
    mu: f64,
    v_nat: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, mu: f64, v_nat: f64) -> Result<Self> {
        let positive = [("beta", beta), ("gamma", gamma), ("mu", mu)];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        if !(v_nat.is_finite() && v_nat >= 0.0) {
            return Err(Error::InvalidParams(format!("v_nat must be finite and >= 0, got {v_nat}")));
        }
        Ok(ModelParams { beta, gamma, mu, v_nat })
    }

    /// Builds parameters from the total removal rate `delta` instead of `gamma`.
    pub fn with_delta(beta: f64, delta: f64, mu: f64, v_nat: f64) -> Result<Self> {
        if !(delta > mu) {
            return Err(Error::InvalidParams(format!("delta must exceed mu, got delta={delta}, mu={mu}")));
        }
        Self::new(beta, delta - mu, mu, v_nat)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn v_nat(&self) -> f64 {
        self.v_nat
    }

    pub fn delta(&self) -> f64 {
        self.gamma + self.mu
    }

    /// Susceptible level on the `dI/dt = 0` nullcline.
    pub fn s_star(&self) -> f64 {
        self.delta() / self.beta
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(beta, self.gamma, self.mu, self.v_nat)
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        Self::new(self.beta, self.gamma, mu, self.v_nat)
    }

    pub fn with_v_nat(self, v_nat: f64) -> Result<Self> {
        Self::new(self.beta, self.gamma, self.mu, v_nat)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRepr {
    beta: f64,
    mu: f64,
    #[serde(default)]
    v_nat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        match (r.gamma, r.delta) {
            (Some(g), None) => ModelParams::new(r.beta, g, r.mu, r.v_nat),
            (None, Some(d)) => ModelParams::with_delta(r.beta, d, r.mu, r.v_nat),
            _ => Err(Error::InvalidParams("exactly one of gamma or delta must be given".into())),
        }
    }
}

impl From<ModelParams> for ParamsRepr {
    fn from(p: ModelParams) -> Self {
        ParamsRepr { beta: p.beta, mu: p.mu, v_nat: p.v_nat, gamma: Some(p.gamma), delta: None }
    }
}

/// Infected and susceptible fractions; `R = 1 - I - S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirState {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

impl SirState {
    pub fn new(i: f64, s: f64) -> Self {
        SirState { i, s }
    }

    pub fn r(&self) -> f64 {
        1.0 - self.i - self.s
    }
}

/// `(dI/dt, dS/dt)` for vaccination rate `v`.
pub fn vector_field(x: SirState, v: f64, p: &ModelParams) -> (f64, f64) {
    let infection = p.beta * x.i * x.s;
    (infection - p.delta() * x.i, -infection - v * x.s - p.mu * x.s + p.mu)
}

/// `dR/dt = gamma I + v S - mu R`.
pub fn recovered_rate(x: SirState, v: f64, p: &ModelParams) -> f64 {
    p.gamma * x.i + v * x.s - p.mu * x.r()
}

/// Basic reproduction number `beta mu / (delta (mu + v_nat))`.
pub fn r0(p: &ModelParams) -> f64 {
    p.beta * p.mu / (p.delta() * (p.mu + p.v_nat))
}

/// Membership in the closed domain `I >= 0, S >= 0, I + S <= 1`.
pub fn in_domain(x: SirState) -> bool {
    x.i >= 0.0 && x.s >= 0.0 && x.i + x.s <= 1.0
}
