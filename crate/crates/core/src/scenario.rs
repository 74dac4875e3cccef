//! Scenario files: everything needed to reproduce one run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preisach::{discretize, Density, MemoryStaircase, PreisachState};
use crate::simulate::{ClassifyOptions, RunSpec, SolverOptions};
use crate::sir::{ModelParams, SirState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemorySpec {
    /// Monotone rise from zero to `I0`.
    Virgin,
    /// An explicit staircase; its current value must equal `I0`.
    Explicit(MemoryStaircase),
    /// Relay bank from an `n x n` discretisation, started virgin.
    RelayBank { n: usize },
}

/// Names of the output files written into the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputNames {
    pub trajectory: String,
    pub events: String,
    pub final_memory: String,
    pub attractor: String,
}

impl Default for OutputNames {
    fn default() -> Self {
        OutputNames {
            trajectory: "trajectory.csv".into(),
            events: "events.json".into(),
            final_memory: "final_memory.json".into(),
            attractor: "attractor.json".into(),
        }
    }
}

/// Parsed and validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: ModelParams,
    pub density: Density,
    pub init: InitSpec,
    #[serde(default = "virgin")]
    pub memory: MemorySpec,
    #[serde(default)]
    pub solver: SolverOptions,
    pub run: RunSpec,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default)]
    pub outputs: OutputNames,
}

fn virgin() -> MemorySpec {
    MemorySpec::Virgin
}

impl Scenario {
    /// Parses a scenario, reporting the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let density_v_nat = raw.get("density").and_then(|d| d.get("v_nat")).cloned();
        let mut sc: Scenario = serde_path_to_error::deserialize(&raw)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        if let Some(v) = density_v_nat {
            let v = v.as_f64().ok_or_else(|| Error::Config("density.v_nat: expected a number".into()))?;
            if v != sc.params.v_nat() {
                return Err(Error::Config(format!(
                    "density.v_nat ({v}) differs from params.v_nat ({})",
                    sc.params.v_nat()
                )));
            }
        }
        sc.density = sc.density.with_v_nat(sc.params.v_nat()).map_err(|e| Error::Config(format!("density: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let InitSpec { i0, s0 } = self.init;
        if !(i0 > 0.0 && s0 > 0.0 && i0 + s0 <= 1.0) {
            return Err(Error::Config(format!("init: need I0 > 0, S0 > 0 and I0 + S0 <= 1, got I0={i0}, S0={s0}")));
        }
        if !(self.run.t_end.is_finite() && self.run.t_end > 0.0) {
            return Err(Error::Config(format!("run.t_end must be positive, got {}", self.run.t_end)));
        }
        if let Some(d) = self.run.discard {
            if !(d >= 0.0 && d < self.run.t_end) {
                return Err(Error::Config(format!("run.discard must lie in [0, t_end), got {d}")));
            }
        }
        self.solver.validate()?;
        match &self.memory {
            MemorySpec::Explicit(m) if m.current() != i0 => {
                return Err(Error::Config(format!("memory.current ({}) differs from init.I0 ({i0})", m.current())));
            }
            MemorySpec::RelayBank { n: 0 } => return Err(Error::Config("memory.n must be at least 1".into())),
            _ => {}
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SirState {
        SirState::new(self.init.i0, self.init.s0)
    }

    /// Initial operator state in the representation the scenario asks for.
    pub fn operator_state(&self) -> Result<PreisachState> {
        let i0 = self.init.i0;
        Ok(match &self.memory {
            MemorySpec::Virgin => PreisachState::Staircase(MemoryStaircase::virgin(i0)?),
            MemorySpec::Explicit(m) => PreisachState::Staircase(m.clone()),
            MemorySpec::RelayBank { n } => {
                PreisachState::RelayBank(discretize(&self.density, *n, &MemoryStaircase::virgin(i0)?)?)
            }
        })
    }

    /// Copy with one parameter replaced, as used by sweeps.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut sc = self.clone();
        match name {
            "sigma" => {
                let crate::preisach::Measure::Gaussian(g) = self.density.measure() else {
                    return Err(Error::Config("sweeping sigma needs a gaussian density".into()));
                };
                sc.density = Density::gaussian(g.alpha_m1, g.alpha_m2, value)?.with_v_nat(self.params.v_nat())?;
            }
            "beta" => sc.params = self.params.with_beta(value)?,
            "mu" => sc.params = self.params.with_mu(value)?,
            "v_nat" => {
                sc.params = self.params.with_v_nat(value)?;
                sc.density = self.density.clone().with_v_nat(value)?;
            }
            other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"{
        "params": {"beta": 10.8, "delta": 0.6, "mu": 0.0006, "v_nat": 0.0},
        "density": {"kind": "gaussian", "alpha_m1": 0.0002, "alpha_m2": 0.0055, "sigma": 0.1},
        "init": {"I0": 1e-5, "S0": 0.99999},
        "run": {"t_end": 50000}
    }"#;

    #[test]
    fn parses_minimal_scenario() {
        let sc = Scenario::from_json(BASELINE).unwrap();
        assert_eq!(sc.memory, MemorySpec::Virgin);
        assert_eq!(sc.solver, SolverOptions::default());
        assert!(matches!(sc.operator_state().unwrap(), PreisachState::Staircase(_)));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = BASELINE.replace("\"beta\": 10.8", "\"beta\": \"x\"");
        let err = Scenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("params.beta"), "{err}");
        let bad = BASELINE.replace("\"S0\": 0.99999", "\"S0\": 0.999999");
        assert!(Scenario::from_json(&bad).unwrap_err().to_string().contains("I0 + S0"));
        let both = BASELINE.replace("\"delta\": 0.6", "\"delta\": 0.6, \"gamma\": 0.5");
        assert!(Scenario::from_json(&both).is_err());
        assert!(Scenario::from_json("{not json").is_err());
    }

    #[test]
    fn density_baseline_must_agree() {
        let clash = BASELINE.replace("\"sigma\": 0.1", "\"sigma\": 0.1, \"v_nat\": 0.2");
        assert!(Scenario::from_json(&clash).is_err());
        let same = BASELINE.replace("\"sigma\": 0.1", "\"sigma\": 0.1, \"v_nat\": 0.0");
        assert!(Scenario::from_json(&same).is_ok());
    }

    #[test]
    fn sweep_parameters() {
        let sc = Scenario::from_json(BASELINE).unwrap();
        let s = sc.with_param("sigma", 0.0009).unwrap();
        let crate::preisach::Measure::Gaussian(g) = s.density.measure() else { panic!() };
        assert_eq!(g.sigma, 0.0009);
        assert_eq!(sc.with_param("v_nat", 0.01).unwrap().density.v_nat(), 0.01);
        assert!(sc.with_param("gamma", 0.1).is_err());
    }

    #[test]
    fn explicit_memory_must_match_initial_input() {
        let text = BASELINE.replace(
            "\"run\"",
            "\"memory\": {\"kind\": \"explicit\", \"maxima\": [0.5], \"minima\": [], \"current\": 1e-5, \"trend\": \"falling\"}, \"run\"",
        );
        let sc = Scenario::from_json(&text).unwrap();
        assert!(matches!(sc.memory, MemorySpec::Explicit(_)));
        let off = text.replace("\"current\": 1e-5", "\"current\": 2e-5");
        assert!(Scenario::from_json(&off).is_err());
    }
}
