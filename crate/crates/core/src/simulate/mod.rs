//! Time integration of the coupled SIR–Preisach system and classification
//! of its long-run behaviour.

mod classify;
mod integrator;
mod trajectory;

pub use classify::{
    arc_direction, classify, orbit_averages, time_average, AttractorClass, Classification, ClassifyOptions,
    OrbitAverages, Witness,
};
pub use integrator::{integrate, FailureKind, IntegrationFailure, Integrator, RunError, SolverOptions};
pub use trajectory::{Event, EventKind, Sample, Trajectory};

use serde::{Deserialize, Serialize};

use crate::preisach::{Density, PreisachState};
use crate::sir::{ModelParams, SirState};

/// Run length and classification window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub t_end: f64,
    /// Transient dropped before classification; defaults to `0.8 t_end`.
    /// Scaled along with `t_end` when the run is extended.
    #[serde(default)]
    pub discard: Option<f64>,
    /// How many times `t_end` may be doubled while the result is undecided.
    #[serde(default = "default_doublings")]
    pub max_doublings: u32,
}

fn default_doublings() -> u32 {
    2
}

impl RunSpec {
    pub fn new(t_end: f64) -> Self {
        RunSpec { t_end, discard: None, max_doublings: 2 }
    }

    fn window_start(&self, scale: f64) -> f64 {
        self.discard.map_or(0.8 * self.t_end * scale, |d| d * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub classification: Classification,
    pub t_end: f64,
    pub doublings: u32,
}

/// Integrates and classifies, extending the run by doubling `t_end` (at
/// most `spec.max_doublings` times) while the classification is undecided.
#[allow(clippy::too_many_arguments)]
pub fn run(
    p: &ModelParams,
    d: &Density,
    init: SirState,
    state: PreisachState,
    spec: RunSpec,
    solver: SolverOptions,
    opts: &ClassifyOptions,
) -> Result<RunOutcome, RunError> {
    let mut it = Integrator::new(*p, d.clone(), init, state, solver)?;
    let mut scale = 1.0;
    let mut doublings = 0;
    loop {
        let t_end = spec.t_end * scale;
        if let Err(kind) = it.advance(t_end) {
            return Err(IntegrationFailure { kind, partial: Box::new(it.into_trajectory()) }.into());
        }
        let trajectory = it.trajectory();
        let classification = classify(&trajectory, p, spec.window_start(scale), opts);
        if classification.class.is_decided() || doublings >= spec.max_doublings {
            return Ok(RunOutcome { trajectory, classification, t_end, doublings });
        }
        doublings += 1;
        scale *= 2.0;
    }
}
