//! Dormand–Prince 5(4) integration of the coupled system with event
//! location on the dense output.
//!
//! The infected fraction is integrated as `u = ln I`. Between epidemic
//! waves `I` drops by many orders of magnitude, and in log form
//! `du/dt = beta S - delta` is independent of `I`, so deep troughs cost
//! nothing and positivity is automatic.

use serde::{Deserialize, Serialize};

use super::trajectory::{Event, EventKind, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::preisach::{Density, MemoryStaircase, OutputCache, PreisachState, RelayBank};
use crate::sir::{in_domain, ModelParams, SirState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Absolute tolerance on `I`.
    pub abs_tol_i: f64,
    /// Absolute tolerance on `S`.
    pub abs_tol_s: f64,
    pub rel_tol: f64,
    /// Largest step in weeks.
    pub max_step: f64,
    pub initial_step: f64,
    /// Steps shorter than this abort the run.
    pub min_step: f64,
    /// Width of the final bracket when locating events.
    pub event_time_tol: f64,
    pub max_steps: usize,
    /// Largest change of `I` per step near a relay threshold in relay-bank mode.
    pub max_relay_jump: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            abs_tol_i: 1e-10,
            abs_tol_s: 1e-8,
            rel_tol: 1e-9,
            max_step: 0.5,
            initial_step: 1e-3,
            min_step: 1e-12,
            event_time_tol: 1e-10,
            max_steps: 20_000_000,
            max_relay_jump: 1e-4,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("abs_tol_i", self.abs_tol_i),
            ("abs_tol_s", self.abs_tol_s),
            ("rel_tol", self.rel_tol),
            ("max_step", self.max_step),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("event_time_tol", self.event_time_tol),
            ("max_relay_jump", self.max_relay_jump),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Config(format!("solver.{name} must be finite and > 0, got {x}")));
            }
        }
        if self.min_step > self.max_step {
            return Err(Error::Config("solver.min_step exceeds solver.max_step".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FailureKind {
    #[error("step size underflow at t={t} (h={h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit reached at t={t}")]
    StepLimit { t: f64 },
    #[error("integrator fault: state left the domain at t={t} (I={i}, S={s})")]
    DomainExit { t: f64, i: f64, s: f64 },
}

/// A run that stopped early, with everything computed up to that point.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{kind}")]
pub struct IntegrationFailure {
    pub kind: FailureKind,
    pub partial: Box<Trajectory>,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Sub-step points checked for events, as fractions of the step.
const EVENT_PROBES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

type Y = [f64; 2];

/// Operator state with the stage evaluation rule of the chosen mode.
#[derive(Debug, Clone)]
enum Operator {
    /// Exact continuous operator; stages see a tentative monotone update.
    Staircase { mem: MemoryStaircase, cache: OutputCache },
    /// Relay bank; the output is frozen between threshold events.
    Bank(RelayBank),
}

impl Operator {
    fn new(state: PreisachState, d: &Density) -> Self {
        match state {
            PreisachState::Staircase(mem) => {
                let cache = OutputCache::new(&mem, d);
                Operator::Staircase { mem, cache }
            }
            PreisachState::RelayBank(b) => Operator::Bank(b),
        }
    }

    fn stage_output(&self, i: f64, d: &Density) -> f64 {
        match self {
            Operator::Staircase { cache, .. } => cache.output_after(i, d),
            Operator::Bank(b) => b.output(),
        }
    }

    fn commit(&mut self, i: f64, d: &Density) {
        match self {
            Operator::Staircase { mem, cache } => {
                mem.update(i);
                cache.commit(i, d);
            }
            Operator::Bank(b) => b.update(i),
        }
    }

    fn output(&self, d: &Density) -> f64 {
        match self {
            Operator::Staircase { mem, .. } => mem.output(d),
            Operator::Bank(b) => b.output(),
        }
    }

    fn state(&self) -> PreisachState {
        match self {
            Operator::Staircase { mem, .. } => PreisachState::Staircase(mem.clone()),
            Operator::Bank(b) => PreisachState::RelayBank(b.clone()),
        }
    }

    fn switch_levels(&self) -> (Option<f64>, Option<f64>) {
        match self {
            Operator::Staircase { .. } => (None, None),
            Operator::Bank(b) => b.next_switch_levels(),
        }
    }
}

/// Steppable integrator; [`Integrator::advance`] may be called repeatedly
/// to extend a run.
pub struct Integrator {
    p: ModelParams,
    d: Density,
    opts: SolverOptions,
    t: f64,
    y: Y,
    k1: Y,
    h: f64,
    op: Operator,
    /// `S > delta/beta` on the current arc.
    above: bool,
    /// Started on the invariant axis `I = 0`.
    axis: bool,
    samples: Vec<Sample>,
    events: Vec<Event>,
    initial_state: PreisachState,
    steps: usize,
}

struct Step {
    y1: Y,
    k: [Y; 7],
    err: f64,
}

impl Integrator {
    pub fn new(p: ModelParams, d: Density, init: SirState, state: PreisachState, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        if !(in_domain(init) && init.s > 0.0) || !init.i.is_finite() || !init.s.is_finite() {
            return Err(Error::Domain(format!("initial state (I={}, S={}) outside the domain", init.i, init.s)));
        }
        if (state.input() - init.i).abs() > 1e-15 {
            return Err(Error::Domain(format!(
                "operator input {} differs from initial I={}",
                state.input(),
                init.i
            )));
        }
        let op = Operator::new(state.clone(), &d);
        let v0 = op.output(&d);
        let axis = init.i == 0.0;
        let y = [init.i.ln(), init.s];
        let mut it = Integrator {
            p,
            d,
            opts,
            t: 0.0,
            y,
            k1: [0.0; 2],
            h: opts.initial_step.min(opts.max_step),
            op,
            above: init.s >= p.s_star(),
            axis,
            samples: vec![Sample { t: 0.0, i: init.i, s: init.s, v: v0 }],
            events: Vec::new(),
            initial_state: state,
            steps: 0,
        };
        it.k1 = it.rhs(it.y);
        Ok(it)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> SirState {
        SirState::new(self.y[0].exp(), self.y[1])
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            samples: self.samples.clone(),
            events: self.events.clone(),
            initial_state: self.initial_state.clone(),
            final_state: self.op.state(),
        }
    }

    pub fn into_trajectory(self) -> Trajectory {
        let final_state = self.op.state();
        Trajectory { samples: self.samples, events: self.events, initial_state: self.initial_state, final_state }
    }

    fn rhs(&self, y: Y) -> Y {
        let i = y[0].exp();
        let s = y[1];
        let v = self.op.stage_output(i, &self.d);
        let p = &self.p;
        [p.beta() * s - p.delta(), -p.beta() * i * s - v * s - p.mu() * s + p.mu()]
    }

    fn try_step(&self, h: f64) -> Step {
        let mut k = [[0.0; 2]; 7];
        k[0] = self.k1;
        for s in 1..7 {
            let mut y = self.y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    y[0] += h * a * kj[0];
                    y[1] += h * a * kj[1];
                }
            }
            k[s] = self.rhs(y);
        }
        let y1 = {
            let mut y = self.y;
            for (j, kj) in k.iter().enumerate().take(6) {
                y[0] += h * A[6][j] * kj[0];
                y[1] += h * A[6][j] * kj[1];
            }
            y
        };
        let mut e = [0.0; 2];
        for (j, kj) in k.iter().enumerate() {
            e[0] += h * E[j] * kj[0];
            e[1] += h * E[j] * kj[1];
        }
        let o = &self.opts;
        let i_scale = self.y[0].exp().max(y1[0].exp());
        let s_scale = self.y[1].abs().max(y1[1].abs());
        let es = e[1] / (o.abs_tol_s + o.rel_tol * s_scale);
        let err = if self.axis {
            es.abs()
        } else {
            let eu = e[0] / (o.rel_tol + o.abs_tol_i / i_scale);
            ((eu * eu + es * es) / 2.0).sqrt()
        };
        Step { y1, k, err }
    }

    fn dense(&self, step: &Step, h: f64, theta: f64) -> Y {
        let mut out = [0.0; 2];
        for c in 0..2 {
            let y0 = self.y[c];
            let diff = step.y1[c] - y0;
            let bspl = h * step.k[0][c] - diff;
            let r4 = diff - h * step.k[6][c] - bspl;
            let r5 = h * D.iter().zip(&step.k).map(|(d, k)| d * k[c]).sum::<f64>();
            out[c] = y0 + theta * (diff + (1.0 - theta) * (bspl + theta * (r4 + (1.0 - theta) * r5)));
        }
        out
    }

    /// Which events have fired at state `y` relative to the arc start.
    fn fired(&self, y: Y, levels: (Option<f64>, Option<f64>)) -> (bool, bool) {
        let g = y[1] - self.p.s_star();
        let turning = !self.axis && if self.above { g < 0.0 } else { g > 0.0 };
        let i = y[0].exp();
        let switch = levels.0.is_some_and(|up| i >= up) || levels.1.is_some_and(|down| i <= down);
        (turning, switch)
    }

    fn near_threshold(&self, levels: (Option<f64>, Option<f64>)) -> bool {
        let i = self.y[0].exp();
        let reach = 10.0 * self.opts.max_relay_jump;
        levels.0.is_some_and(|up| up - i < reach) || levels.1.is_some_and(|down| i - down < reach)
    }

    fn accept(&mut self, t: f64, y: Y, kind: Option<EventKind>) -> std::result::Result<(), FailureKind> {
        let i = y[0].exp();
        let s = y[1];
        if !(s >= -1e-9 && i + s <= 1.0 + 1e-9) || !s.is_finite() || i.is_nan() {
            return Err(FailureKind::DomainExit { t, i, s });
        }
        self.op.commit(i, &self.d);
        self.t = t;
        self.y = y;
        self.k1 = self.rhs(y);
        let v = self.op.output(&self.d);
        self.samples.push(Sample { t, i, s, v });
        if let Some(kind) = kind {
            self.events.push(Event { t, i, s, kind });
        }
        Ok(())
    }

    /// Integrates up to `t_end`, appending samples and events.
    pub fn advance(&mut self, t_end: f64) -> std::result::Result<(), FailureKind> {
        let o = self.opts;
        while self.t < t_end {
            if self.steps >= o.max_steps {
                return Err(FailureKind::StepLimit { t: self.t });
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = self.h.min(remaining).min(o.max_step);
            if h < o.min_step * self.t.abs().max(1.0) && !last {
                return Err(FailureKind::StepUnderflow { t: self.t, h });
            }
            self.steps += 1;
            let step = self.try_step(h);
            if !(step.err <= 1.0) {
                let factor = if step.err.is_finite() { (0.9 * step.err.powf(-0.2)).max(0.2) } else { 0.2 };
                self.h = h * factor;
                continue;
            }
            let levels = self.op.switch_levels();
            if matches!(self.op, Operator::Bank(_)) && self.near_threshold(levels) {
                let jump = (step.y1[0].exp() - self.y[0].exp()).abs();
                if jump > o.max_relay_jump && h > o.min_step {
                    self.h = h * 0.5 * (o.max_relay_jump / jump).max(0.1);
                    continue;
                }
            }
            let grow = if step.err > 0.0 { (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
            let next_h = (h * grow).min(o.max_step);

            // first probe at which an event has fired
            let mut lo = 0.0;
            let mut hit = None;
            for &theta in &EVENT_PROBES {
                let y = if theta == 1.0 { step.y1 } else { self.dense(&step, h, theta) };
                let f = self.fired(y, levels);
                if f.0 || f.1 {
                    hit = Some(theta);
                    break;
                }
                lo = theta;
            }
            let t0 = self.t;
            match hit {
                None => {
                    self.accept(t0 + h, step.y1, None)?;
                }
                Some(mut hi) => {
                    while (hi - lo) * h > o.event_time_tol {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let f = self.fired(self.dense(&step, h, mid), levels);
                        if f.0 || f.1 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let y = if hi == 1.0 { step.y1 } else { self.dense(&step, h, hi) };
                    let (turning, switch) = self.fired(y, levels);
                    let t = if hi == 1.0 { t0 + h } else { t0 + hi * h };
                    let kind = if turning {
                        Some(if self.above { EventKind::NullclineMax } else { EventKind::NullclineMin })
                    } else if switch {
                        Some(EventKind::RelaySwitch)
                    } else {
                        None
                    };
                    if turning {
                        self.above = !self.above;
                    }
                    self.accept(t, y, kind)?;
                    if turning && switch {
                        self.events.push(Event { t, i: y[0].exp(), s: y[1], kind: EventKind::RelaySwitch });
                    }
                }
            }
            self.h = next_h;
        }
        Ok(())
    }
}

/// Why a run produced no complete trajectory.
#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    /// Invalid inputs; nothing was integrated.
    #[error(transparent)]
    Setup(#[from] Error),
    #[error(transparent)]
    Failed(#[from] IntegrationFailure),
}

/// Integrates the coupled system from `init` with operator state `state`.
pub fn integrate(
    p: &ModelParams,
    d: &Density,
    init: SirState,
    state: PreisachState,
    t_end: f64,
    opts: SolverOptions,
) -> std::result::Result<Trajectory, RunError> {
    let mut it = Integrator::new(*p, d.clone(), init, state, opts)?;
    match it.advance(t_end) {
        Ok(()) => Ok(it.into_trajectory()),
        Err(kind) => Err(IntegrationFailure { kind, partial: Box::new(it.into_trajectory()) }.into()),
    }
}
