//! Attractor classification from the tail of a trajectory.

use serde::{Deserialize, Serialize};

use super::trajectory::{Event, EventKind, Sample, Trajectory};
use crate::equilibria::infection_free;
use crate::error::{Error, Result};
use crate::sir::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// `sup I` over the window below this counts as extinct.
    pub eps_free: f64,
    /// Return-map tolerance `|I_{k+2} - I_k|` for a periodic orbit.
    pub eps_per: f64,
    /// Smallest `I_hi - I_lo` accepted as a genuine oscillation.
    pub eps_amp: f64,
    /// Largest range of `I`, `S` and `v` over the window at an equilibrium.
    pub eps_eq: f64,
    /// Number of confirming pairs is `2 * pairs`.
    pub pairs: usize,
    /// Distance of `S` from `mu / (mu + v_nat)` accepted as settled.
    pub eps_settle: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { eps_free: 1e-10, eps_per: 1e-6, eps_amp: 1e-5, eps_eq: 1e-6, pairs: 4, eps_settle: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttractorClass {
    InfectionFree {
        #[serde(rename = "S_limit")]
        s_limit: f64,
    },
    EndemicEquilibrium {
        #[serde(rename = "I_star")]
        i_star: f64,
        #[serde(rename = "S_star")]
        s_star: f64,
        v_star: f64,
    },
    PeriodicOrbit {
        #[serde(rename = "I_lo")]
        i_lo: f64,
        #[serde(rename = "I_hi")]
        i_hi: f64,
        period: f64,
        #[serde(rename = "I_bar")]
        i_bar: f64,
        #[serde(rename = "S_bar")]
        s_bar: f64,
        v_bar: f64,
        periods_averaged: usize,
    },
    Undecided,
}

impl AttractorClass {
    pub fn name(&self) -> &'static str {
        match self {
            AttractorClass::InfectionFree { .. } => "infection_free",
            AttractorClass::EndemicEquilibrium { .. } => "endemic_equilibrium",
            AttractorClass::PeriodicOrbit { .. } => "periodic_orbit",
            AttractorClass::Undecided => "undecided",
        }
    }

    pub fn is_decided(&self) -> bool {
        !matches!(self, AttractorClass::Undecided)
    }
}

/// Diagnostics behind a classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub window_start: f64,
    pub window_end: f64,
    pub samples_in_window: usize,
    pub turning_points_in_window: usize,
    /// Largest `|I_{k+2} - I_k|` over the confirming pairs, when enough
    /// turning points exist.
    pub max_return_gap: Option<f64>,
    #[serde(rename = "I_min")]
    pub i_min: f64,
    #[serde(rename = "I_max")]
    pub i_max: f64,
    #[serde(rename = "S_range")]
    pub s_range: f64,
    pub v_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    #[serde(flatten)]
    pub class: AttractorClass,
    pub witness: Witness,
}

/// Time averages over whole periods of a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitAverages {
    #[serde(rename = "I_bar")]
    pub i_bar: f64,
    #[serde(rename = "S_bar")]
    pub s_bar: f64,
    pub v_bar: f64,
    pub periods: usize,
}

/// Trapezoidal time averages of `(I, S, v)` over `[ta, tb]`, with linear
/// interpolation at the ends.
pub fn time_average(samples: &[Sample], ta: f64, tb: f64) -> Result<(f64, f64, f64)> {
    if !(tb > ta) {
        return Err(Error::Domain(format!("empty averaging interval [{ta}, {tb}]")));
    }
    let first = samples.first().ok_or_else(|| Error::Domain("no samples".into()))?;
    if ta < first.t || tb > samples[samples.len() - 1].t {
        return Err(Error::Domain(format!("averaging interval [{ta}, {tb}] outside the trajectory")));
    }
    let lerp = |a: &Sample, b: &Sample, t: f64| {
        let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        Sample { t, i: a.i + w * (b.i - a.i), s: a.s + w * (b.s - a.s), v: a.v + w * (b.v - a.v) }
    };
    let mut acc = [0.0; 3];
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.t <= ta || a.t >= tb {
            continue;
        }
        let lo = if a.t < ta { lerp(a, b, ta) } else { *a };
        let hi = if b.t > tb { lerp(a, b, tb) } else { *b };
        let dt = hi.t - lo.t;
        acc[0] += 0.5 * dt * (lo.i + hi.i);
        acc[1] += 0.5 * dt * (lo.s + hi.s);
        acc[2] += 0.5 * dt * (lo.v + hi.v);
    }
    let span = tb - ta;
    Ok((acc[0] / span, acc[1] / span, acc[2] / span))
}

/// Averages over the last `periods` full periods, delimited by turning
/// points of the same kind.
pub fn orbit_averages(traj: &Trajectory, periods: usize) -> Result<OrbitAverages> {
    let turning = traj.turning_events();
    let last = turning.last().ok_or_else(|| Error::Domain("trajectory has no turning points".into()))?;
    let same: Vec<&Event> = turning.iter().filter(|e| e.kind == last.kind).collect();
    if periods == 0 || same.len() < periods + 1 {
        return Err(Error::Domain(format!(
            "need {} turning points of one kind for {periods} periods, found {}",
            periods + 1,
            same.len()
        )));
    }
    let ta = same[same.len() - 1 - periods].t;
    let (i_bar, s_bar, v_bar) = time_average(&traj.samples, ta, last.t)?;
    Ok(OrbitAverages { i_bar, s_bar, v_bar, periods })
}

/// Classifies the behaviour on `[window_start, t_end]`.
///
/// The rules are tried in order: extinction, a periodic return map of the
/// turning points, then a flat window.
pub fn classify(traj: &Trajectory, p: &ModelParams, window_start: f64, opts: &ClassifyOptions) -> Classification {
    let window: Vec<Sample> = traj.samples.iter().filter(|x| x.t >= window_start).copied().collect();
    let turning: Vec<Event> = traj.turning_events().into_iter().filter(|e| e.t >= window_start).collect();
    let fold = |f: fn(&Sample) -> f64| {
        window.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (i_min, i_max) = fold(|x| x.i);
    let (v_min, v_max) = fold(|x| x.v);
    let (s_min, s_max) = fold(|x| x.s);
    let need = 2 * opts.pairs + 2;
    let max_return_gap = (opts.pairs > 0 && turning.len() >= need).then(|| {
        let tail = &turning[turning.len() - need..];
        tail.windows(3).map(|w| (w[2].i - w[0].i).abs()).fold(0.0, f64::max)
    });
    let mut witness = Witness {
        window_start,
        window_end: traj.t_end(),
        samples_in_window: window.len(),
        turning_points_in_window: turning.len(),
        max_return_gap,
        i_min,
        i_max,
        s_range: s_max - s_min,
        v_range: v_max - v_min,
    };
    if window.len() < 2 {
        witness.i_min = f64::NAN;
        witness.i_max = f64::NAN;
        witness.s_range = f64::NAN;
        witness.v_range = f64::NAN;
        return Classification { class: AttractorClass::Undecided, witness };
    }
    let done = |class| Classification { class, witness };

    let last = window[window.len() - 1];
    let s_free = infection_free(p).s;
    if i_max < opts.eps_free && (last.s - s_free).abs() < opts.eps_settle {
        return done(AttractorClass::InfectionFree { s_limit: last.s });
    }

    if let Some(gap) = max_return_gap {
        let tail = &turning[turning.len() - need..];
        let (a, b) = (tail[need - 1], tail[need - 2]);
        let (i_lo, i_hi) = (a.i.min(b.i), a.i.max(b.i));
        if gap < opts.eps_per && i_hi - i_lo > opts.eps_amp {
            let period = tail.windows(3).map(|w| w[2].t - w[0].t).sum::<f64>() / (need - 2) as f64;
            let same: Vec<&Event> = turning.iter().filter(|e| e.kind == a.kind).collect();
            let periods = same.len() - 1;
            if let Ok((i_bar, s_bar, v_bar)) = time_average(&traj.samples, same[0].t, a.t) {
                return done(AttractorClass::PeriodicOrbit {
                    i_lo,
                    i_hi,
                    period,
                    i_bar,
                    s_bar,
                    v_bar,
                    periods_averaged: periods,
                });
            }
        }
    }

    // a trough between epidemic waves is also flat in I, but S still moves
    let flat = i_max - i_min < opts.eps_eq && v_max - v_min < opts.eps_eq && s_max - s_min < opts.eps_eq;
    if flat && i_min > opts.eps_free {
        if let Ok((i_star, s_star, v_star)) = time_average(&window, window[0].t, last.t) {
            return done(AttractorClass::EndemicEquilibrium { i_star, s_star, v_star });
        }
    }
    done(AttractorClass::Undecided)
}

/// Kind of turning point that opens the next arc.
pub fn arc_direction(kind: EventKind) -> Option<crate::equilibria::Direction> {
    match kind {
        EventKind::NullclineMin => Some(crate::equilibria::Direction::Ascending),
        EventKind::NullclineMax => Some(crate::equilibria::Direction::Descending),
        EventKind::RelaySwitch => None,
    }
}
