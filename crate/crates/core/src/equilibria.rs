//! Infection-free and endemic equilibria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::preisach::{branch_eval, Density, MemoryStaircase};
use crate::sir::{ModelParams, SirState};

/// Infection-free equilibrium `(0, mu / (mu + v_nat))`.
pub fn infection_free(p: &ModelParams) -> SirState {
    SirState::new(0.0, p.mu() / (p.mu() + p.v_nat()))
}

/// Member of the endemic family with frozen vaccination rate `v0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndemicEquilibrium {
    #[serde(rename = "I_star")]
    pub i_star: f64,
    #[serde(rename = "S_star")]
    pub s_star: f64,
    pub v0: f64,
}

impl EndemicEquilibrium {
    pub fn state(&self) -> SirState {
        SirState::new(self.i_star, self.s_star)
    }
}

/// `I* = mu/delta - (mu + v0)/beta`, `S* = delta/beta`.
pub fn endemic_from_v0(p: &ModelParams, v0: f64) -> Result<EndemicEquilibrium> {
    let i_star = p.mu() / p.delta() - (p.mu() + v0) / p.beta();
    if !(i_star > 0.0) {
        return Err(Error::NoEndemicEquilibrium(format!("no endemic equilibrium for v0={v0} (I*={i_star})")));
    }
    Ok(EndemicEquilibrium { i_star, s_star: p.s_star(), v0 })
}

/// Direction of the monotone sweep used to build a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascending,
    Descending,
}

/// Endemic equilibrium compatible with the hysteresis branch that starts at
/// `mem` and moves in `direction`. Solves
/// `mu (1 - S*) - beta S* I = S* v(I)` by bisection on `[0, mu/delta]`.
///
/// The root must lie on the requested side of the state's current input,
/// otherwise the branch does not reach it.
pub fn endemic_on_branch(
    p: &ModelParams,
    mem: &MemoryStaircase,
    d: &Density,
    direction: Direction,
) -> Result<EndemicEquilibrium> {
    let root = endemic_on_curve(p, |i| branch_eval(mem, d, i))?;
    let cur = mem.current();
    let reachable = match direction {
        Direction::Ascending => root.i_star >= cur - 1e-12,
        Direction::Descending => root.i_star <= cur + 1e-12,
    };
    if !reachable {
        return Err(no_branch_root());
    }
    Ok(root)
}

fn no_branch_root() -> Error {
    Error::NoEndemicEquilibrium("no endemic equilibrium on this branch".into())
}

/// Root of `mu (1 - S*) - beta S* I = S* v(I)` for an arbitrary
/// nondecreasing rate curve `v`, without any reachability requirement.
pub fn endemic_on_curve(p: &ModelParams, branch: impl Fn(f64) -> f64) -> Result<EndemicEquilibrium> {
    let s = p.s_star();
    let residual = |i: f64| p.mu() * (1.0 - s) - p.beta() * s * i - s * branch(i);
    let root = bisect(&residual, 0.0, p.mu() / p.delta(), 1e-12).ok_or_else(no_branch_root)?;
    if root <= 0.0 {
        return Err(no_branch_root());
    }
    Ok(EndemicEquilibrium { i_star: root, s_star: s, v0: branch(root) })
}

/// Range of `I*` over `v0` in `[v_nat, v_nat + v_max]`, clipped at zero.
pub fn endemic_range(p: &ModelParams, v_max: f64) -> (f64, f64) {
    let at = |v0: f64| (p.mu() / p.delta() - (p.mu() + v0) / p.beta()).max(0.0);
    (at(p.v_nat() + v_max), at(p.v_nat()))
}
