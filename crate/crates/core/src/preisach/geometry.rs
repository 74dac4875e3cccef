//! Branches, loop geometry and the constants `K` and `L` that control the
//! Lipschitz and loop-width behaviour of the operator.

use serde::{Deserialize, Serialize};

use super::density::{Density, Measure};
use super::relay::{Relay, RelayBank, RelayState, Thresholds};
use super::staircase::MemoryStaircase;
use crate::error::{Error, Result};
use crate::numeric::{golden_max, integrate, scan_max};

/// Output reached by sweeping the input monotonically from the state's
/// current value to `target`. Increasing targets trace the ascending branch,
/// decreasing targets the descending one.
pub fn branch_eval(mem: &MemoryStaircase, d: &Density, target: f64) -> f64 {
    mem.updated(target).output(d)
}

/// Width `v_desc(I) - v_asc(I)` of the loop spanned by a simple input
/// oscillating between `i1` and `i2`: the mass of `[i1, i) x [i, i2]`.
pub fn loop_width(d: &Density, i1: f64, i: f64, i2: f64) -> Result<f64> {
    if !(0.0 <= i1 && i1 <= i && i <= i2 && i2 <= 1.0) {
        return Err(Error::Domain(format!("loop width needs 0 <= I1 <= I <= I2 <= 1, got ({i1}, {i}, {i2})")));
    }
    Ok(d.rect_mass(i1, i, i, i2))
}

/// `K = max over alpha1 of the mass of the column above alpha1`.
/// Infinite for measures with atoms.
pub fn lipschitz_k(d: &Density) -> f64 {
    match d.measure() {
        Measure::Uniform { c } => *c,
        Measure::Discrete { .. } if d.is_atomic() => f64::INFINITY,
        Measure::Discrete { .. } => 0.0,
        Measure::Gaussian(_) => {
            let column = |a1: f64| d.row_mass(a1, a1, 1.0);
            let (_, mut best) = scan_max(column, 0.0, 1.0, 4001, 1e-12);
            for p in d.feature_points().into_iter().filter(|p| (0.0..=1.0).contains(p)) {
                let h = 1.0 / 4000.0;
                let (_, v) = golden_max(column, (p - h).max(0.0), (p + h).min(1.0), 1e-13);
                best = best.max(v).max(column(p));
            }
            best
        }
    }
}

/// A constant that does bound `sup |v1 - v2|` by `C (state distance + sup |I1 - I2|)`:
/// `∫ max_{alpha1} q d alpha2 + ∫ max_{alpha2} q d alpha1`.
///
/// The staircase boundary is monotone, so its vertical pieces cover
/// disjoint `alpha2` ranges and its horizontal pieces disjoint `alpha1`
/// ranges. A uniform shift of the input moves both kinds of piece in the
/// same direction, which is why `lipschitz_k` alone can be exceeded.
pub fn lipschitz_bound(d: &Density) -> f64 {
    match d.measure() {
        Measure::Uniform { c } => 2.0 * c,
        Measure::Discrete { .. } if d.is_atomic() => f64::INFINITY,
        Measure::Discrete { .. } => 0.0,
        Measure::Gaussian(g) => {
            let (m1, m2) = (g.alpha_m1, g.alpha_m2);
            // the Gaussian is separable, so each inner maximum sits at the
            // centre clamped into the admissible range
            let top = |a2: f64| g.value(m1.clamp(0.0, a2), a2);
            let side = |a1: f64| g.value(a1, m2.clamp(a1, 1.0));
            let breaks: Vec<f64> = [m1, m2].into_iter().filter(|x| (0.0..=1.0).contains(x)).collect();
            integrate(top, 0.0, 1.0, &breaks, 1e-14, 1e-12).value
                + integrate(side, 0.0, 1.0, &breaks, 1e-14, 1e-12).value
        }
    }
}

/// Maximal loop width relative to loop length, with where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopRatio {
    pub value: f64,
    pub i1: f64,
    pub i: f64,
    pub i2: f64,
    /// Grid spacing of the last refinement pass in the `(I1, I2)` plane.
    pub resolution: f64,
}

/// Grid used for the nested maximisation in [`loop_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioGrid {
    /// Points per axis in the coarse `(I1, I2)` grid.
    pub coarse: usize,
    /// Points per axis in each zoomed refinement grid.
    pub refine: usize,
    /// Stop refining once the grid spacing is below this.
    pub target_resolution: f64,
    /// Scan points for the inner maximisation over `I` before the
    /// golden-section polish.
    pub inner_scan: usize,
}

impl Default for RatioGrid {
    fn default() -> Self {
        RatioGrid { coarse: 64, refine: 16, target_resolution: 1e-7, inner_scan: 24 }
    }
}

fn inner_max(d: &Density, i1: f64, i2: f64, scan: usize) -> (f64, f64) {
    if i2 <= i1 {
        return (i1, 0.0);
    }
    let width = |i: f64| d.rect_mass(i1, i, i, i2);
    scan_max(width, i1, i2, scan, (i2 - i1) * 1e-10)
}

fn ratio_at(d: &Density, i1: f64, i2: f64, scan: usize) -> (f64, f64) {
    let (i, w) = inner_max(d, i1, i2, scan);
    (i, w / (i2 - i1))
}

/// Loop ratio `L`: coarse grid over `(I1, I2)` with golden-section inner
/// search over `I`, followed by zoomed refinement passes around the best
/// coarse cell until the grid spacing reaches `grid.target_resolution`.
pub fn loop_ratio(d: &Density, grid: RatioGrid) -> LoopRatio {
    if d.is_atomic() {
        return LoopRatio { value: f64::INFINITY, i1: 0.0, i: 0.0, i2: 0.0, resolution: 0.0 };
    }
    let mut best = LoopRatio { value: 0.0, i1: 0.0, i: 0.0, i2: 1.0, resolution: 1.0 };
    let consider = |i1: f64, i2: f64, best: &mut LoopRatio| {
        if i2 - i1 <= 0.0 {
            return;
        }
        let (i, r) = ratio_at(d, i1, i2, grid.inner_scan);
        if r > best.value {
            *best = LoopRatio { value: r, i1, i, i2, resolution: best.resolution };
        }
    };

    let n = grid.coarse.max(2);
    let h = 1.0 / (n - 1) as f64;
    let mut axis: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    // concentrated densities need candidate loops at their own scale
    axis.extend(d.feature_points().into_iter().filter(|p| (0.0..=1.0).contains(p)));
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    for (a, &i1) in axis.iter().enumerate() {
        for &i2 in &axis[a + 1..] {
            consider(i1, i2, &mut best);
        }
    }
    best.resolution = h;

    let m = grid.refine.max(3);
    let mut half = 2.0 * h;
    while best.resolution > grid.target_resolution {
        let (c1, c2) = (best.i1, best.i2);
        let lo1 = (c1 - half).max(0.0);
        let hi1 = (c1 + half).min(1.0);
        let lo2 = (c2 - half).max(0.0);
        let hi2 = (c2 + half).min(1.0);
        let s1 = (hi1 - lo1) / (m - 1) as f64;
        let s2 = (hi2 - lo2) / (m - 1) as f64;
        for a in 0..m {
            for b in 0..m {
                consider(lo1 + a as f64 * s1, lo2 + b as f64 * s2, &mut best);
            }
        }
        best.resolution = s1.max(s2);
        half = 2.0 * best.resolution;
    }
    best
}

/// Partition the triangle into an `n x n` grid of cells and place one relay
/// at each cell centre (centroid for diagonal half-cells) weighted by the
/// cell mass. Atomic measures map to one relay per atom. All relays start
/// in the state induced by `mem`.
pub fn discretize(d: &Density, n: usize, mem: &MemoryStaircase) -> Result<RelayBank> {
    if n == 0 {
        return Err(Error::Domain("discretization needs at least one cell per axis".into()));
    }
    let mut relays = Vec::new();
    let mut push = |a1: f64, a2: f64, w: f64| -> Result<()> {
        let thresholds = Thresholds::new(a1, a2)?;
        let state = RelayState::from(mem.is_on(a1, a2));
        relays.push(Relay { thresholds, weight: w, state });
        Ok(())
    };
    if let Measure::Discrete { atoms } = d.measure() {
        for a in atoms {
            push(a.alpha1, a.alpha2, a.weight)?;
        }
    } else {
        let h = 1.0 / n as f64;
        for j in 0..n {
            let (lo2, hi2) = (j as f64 * h, (j + 1) as f64 * h);
            for i in 0..j {
                let (lo1, hi1) = (i as f64 * h, (i + 1) as f64 * h);
                push(0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2), d.rect_mass(lo1, hi1, lo2, hi2))?;
            }
            push(lo2 + h / 3.0, lo2 + 2.0 * h / 3.0, d.triangle_mass(lo2, hi2))?;
        }
    }
    RelayBank::new(relays, mem.current(), d.v_nat())
}

/// Either representation of the operator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreisachState {
    Staircase(MemoryStaircase),
    RelayBank(RelayBank),
}

impl PreisachState {
    pub fn input(&self) -> f64 {
        match self {
            PreisachState::Staircase(s) => s.current(),
            PreisachState::RelayBank(b) => b.input(),
        }
    }

    pub fn update(&mut self, x: f64) {
        match self {
            PreisachState::Staircase(s) => s.update(x),
            PreisachState::RelayBank(b) => b.update(x),
        }
    }

    pub fn output(&self, d: &Density) -> f64 {
        match self {
            PreisachState::Staircase(s) => s.output(d),
            PreisachState::RelayBank(b) => b.output(),
        }
    }
}

/// q-weighted measure of the set of relays whose states differ.
pub fn state_distance(a: &PreisachState, b: &PreisachState, d: &Density) -> Result<f64> {
    match (a, b) {
        (PreisachState::Staircase(x), PreisachState::Staircase(y)) => Ok(staircase_distance(x, y, d)),
        (PreisachState::RelayBank(x), PreisachState::RelayBank(y)) => x.distance(y),
        _ => Err(Error::MixedRepresentations),
    }
}

/// Integrates, over `alpha2`, the column mass between the two ON
/// boundaries. The boundaries are piecewise constant or diagonal between
/// recorded extrema, so those extrema are used as quadrature breakpoints.
pub fn staircase_distance(a: &MemoryStaircase, b: &MemoryStaircase, d: &Density) -> f64 {
    if let Measure::Discrete { atoms } = d.measure() {
        return atoms
            .iter()
            .filter(|t| a.is_on(t.alpha1, t.alpha2) != b.is_on(t.alpha1, t.alpha2))
            .map(|t| t.weight)
            .sum();
    }
    if a == b {
        return 0.0;
    }
    let mut breaks = a.alpha2_breaks();
    breaks.extend(b.alpha2_breaks());
    breaks.extend(d.feature_points());
    let column = |a2: f64| {
        let (pa, pb) = (a.on_boundary(a2), b.on_boundary(a2));
        d.column_mass(a2, pa.min(pb), pa.max(pb))
    };
    integrate(column, 0.0, 1.0, &breaks, 1e-15, 1e-12).value
}
