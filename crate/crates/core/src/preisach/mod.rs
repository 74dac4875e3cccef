//! Preisach hysteresis operator: non-ideal relays, relay banks and the
//! continuous operator with exact staircase memory.

mod density;
mod geometry;
mod relay;
mod staircase;

pub use density::{gaussian_density, Atom, Density, Gaussian, Measure};
pub use geometry::{
    branch_eval, discretize, lipschitz_bound, lipschitz_k, loop_ratio, loop_width, staircase_distance, state_distance, LoopRatio,
    PreisachState, RatioGrid,
};
pub use relay::{relay_step, Relay, RelayBank, RelayState, Thresholds};
pub use staircase::{InitMode, MemoryStaircase, OutputCache, Trend, REVERSAL_TOL};
