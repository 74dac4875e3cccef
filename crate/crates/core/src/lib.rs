//! SIR epidemic dynamics with a vaccination rate driven by a Preisach
//! hysteresis operator of the infected fraction.

pub mod equilibria;
pub mod error;
pub mod lyapunov;
pub mod numeric;
pub mod preisach;
pub mod scenario;
pub mod simulate;
pub mod sir;

pub use error::{Error, Result};
