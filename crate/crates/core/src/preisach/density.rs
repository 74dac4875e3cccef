//! Relay weight measures on the Preisach half-plane triangle
//! `0 <= alpha1 < alpha2 <= 1`.
//!
//! Gaussian and uniform densities integrate rectangles in closed form
//! (products of one-dimensional error-function integrals for the separable
//! Gaussian). Triangles touching the diagonal need one 1-D quadrature with
//! the inner integral done analytically.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::numeric::{composite_gl, gauss_legendre};

/// Gauss–Legendre panels for triangle integrals are at most this many
/// standard deviations wide. The integrand is entire and varies on the
/// scale sigma, so 16 nodes per panel reach round-off.
const PANEL_SIGMAS: f64 = 2.0;
/// Beyond this many standard deviations the Gaussian factor is below 1e-31.
const GAUSS_CUTOFF: f64 = 12.0;

/// A point mass `weight` at the threshold pair `(alpha1, alpha2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub alpha1: f64,
    pub alpha2: f64,
    pub weight: f64,
}

/// Truncated bivariate Gaussian `A exp(-((a1-m1)^2 + (a2-m2)^2) / (2 sigma^2))`
/// normalised to unit mass on the triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub alpha_m1: f64,
    pub alpha_m2: f64,
    pub sigma: f64,
    amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Gaussian(Gaussian),
    Uniform { c: f64 },
    Discrete { atoms: Vec<Atom> },
}

/// Weight measure of the relays together with the baseline output `v_nat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct Density {
    measure: Measure,
    v_nat: f64,
}

/// ∫_a^b exp(-(x-m)^2/(2 sigma^2)) dx, evaluated on the erfc tail that
/// avoids cancellation.
pub(crate) fn gauss_mass(a: f64, b: f64, m: f64, sigma: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = sigma * SQRT_2;
    let (za, zb) = ((a - m) / s, (b - m) / s);
    let diff = if za >= 0.0 {
        libm::erfc(za) - libm::erfc(zb)
    } else if zb <= 0.0 {
        libm::erfc(-zb) - libm::erfc(-za)
    } else {
        libm::erf(zb) - libm::erf(za)
    };
    diff * sigma * (PI / 2.0).sqrt()
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

fn gauss(x: f64, m: f64, sigma: f64) -> f64 {
    let z = (x - m) / sigma;
    (-0.5 * z * z).exp()
}

impl Gaussian {
    /// Builds the normalised Gaussian; the amplitude comes from integrating
    /// the unit-amplitude kernel over the triangle.
    pub fn new(alpha_m1: f64, alpha_m2: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("gaussian sigma must be positive, got {sigma}")));
        }
        if !alpha_m1.is_finite() || !alpha_m2.is_finite() {
            return Err(Error::InvalidDensity("gaussian centre must be finite".into()));
        }
        let mut g = Gaussian { alpha_m1, alpha_m2, sigma, amplitude: 1.0 };
        let mass = g.triangle(0.0, 1.0);
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity(format!(
                "gaussian centred at ({alpha_m1}, {alpha_m2}) with sigma {sigma} has no mass on the triangle"
            )));
        }
        g.amplitude = 1.0 / mass;
        Ok(g)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub(crate) fn value(&self, a1: f64, a2: f64) -> f64 {
        self.amplitude * gauss(a1, self.alpha_m1, self.sigma) * gauss(a2, self.alpha_m2, self.sigma)
    }

    fn rect(&self, a1_lo: f64, a1_hi: f64, a2_lo: f64, a2_hi: f64) -> f64 {
        let m1 = gauss_mass(a1_lo, a1_hi, self.alpha_m1, self.sigma);
        if m1 == 0.0 {
            return 0.0;
        }
        self.amplitude * m1 * gauss_mass(a2_lo, a2_hi, self.alpha_m2, self.sigma)
    }

    fn triangle(&self, lo: f64, hi: f64) -> f64 {
        let reach = GAUSS_CUTOFF * self.sigma;
        let a = lo.max(self.alpha_m2 - reach);
        let b = hi.min(self.alpha_m2 + reach);
        if b <= a {
            return 0.0;
        }
        let panels = ((b - a) / (PANEL_SIGMAS * self.sigma)).ceil().max(1.0) as usize;
        let q = composite_gl(
            |y| gauss(y, self.alpha_m2, self.sigma) * gauss_mass(lo, y, self.alpha_m1, self.sigma),
            a,
            b,
            panels,
            gl16(),
        );
        self.amplitude * q
    }

    fn column(&self, a2: f64, lo: f64, hi: f64) -> f64 {
        self.amplitude * gauss(a2, self.alpha_m2, self.sigma) * gauss_mass(lo, hi, self.alpha_m1, self.sigma)
    }

    fn row(&self, a1: f64, lo: f64, hi: f64) -> f64 {
        self.amplitude * gauss(a1, self.alpha_m1, self.sigma) * gauss_mass(lo, hi, self.alpha_m2, self.sigma)
    }
}

impl Density {
    pub fn new(measure: Measure, v_nat: f64) -> Result<Self> {
        if !(v_nat >= 0.0) || !v_nat.is_finite() {
            return Err(Error::InvalidDensity(format!("v_nat must be finite and >= 0, got {v_nat}")));
        }
        match &measure {
            Measure::Uniform { c } if !(*c >= 0.0) || !c.is_finite() => {
                return Err(Error::InvalidDensity(format!("uniform level must be >= 0, got {c}")));
            }
            Measure::Discrete { atoms } => {
                for a in atoms {
                    if !(0.0 <= a.alpha1 && a.alpha1 < a.alpha2 && a.alpha2 <= 1.0) {
                        return Err(Error::InvalidThresholds { alpha1: a.alpha1, alpha2: a.alpha2 });
                    }
                    if !(a.weight >= 0.0) || !a.weight.is_finite() {
                        return Err(Error::InvalidDensity(format!("atom weight must be >= 0, got {}", a.weight)));
                    }
                }
            }
            _ => {}
        }
        Ok(Density { measure, v_nat })
    }

    /// Normalised truncated Gaussian with no baseline rate.
    pub fn gaussian(alpha_m1: f64, alpha_m2: f64, sigma: f64) -> Result<Self> {
        Self::new(Measure::Gaussian(Gaussian::new(alpha_m1, alpha_m2, sigma)?), 0.0)
    }

    pub fn uniform(c: f64) -> Result<Self> {
        Self::new(Measure::Uniform { c }, 0.0)
    }

    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(Measure::Discrete { atoms }, 0.0)
    }

    /// Same measure with a different baseline rate.
    pub fn with_v_nat(mut self, v_nat: f64) -> Result<Self> {
        if !(v_nat >= 0.0) || !v_nat.is_finite() {
            return Err(Error::InvalidDensity(format!("v_nat must be finite and >= 0, got {v_nat}")));
        }
        self.v_nat = v_nat;
        Ok(self)
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn v_nat(&self) -> f64 {
        self.v_nat
    }

    /// True when the measure has point masses (no bounded density).
    pub fn is_atomic(&self) -> bool {
        matches!(&self.measure, Measure::Discrete { atoms } if atoms.iter().any(|a| a.weight > 0.0))
    }

    /// Density value q(alpha1, alpha2); zero off the triangle and for atoms.
    pub fn value(&self, a1: f64, a2: f64) -> f64 {
        if !(0.0 <= a1 && a1 < a2 && a2 <= 1.0) {
            return 0.0;
        }
        match &self.measure {
            Measure::Gaussian(g) => g.value(a1, a2),
            Measure::Uniform { c } => *c,
            Measure::Discrete { .. } => 0.0,
        }
    }

    /// Mass of `alpha1 in [a1_lo, a1_hi)`, `alpha2 in (a2_lo, a2_hi]`.
    /// The rectangle must lie inside the triangle (`a1_hi <= a2_lo`).
    pub fn rect_mass(&self, a1_lo: f64, a1_hi: f64, a2_lo: f64, a2_hi: f64) -> f64 {
        if a1_hi <= a1_lo || a2_hi <= a2_lo {
            return 0.0;
        }
        debug_assert!(a1_hi <= a2_lo + 1e-15, "rectangle crosses the diagonal");
        match &self.measure {
            Measure::Gaussian(g) => g.rect(a1_lo, a1_hi, a2_lo, a2_hi),
            Measure::Uniform { c } => c * (a1_hi - a1_lo) * (a2_hi - a2_lo),
            Measure::Discrete { atoms } => atoms
                .iter()
                .filter(|a| a1_lo <= a.alpha1 && a.alpha1 < a1_hi && a2_lo < a.alpha2 && a.alpha2 <= a2_hi)
                .map(|a| a.weight)
                .sum(),
        }
    }

    /// Mass of the corner triangle `lo <= alpha1 < alpha2 <= hi`.
    pub fn triangle_mass(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if hi <= lo {
            return 0.0;
        }
        match &self.measure {
            Measure::Gaussian(g) => g.triangle(lo, hi),
            Measure::Uniform { c } => 0.5 * c * (hi - lo) * (hi - lo),
            Measure::Discrete { atoms } => atoms
                .iter()
                .filter(|a| lo <= a.alpha1 && a.alpha2 <= hi)
                .map(|a| a.weight)
                .sum(),
        }
    }

    /// Total mass of the measure over the triangle (`v_max`).
    pub fn total_mass(&self) -> f64 {
        self.triangle_mass(0.0, 1.0)
    }

    /// ∫_{lo}^{hi} q(alpha1, a2) d alpha1 for a fixed upper threshold.
    /// Zero for atomic measures.
    pub fn column_mass(&self, a2: f64, lo: f64, hi: f64) -> f64 {
        let hi = hi.min(a2);
        let lo = lo.max(0.0);
        if hi <= lo || !(0.0..=1.0).contains(&a2) {
            return 0.0;
        }
        match &self.measure {
            Measure::Gaussian(g) => g.column(a2, lo, hi),
            Measure::Uniform { c } => c * (hi - lo),
            Measure::Discrete { .. } => 0.0,
        }
    }

    /// ∫_{lo}^{hi} q(a1, alpha2) d alpha2 for a fixed lower threshold.
    /// Zero for atomic measures.
    pub fn row_mass(&self, a1: f64, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(a1);
        let hi = hi.min(1.0);
        if hi <= lo || !(0.0..=1.0).contains(&a1) {
            return 0.0;
        }
        match &self.measure {
            Measure::Gaussian(g) => g.row(a1, lo, hi),
            Measure::Uniform { c } => c * (hi - lo),
            Measure::Discrete { .. } => 0.0,
        }
    }

    /// Characteristic length scales of the measure, used to seed grids.
    pub(crate) fn feature_points(&self) -> Vec<f64> {
        match &self.measure {
            Measure::Gaussian(g) => vec![g.alpha_m1, g.alpha_m2],
            Measure::Uniform { .. } => vec![],
            Measure::Discrete { atoms } => atoms.iter().flat_map(|a| [a.alpha1, a.alpha2]).collect(),
        }
    }
}

/// Normalised Gaussian relay density with zero baseline rate.
pub fn gaussian_density(alpha_m1: f64, alpha_m2: f64, sigma: f64) -> Result<Density> {
    Density::gaussian(alpha_m1, alpha_m2, sigma)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MeasureRepr {
    Gaussian { alpha_m1: f64, alpha_m2: f64, sigma: f64 },
    Uniform { c: f64 },
    Discrete { atoms: Vec<Atom> },
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    #[serde(flatten)]
    measure: MeasureRepr,
    #[serde(default)]
    v_nat: f64,
}

impl TryFrom<DensityRepr> for Density {
    type Error = Error;

    fn try_from(r: DensityRepr) -> Result<Self> {
        let measure = match r.measure {
            MeasureRepr::Gaussian { alpha_m1, alpha_m2, sigma } => {
                Measure::Gaussian(Gaussian::new(alpha_m1, alpha_m2, sigma)?)
            }
            MeasureRepr::Uniform { c } => Measure::Uniform { c },
            MeasureRepr::Discrete { atoms } => Measure::Discrete { atoms },
        };
        Density::new(measure, r.v_nat)
    }
}

impl From<Density> for DensityRepr {
    fn from(d: Density) -> Self {
        let measure = match d.measure {
            Measure::Gaussian(g) => MeasureRepr::Gaussian {
                alpha_m1: g.alpha_m1,
                alpha_m2: g.alpha_m2,
                sigma: g.sigma,
            },
            Measure::Uniform { c } => MeasureRepr::Uniform { c },
            Measure::Discrete { atoms } => MeasureRepr::Discrete { atoms },
        };
        DensityRepr { measure, v_nat: d.v_nat }
    }
}
