//! Branch-wise Lyapunov functions, level-set convexity and the sufficient
//! condition that rules out periodic orbits.

use serde::{Deserialize, Serialize};

use crate::equilibria::{Direction, EndemicEquilibrium};
use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::preisach::{lipschitz_k, loop_ratio, Density, RatioGrid};
use crate::sir::{r0, vector_field, ModelParams, SirState};

/// `(1/beta) ∫_a^b (v(i) - v_ref) / i di`, by adaptive quadrature in
/// `ln i`, where the integrand stays bounded even when `I` spans many
/// decades between the end points.
fn branch_term(a: f64, b: f64, v_ref: f64, branch: &dyn Fn(f64) -> f64, beta: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let q = integrate(|u| branch(u.exp()) - v_ref, a.ln(), b.ln(), &[], 1e-15, 1e-10);
    q.value / beta
}

fn check_positive(i: f64, s: f64) -> Result<()> {
    if !(i > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("Lyapunov function needs I > 0 and S > 0, got I={i}, S={s}")));
    }
    Ok(())
}

/// `V = S - S* ln(S/S*) + I - I* ln(I/I*) + (1/beta) ∫_{I*}^{I} (v(i) - v(I*)) / i di`
/// for the branch `v` through the equilibrium `eq`.
pub fn lyapunov_value(
    i: f64,
    s: f64,
    eq: &EndemicEquilibrium,
    branch: &dyn Fn(f64) -> f64,
    p: &ModelParams,
) -> Result<f64> {
    check_positive(i, s)?;
    let (is, ss) = (eq.i_star, eq.s_star);
    let v_ref = branch(is);
    Ok(s - ss * (s / ss).ln() + i - is * (i / is).ln() + branch_term(is, i, v_ref, branch, p.beta()))
}

/// `V(to) - V(from)`, accurate for nearby points because the integral runs
/// only between them.
pub fn lyapunov_increment(
    from: SirState,
    to: SirState,
    eq: &EndemicEquilibrium,
    branch: &dyn Fn(f64) -> f64,
    p: &ModelParams,
) -> Result<f64> {
    check_positive(from.i, from.s)?;
    check_positive(to.i, to.s)?;
    let (is, ss) = (eq.i_star, eq.s_star);
    let v_ref = branch(is);
    Ok((to.s - from.s) - ss * (to.s / from.s).ln() + (to.i - from.i) - is * (to.i / from.i).ln()
        + branch_term(from.i, to.i, v_ref, branch, p.beta()))
}

/// Closed-form derivative of `V` along the flow: `-mu (S - S*)^2 / (S* S)`.
pub fn dissipation(s: f64, eq: &EndemicEquilibrium, p: &ModelParams) -> f64 {
    let ss = eq.s_star;
    -p.mu() * (s - ss) * (s - ss) / (ss * s)
}

/// Gradient `(V_I, V_S)`.
pub fn lyapunov_gradient(i: f64, s: f64, eq: &EndemicEquilibrium, branch: &dyn Fn(f64) -> f64, p: &ModelParams) -> (f64, f64) {
    let vi = 1.0 - eq.i_star / i + (branch(i) - branch(eq.i_star)) / (p.beta() * i);
    let vs = 1.0 - eq.s_star / s;
    (vi, vs)
}

/// Chain-rule derivative `V_I dI/dt + V_S dS/dt` with `v = branch(I)`.
pub fn lyapunov_derivative(i: f64, s: f64, eq: &EndemicEquilibrium, branch: &dyn Fn(f64) -> f64, p: &ModelParams) -> f64 {
    let (vi, vs) = lyapunov_gradient(i, s, eq, branch, p);
    let (di, ds) = vector_field(SirState::new(i, s), branch(i), p);
    vi * di + vs * ds
}

/// Increment of the Lyapunov function anchored at the infection-free point
/// `S0 = mu / (mu + v_nat)`:
/// `W = S - S0 ln S + I + (1/beta) ∫_0^I (v(i) - v_nat) / i di`.
/// Along the flow `dW/dt = -mu (S - S0)^2 / (S S0) + (beta S0 - delta)(I + (v - v_nat)/beta)`,
/// which is nonpositive when `R0 <= 1`.
pub fn extinction_increment(from: SirState, to: SirState, branch: &dyn Fn(f64) -> f64, p: &ModelParams) -> Result<f64> {
    check_positive(from.i, from.s)?;
    check_positive(to.i, to.s)?;
    let s0 = p.mu() / (p.mu() + p.v_nat());
    Ok((to.s - from.s) - s0 * (to.s / from.s).ln() + (to.i - from.i)
        + branch_term(from.i, to.i, p.v_nat(), branch, p.beta()))
}

/// Axis-aligned region of the `(I, S)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(rename = "I_lo")]
    pub i_lo: f64,
    #[serde(rename = "I_hi")]
    pub i_hi: f64,
    #[serde(rename = "S_lo")]
    pub s_lo: f64,
    #[serde(rename = "S_hi")]
    pub s_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Smallest value of the curvature expression over checked points.
    pub min_value: f64,
    pub points_checked: usize,
    /// Grid points where the expression is not positive.
    pub violations: Vec<(f64, f64)>,
}

impl ConvexityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Step for the central difference of the branch.
const BRANCH_DIFF_STEP: f64 = 1e-6;

/// Evaluates the level-set curvature expression
/// `(S*/S^2) V_I^2 + ((beta I* + I v'(I) - v(I) + v(I*)) / (beta I^2)) V_S^2`
/// on an `n x n` grid over `region`; level sets of `V` are convex where it
/// is positive. Descending branches are only checked for `I <= I*`.
/// Points where the gradient vanishes are skipped.
pub fn convexity_check(
    branch: &dyn Fn(f64) -> f64,
    eq: &EndemicEquilibrium,
    direction: Direction,
    region: Region,
    n: usize,
    p: &ModelParams,
) -> ConvexityReport {
    let n = n.max(2);
    let mut report = ConvexityReport { min_value: f64::INFINITY, points_checked: 0, violations: vec![] };
    let i_hi = match direction {
        Direction::Ascending => region.i_hi,
        Direction::Descending => region.i_hi.min(eq.i_star),
    };
    let v_star = branch(eq.i_star);
    for a in 0..n {
        let i = region.i_lo + (i_hi - region.i_lo) * a as f64 / (n - 1) as f64;
        if !(i > 0.0) {
            continue;
        }
        let h = BRANCH_DIFF_STEP.min(0.5 * i);
        let dv = (branch(i + h) - branch(i - h)) / (2.0 * h);
        let coef = (p.beta() * eq.i_star + i * dv - branch(i) + v_star) / (p.beta() * i * i);
        for b in 0..n {
            let s = region.s_lo + (region.s_hi - region.s_lo) * b as f64 / (n - 1) as f64;
            if !(s > 0.0) {
                continue;
            }
            let (vi, vs) = lyapunov_gradient(i, s, eq, branch, p);
            if vi.hypot(vs) < 1e-12 {
                continue;
            }
            let value = eq.s_star / (s * s) * vi * vi + coef * vs * vs;
            report.points_checked += 1;
            report.min_value = report.min_value.min(value);
            if !(value > 0.0) {
                report.violations.push((i, s));
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStatus {
    /// All quantities computed and the inequality evaluated.
    Evaluated,
    /// `L >= beta`: the loop-ratio assumption fails, no conclusion.
    Inapplicable,
    /// `R0 <= 1`: the infection-free equilibrium attracts everything.
    InfectionFree,
}

/// Quantities entering the sufficient condition for the absence of
/// periodic orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub status: StabilityStatus,
    pub message: String,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Grid spacing reached when maximising the loop ratio.
    pub l_resolution: f64,
    pub v_max: f64,
    pub rho0: Option<f64>,
    pub rho1: Option<f64>,
    #[serde(rename = "S_m_lb")]
    pub s_m_lb: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub no_periodic_orbit_guaranteed: bool,
}

/// Safety margin on the final strict inequality.
const CERTIFY_MARGIN: f64 = 1e-12;

/// Lower bounds from the endemic-equilibrium case:
/// returns `(rho0, rho1, S_m lower bound, lhs, rhs)` for given `K`, `L`
/// and `v_max`. `L = 0` gives an infinite left side.
pub fn periodic_orbit_bounds(p: &ModelParams, k: f64, l: f64, v_max: f64) -> (f64, f64, f64, f64, f64) {
    let (beta, mu, delta) = (p.beta(), p.mu(), p.delta());
    let ss = p.s_star();
    let rho0 = (mu * (1.0 - ss) - p.v_nat() * ss) / ((beta + k) * ss);
    let excess = (v_max * ss - mu * (1.0 - ss)).max(0.0);
    let rho1 = rho0 * (-1.0 / rho0 + rho0.ln() / (beta * ss * rho0) * excess).exp();
    let s_m_lb = ss * (-1.0 + mu * (1.0 - ss) / (beta * ss * ss) * rho1.ln()).exp();
    let lhs = if l == 0.0 { f64::INFINITY } else { rho1 * (beta / l) * (1.0 - l / beta).powi(2) };
    let rhs = 4.0 * std::f64::consts::SQRT_2 * delta / mu * (1.0 + 1.0 / s_m_lb.sqrt());
    (rho0, rho1, s_m_lb, lhs, rhs)
}

/// Computes `K`, `L`, `v_max` and the bounds, and decides whether periodic
/// orbits are ruled out.
pub fn no_cycle_condition(p: &ModelParams, d: &Density) -> StabilityReport {
    let r0v = r0(p);
    let k = lipschitz_k(d);
    let ratio = loop_ratio(d, RatioGrid::default());
    let v_max = d.total_mass();
    let mut report = StabilityReport {
        status: StabilityStatus::Evaluated,
        message: String::new(),
        r0: r0v,
        k,
        l: ratio.value,
        l_resolution: ratio.resolution,
        v_max,
        rho0: None,
        rho1: None,
        s_m_lb: None,
        lhs: None,
        rhs: None,
        no_periodic_orbit_guaranteed: false,
    };
    if r0v <= 1.0 {
        report.status = StabilityStatus::InfectionFree;
        report.message = "R0 <= 1: the infection-free equilibrium is the global attractor".into();
        return report;
    }
    if ratio.value >= p.beta() {
        report.status = StabilityStatus::Inapplicable;
        report.message = format!("L = {} >= beta = {}: the test does not apply", ratio.value, p.beta());
        return report;
    }
    let (rho0, rho1, s_m_lb, lhs, rhs) = periodic_orbit_bounds(p, k, ratio.value, v_max);
    report.rho0 = Some(rho0);
    report.rho1 = Some(rho1);
    report.s_m_lb = Some(s_m_lb);
    report.lhs = Some(lhs);
    report.rhs = Some(rhs);
    // without hysteresis the left side is infinite whatever the bounds
    report.no_periodic_orbit_guaranteed = ratio.value == 0.0 || lhs > rhs + CERTIFY_MARGIN;
    report.message = if report.no_periodic_orbit_guaranteed {
        "no periodic orbits; every trajectory converges to an endemic equilibrium".into()
    } else {
        "bound inconclusive: periodic orbits are not ruled out".into()
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::endemic_from_v0;

    fn baseline() -> ModelParams {
        ModelParams::with_delta(10.8, 0.6, 0.0006, 0.0).unwrap()
    }

    #[test]
    fn value_at_equilibrium_is_sum_of_coordinates() {
        let p = baseline();
        let eq = endemic_from_v0(&p, 0.0).unwrap();
        let flat = |_: f64| 0.0;
        let v = lyapunov_value(eq.i_star, eq.s_star, &eq, &flat, &p).unwrap();
        assert!((v - (eq.i_star + eq.s_star)).abs() < 1e-15);
        assert!(lyapunov_value(0.0, 0.5, &eq, &flat, &p).is_err());
    }

    #[test]
    fn constant_branch_gives_classical_function() {
        let p = baseline();
        let eq = endemic_from_v0(&p, 0.002).unwrap();
        let flat = |_: f64| 0.002;
        let (i, s) = (0.003, 0.2);
        let classical = s - eq.s_star * (s / eq.s_star).ln() + i - eq.i_star * (i / eq.i_star).ln();
        assert!((lyapunov_value(i, s, &eq, &flat, &p).unwrap() - classical).abs() < 1e-15);
    }

    #[test]
    fn dissipation_closed_form() {
        let p = baseline();
        let eq = endemic_from_v0(&p, 0.0).unwrap();
        assert_eq!(dissipation(eq.s_star, &eq, &p), 0.0);
        let expected = -0.0006 * (0.1 - 0.6 / 10.8f64).powi(2) / (0.6 / 10.8 * 0.1);
        assert!((dissipation(0.1, &eq, &p) - expected).abs() < 1e-18);
    }

    #[test]
    fn chain_rule_matches_dissipation_on_a_smooth_branch() {
        let p = baseline();
        let branch = |i: f64| 0.001 + 50.0 * i * i;
        let eq = crate::equilibria::endemic_on_curve(&p, branch).unwrap();
        for &(i, s) in &[(1e-4, 0.03), (2e-3, 0.5), (8e-4, 0.0556)] {
            let a = lyapunov_derivative(i, s, &eq, &branch, &p);
            let b = dissipation(s, &eq, &p);
            assert!((a - b).abs() <= 1e-6 * b.abs() + 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_and_convex_branches_have_convex_level_sets() {
        let p = baseline();
        let region = Region { i_lo: 1e-5, i_hi: 0.01, s_lo: 0.01, s_hi: 0.9 };
        let flat = |_: f64| 0.001;
        let eq = crate::equilibria::endemic_on_curve(&p, flat).unwrap();
        assert!(convexity_check(&flat, &eq, Direction::Ascending, region, 40, &p).holds());
        let c = 3.0;
        let convex = |i: f64| c * i * i / 2.0;
        let eq = crate::equilibria::endemic_on_curve(&p, convex).unwrap();
        assert!(convexity_check(&convex, &eq, Direction::Ascending, region, 40, &p).holds());
    }

    #[test]
    fn concave_branch_is_flagged() {
        let p = baseline();
        // a steep square-root branch pushes I* down to about 1e-6
        let concave = |i: f64| 10.0 * i.sqrt();
        let eq = crate::equilibria::endemic_on_curve(&p, concave).unwrap();
        assert!(eq.i_star < 2e-6);
        let region = Region { i_lo: 1e-6, i_hi: 1e-3, s_lo: 1e-4, s_hi: 0.5 };
        let report = convexity_check(&concave, &eq, Direction::Ascending, region, 200, &p);
        assert!(!report.holds(), "min {}", report.min_value);
        assert!(report.min_value < 0.0);
    }

    #[test]
    fn zero_density_is_certified_and_low_r0_defers() {
        let p = baseline();
        let d = Density::uniform(0.0).unwrap();
        let r = no_cycle_condition(&p, &d);
        assert_eq!(r.status, StabilityStatus::Evaluated);
        assert!(r.no_periodic_orbit_guaranteed);
        let low = p.with_v_nat(0.021).unwrap();
        let r = no_cycle_condition(&low, &d);
        assert_eq!(r.status, StabilityStatus::InfectionFree);
        assert!(!r.no_periodic_orbit_guaranteed);
    }
}
