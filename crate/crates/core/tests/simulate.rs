use hysir_core::preisach::{discretize, Density, MemoryStaircase, OutputCache, PreisachState};
use hysir_core::simulate::{
    integrate, orbit_averages, run, AttractorClass, ClassifyOptions, EventKind, RunSpec, SolverOptions, Trajectory,
};
use hysir_core::sir::{ModelParams, SirState};

fn baseline() -> ModelParams {
    ModelParams::new(10.8, 0.5994, 0.0006, 0.0).unwrap()
}

fn density(sigma: f64) -> Density {
    Density::gaussian(0.0002, 0.0055, sigma).unwrap()
}

fn start() -> (SirState, PreisachState) {
    (SirState::new(1e-5, 1.0 - 1e-5), PreisachState::Staircase(MemoryStaircase::virgin(1e-5).unwrap()))
}

fn simulate(sigma: f64, t_end: f64) -> Trajectory {
    let (x, m) = start();
    integrate(&baseline(), &density(sigma), x, m, t_end, SolverOptions::default()).unwrap()
}

/// Staircase after each accepted sample, rebuilt from the initial state.
fn replay(traj: &Trajectory) -> Vec<MemoryStaircase> {
    let PreisachState::Staircase(m) = &traj.initial_state else { panic!("staircase run expected") };
    let mut m = m.clone();
    let mut out = vec![m.clone()];
    for x in &traj.samples[1..] {
        m.update(x.i);
        out.push(m.clone());
    }
    out
}

#[test]
fn infection_free_axis_is_invariant() {
    let p = ModelParams::new(10.8, 0.5994, 0.0006, 0.01).unwrap();
    let d = density(0.1).with_v_nat(0.01).unwrap();
    let s0 = 0.3;
    let mem = PreisachState::Staircase(MemoryStaircase::virgin(0.0).unwrap());
    let traj = integrate(&p, &d, SirState::new(0.0, s0), mem, 2000.0, SolverOptions::default()).unwrap();
    let rate = p.mu() + p.v_nat();
    let s_inf = p.mu() / rate;
    for x in &traj.samples {
        assert_eq!(x.i, 0.0);
        assert_eq!(x.v, 0.01);
        let exact = s_inf + (s0 - s_inf) * (-rate * x.t).exp();
        assert!((x.s - exact).abs() < 1e-7, "t={} S={} exact={}", x.t, x.s, exact);
    }
    assert!(traj.events.is_empty());
}

#[test]
fn trajectory_invariants_hold() {
    let p = baseline();
    let d = density(0.1);
    let traj = simulate(0.1, 5000.0);
    let s_star = p.s_star();
    assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    for x in &traj.samples {
        assert!(x.i >= -1e-12 && x.s >= -1e-12 && x.i + x.s <= 1.0 + 1e-12, "{x:?}");
        assert!(x.v >= p.v_nat());
    }
    let turning = traj.turning_events();
    assert!(turning.len() > 10);
    for e in &turning {
        assert!((e.s - s_star).abs() < 1e-8, "{e:?}");
    }
    assert!(turning.windows(2).all(|w| w[0].kind != w[1].kind));

    // sign(dI/dt) = sign(S - S*) is constant between turning points
    let mut k = 0;
    for x in &traj.samples {
        while k < turning.len() && turning[k].t <= x.t {
            k += 1;
        }
        let expected = match k.checked_sub(1).map(|j| turning[j].kind) {
            Some(EventKind::NullclineMax) => -1.0,
            Some(EventKind::NullclineMin) | None => 1.0,
            Some(EventKind::RelaySwitch) => unreachable!(),
        };
        let g = x.s - s_star;
        assert!(g * expected > -1e-9 || turning.iter().any(|e| e.t == x.t), "t={} g={g}", x.t);
    }

    // recorded v is the operator output, and each monotone arc follows the
    // branch leaving its starting turning point
    let mems = replay(&traj);
    let mut arc: Option<OutputCache> = None;
    let mut worst: f64 = 0.0;
    for (x, m) in traj.samples.iter().zip(&mems) {
        assert!((m.output(&d) - x.v).abs() < 1e-12, "t={}", x.t);
        if let Some(c) = &arc {
            worst = worst.max((c.output_after(x.i, &d) - x.v).abs());
        }
        if turning.iter().any(|e| e.t == x.t) {
            arc = Some(OutputCache::new(m, &d));
        }
    }
    assert!(worst < 1e-9, "branch deviation {worst}");
    assert_eq!(traj.final_state, PreisachState::Staircase(mems.last().unwrap().clone()));
}

#[test]
fn successive_arcs_do_not_cross() {
    for sigma in [0.0009, 0.1] {
        let traj = simulate(sigma, 20000.0);
        let ik: Vec<f64> = traj.turning_events().iter().map(|e| e.i).collect();
        for w in ik.windows(4) {
            if w[0] < w[2] && w[2] < w[1] {
                assert!(w[2] < w[3] && w[3] <= w[1] * (1.0 + 1e-9), "sigma={sigma}: {w:?}");
            }
        }
    }
}

#[test]
fn halving_tolerances_barely_moves_the_end_state() {
    let (x, m) = start();
    let base = SolverOptions::default();
    let fine = SolverOptions {
        abs_tol_i: base.abs_tol_i / 2.0,
        abs_tol_s: base.abs_tol_s / 2.0,
        rel_tol: base.rel_tol / 2.0,
        ..base
    };
    let a = integrate(&baseline(), &density(0.1), x, m.clone(), 400.0, base).unwrap().last();
    let b = integrate(&baseline(), &density(0.1), x, m, 400.0, fine).unwrap().last();
    let tol_i = base.abs_tol_i + base.rel_tol * a.i;
    let tol_s = base.abs_tol_s + base.rel_tol * a.s;
    assert!((a.i - b.i).abs() < 10.0 * tol_i, "{} vs {}", a.i, b.i);
    assert!((a.s - b.s).abs() < 10.0 * tol_s, "{} vs {}", a.s, b.s);
}

#[test]
fn runs_are_deterministic() {
    assert_eq!(simulate(0.01, 2000.0), simulate(0.01, 2000.0));
}

#[test]
fn averages_do_not_depend_on_period_count() {
    let traj = simulate(0.0009, 50000.0);
    let one = orbit_averages(&traj, 1).unwrap();
    let three = orbit_averages(&traj, 3).unwrap();
    for (a, b) in [(one.i_bar, three.i_bar), (one.s_bar, three.s_bar), (one.v_bar, three.v_bar)] {
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
    }
    let flat = simulate(0.1, 5.0);
    assert!(orbit_averages(&flat, 1).is_err());
}

#[test]
fn relay_bank_run_tracks_the_staircase_run() {
    let p = baseline();
    let d = density(0.1);
    let (x, m) = start();
    let exact = integrate(&p, &d, x, m, 300.0, SolverOptions::default()).unwrap();
    let mut gaps = Vec::new();
    for n in [50, 200] {
        let bank = discretize(&d, n, &MemoryStaircase::virgin(1e-5).unwrap()).unwrap();
        let traj = integrate(&p, &d, x, PreisachState::RelayBank(bank), 300.0, SolverOptions::default()).unwrap();
        assert!(traj.events.iter().any(|e| e.kind == EventKind::RelaySwitch));
        let (a, b) = (traj.last(), exact.last());
        gaps.push((a.v - b.v).abs() + (a.s - b.s).abs());
    }
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn run_extends_until_decided() {
    let (x, m) = start();
    let spec = RunSpec { t_end: 12500.0, discard: None, max_doublings: 2 };
    let out = run(&baseline(), &density(0.0009), x, m, spec, SolverOptions::default(), &ClassifyOptions::default())
        .unwrap();
    assert!(matches!(out.classification.class, AttractorClass::PeriodicOrbit { .. }));
    assert_eq!(out.t_end, 12500.0 * f64::from(1u32 << out.doublings));
}
