use hysir_core::preisach::{
    branch_eval, discretize, lipschitz_bound, lipschitz_k, loop_ratio, loop_width, staircase_distance, Density, MemoryStaircase,
    OutputCache, RatioGrid,
};
use proptest::prelude::*;

fn walk(path: &[f64]) -> MemoryStaircase {
    let mut m = MemoryStaircase::virgin(0.0).unwrap();
    for &x in path {
        m.update(x);
    }
    m
}

fn gaussian() -> impl Strategy<Value = Density> {
    (0.0..0.6f64, 0.2..0.9f64, 0.03..0.3f64).prop_map(|(m1, m2, s)| Density::gaussian(m1, m2, s).unwrap())
}

/// Brute-force relay field on the cell centres of a `n x n` grid, driven
/// sample by sample with closed thresholds.
struct Field {
    relays: Vec<(f64, f64, bool)>,
}

impl Field {
    fn new(n: usize) -> Self {
        let h = 1.0 / n as f64;
        let mut relays = Vec::new();
        for j in 0..n {
            for i in 0..j {
                relays.push(((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, false));
            }
        }
        Field { relays }
    }

    fn drive(&mut self, x: f64) {
        for r in &mut self.relays {
            if x >= r.1 {
                r.2 = true;
            } else if x <= r.0 {
                r.2 = false;
            }
        }
    }
}

fn path(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn staircase_matches_relay_field(p in path(1..30)) {
        let mut field = Field::new(200);
        let mut mem = MemoryStaircase::virgin(0.0).unwrap();
        for (k, &x) in p.iter().enumerate() {
            field.drive(x);
            mem.update(x);
            if k + 1 == p.len() || k == p.len() / 2 {
                let mismatches = field.relays.iter().filter(|r| mem.is_on(r.0, r.1) != r.2).count();
                prop_assert_eq!(mismatches, 0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simple_periodic_input_is_monocyclic(
        history in path(0..12),
        (lo, hi) in (0.0..1.0f64, 0.0..1.0f64).prop_filter("distinct", |(a, b)| (a - b).abs() > 1e-6)
            .prop_map(|(a, b)| (a.min(b), a.max(b))),
        mut up in proptest::collection::vec(0.0..1.0f64, 0..6),
        mut down in proptest::collection::vec(0.0..1.0f64, 0..6),
        d in gaussian(),
    ) {
        up.sort_by(f64::total_cmp);
        down.sort_by(|a, b| b.total_cmp(a));
        let mut period: Vec<f64> = up.iter().map(|t| lo + t * (hi - lo)).collect();
        period.push(hi);
        period.extend(down.iter().map(|t| lo + t * (hi - lo)));
        period.push(lo);

        let mut mem = walk(&history);
        let mut outputs = Vec::new();
        let mut states = Vec::new();
        for _ in 0..3 {
            let mut out = Vec::new();
            for &x in &period {
                mem.update(x);
                out.push(mem.output(&d));
            }
            outputs.push(out);
            states.push(mem.clone());
        }
        prop_assert_eq!(&states[0], &states[1]);
        prop_assert_eq!(&states[1], &states[2]);
        prop_assert_eq!(&outputs[1], &outputs[2]);
    }

    #[test]
    fn output_obeys_lipschitz_bound(
        history in path(0..10),
        history_noise in proptest::collection::vec(-0.05..0.05f64, 10),
        input in path(1..20),
        noise in proptest::collection::vec(-0.02..0.02f64, 20),
        d in gaussian(),
    ) {
        let k = lipschitz_bound(&d);
        prop_assert!(k >= 1.0 - 1e-9);
        let perturb = |x: f64, e: f64| (x + e).clamp(0.0, 1.0);
        let h2: Vec<f64> = history.iter().zip(&history_noise).map(|(&x, &e)| perturb(x, e)).collect();
        let i2: Vec<f64> = input.iter().zip(&noise).map(|(&x, &e)| perturb(x, e)).collect();
        let (mut a, mut b) = (walk(&history), walk(&h2));
        let dist = staircase_distance(&a, &b, &d);
        let mut sup_v = (a.output(&d) - b.output(&d)).abs();
        let mut sup_i = (a.current() - b.current()).abs();
        for (&x, &y) in input.iter().zip(&i2) {
            a.update(x);
            b.update(y);
            sup_v = sup_v.max((a.output(&d) - b.output(&d)).abs());
            sup_i = sup_i.max((x - y).abs());
        }
        prop_assert!(sup_v <= k * (dist + sup_i) + 1e-9, "{} > {} * ({} + {})", sup_v, k, dist, sup_i);
    }

    #[test]
    fn cached_output_matches_direct(history in path(0..40), probes in path(1..10), d in gaussian()) {
        let mem = walk(&history);
        let cache = OutputCache::new(&mem, &d);
        for &x in &probes {
            let direct = mem.updated(x).output(&d);
            prop_assert!((cache.output_after(x, &d) - direct).abs() <= 1e-12, "{x}");
        }
        let mut cache = OutputCache::new(&MemoryStaircase::virgin(0.0).unwrap(), &d);
        let mut mem = MemoryStaircase::virgin(0.0).unwrap();
        for &x in history.iter().chain(&probes) {
            cache.commit(x, &d);
            mem.update(x);
        }
        let rebuilt = OutputCache::new(&mem, &d);
        prop_assert!((cache.output_after(mem.current(), &d) - rebuilt.output_after(mem.current(), &d)).abs() <= 1e-12);
    }

    #[test]
    fn branches_are_monotone(history in path(1..20), targets in path(8), d in gaussian()) {
        let mem = walk(&history);
        let cur = mem.current();
        let mut up: Vec<f64> = targets.iter().map(|t| cur + t * (1.0 - cur)).collect();
        up.sort_by(f64::total_cmp);
        let asc: Vec<f64> = up.iter().map(|&x| branch_eval(&mem, &d, x)).collect();
        prop_assert!(asc.windows(2).all(|w| w[1] >= w[0] - 1e-13), "{:?} {:?}", up, asc);
        let mut down: Vec<f64> = targets.iter().map(|t| cur * t).collect();
        down.sort_by(|a, b| b.total_cmp(a));
        let desc: Vec<f64> = down.iter().map(|&x| branch_eval(&mem, &d, x)).collect();
        prop_assert!(desc.windows(2).all(|w| w[1] <= w[0] + 1e-13));
    }

    #[test]
    fn loop_width_is_gap_between_branches(
        (i1, i, i2) in (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c)| {
            let mut v = [a, b, c];
            v.sort_by(f64::total_cmp);
            (v[0], v[1], v[2])
        }).prop_filter("non-degenerate", |(a, _, c)| c - a > 1e-6),
        d in gaussian(),
    ) {
        // the second oscillation between i1 and i2 retraces the loop
        let mut top = walk(&[i2, i1, i2]);
        let bottom = top.updated(i1);
        let desc = branch_eval(&top, &d, i);
        let asc = branch_eval(&bottom, &d, i);
        let w = loop_width(&d, i1, i, i2).unwrap();
        prop_assert!((desc - asc - w).abs() <= 1e-12, "{} vs {}", desc - asc, w);
        top.update(i);
        prop_assert!(w >= 0.0);
    }

    #[test]
    fn relay_bank_converges_at_first_order(p in path(1..15), d in gaussian()) {
        let mem = walk(&p);
        let exact = mem.output(&d);
        let Some(g) = (match d.measure() { hysir_core::preisach::Measure::Gaussian(g) => Some(*g), _ => None }) else {
            unreachable!()
        };
        let q_max = g.amplitude();
        for n in [25usize, 50, 100, 200] {
            let bank = discretize(&d, n, &mem).unwrap();
            // every cell of a staircase boundary or the diagonal carries at most q_max / n^2
            let bound = 4.0 * q_max / n as f64;
            prop_assert!((bank.output() - exact).abs() <= bound, "n={}: {} > {}", n, (bank.output() - exact).abs(), bound);
            prop_assert!((bank.total_weight() - d.total_mass()).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn loop_ratio_never_exceeds_k(d in gaussian()) {
        let l = loop_ratio(&d, RatioGrid::default());
        prop_assert!(l.value <= lipschitz_k(&d) + 1e-9, "L={} K={}", l.value, lipschitz_k(&d));
        prop_assert!(l.i1 <= l.i && l.i <= l.i2);
    }
}

#[test]
fn column_constant_alone_is_exceeded_by_a_shifted_input() {
    // rise, fall, rise again, and the same path shifted up by eps: every
    // piece of the staircase boundary moves the same way
    let d = Density::gaussian(0.3, 0.6, 0.1).unwrap();
    let eps = 1e-4;
    let path = [0.6, 0.3, 0.5];
    let a = walk(&path);
    let b = walk(&path.map(|x| x + eps));
    let gap = (b.output(&d) - a.output(&d)).abs();
    assert!(gap > lipschitz_k(&d) * eps * 1.1, "{gap} {} {}", lipschitz_k(&d), lipschitz_bound(&d));
    assert!(gap <= lipschitz_bound(&d) * eps);
}
