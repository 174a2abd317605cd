use proptest::prelude::*;

use sqfnlab_core::squarefn::{martingale_diff, DensityHistogram};
use sqfnlab_core::tree::haar;
use sqfnlab_core::*;

fn lebesgue() -> Measure {
    Measure::lebesgue()
}

/// Atoms in `[0,1)` plus a histogram on level `level` cells.
fn measure_strategy() -> impl Strategy<Value = Measure> {
    let atoms = prop::collection::vec((0.0..1.0f64, 0.01..1.0f64), 0..6);
    let cells = (0u32..5).prop_flat_map(|l| (Just(l), prop::collection::vec(0.0..1.0f64, 1usize << l)));
    (atoms, cells).prop_filter_map("empty measure", |(atoms, (level, masses))| {
        let atoms = atoms
            .into_iter()
            .map(|(position, weight)| Atom { position, weight })
            .collect();
        let pieces = Measure::from_cells(level, &masses).ok()?.pieces().to_vec();
        let m = Measure::new(atoms, pieces).ok()?;
        (!m.is_zero()).then(|| m.normalized())
    })
}

/// Strictly positive histogram, so every dyadic cell has mass.
fn positive_histogram(level: u32) -> impl Strategy<Value = Measure> {
    prop::collection::vec(0.05..1.0f64, 1usize << level)
        .prop_map(move |m| Measure::from_cells(level, &m).unwrap().normalized())
}

fn dyadic_strategy(max_level: u32) -> impl Strategy<Value = DyadicInterval> {
    (0..=max_level).prop_flat_map(|l| (0..1i64 << l).prop_map(move |k| DyadicInterval::standard(l, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measure_bookkeeping(m in measure_strategy()) {
        let parts: f64 = m.atoms().iter().map(|a| a.weight).sum::<f64>()
            + m.pieces().iter().map(|p| p.mass).sum::<f64>();
        prop_assert!((m.total() - parts).abs() <= 1e-12 * parts.max(1.0));
        for w in m.pieces().windows(2) {
            prop_assert!(w[0].right <= w[1].left);
        }
        for p in m.pieces() {
            prop_assert!(0.0 <= p.left && p.left < p.right && p.right <= 1.0 && p.mass >= 0.0);
        }
        for a in m.atoms() {
            prop_assert!((0.0..=1.0).contains(&a.position) && a.weight >= 0.0);
        }
    }

    #[test]
    fn transport_is_a_bounded_metric(a in measure_strategy(), b in measure_strategy()) {
        let ab = w1_supported(&a, &b).unwrap().value;
        let ba = w1_supported(&b, &a).unwrap().value;
        prop_assert!(ab >= 0.0 && (ab - ba).abs() < 1e-12);
        prop_assert_eq!(w1_supported(&a, &a).unwrap().value, 0.0);
        let lower = w1_oracle(&a, &b, 4096);
        prop_assert!(lower <= ab + 1e-12 && ab <= lower + 1.0 / 4096.0 + 1e-12);
        prop_assert!(ab <= w1_unrestricted(&a, &b).unwrap() + 1e-12);
    }

    #[test]
    fn dyadic_navigation_round_trips(iv in dyadic_strategy(20), k in 0u32..6) {
        prop_assert_eq!(iv.len(), (-(iv.level as f64)).exp2());
        let [l, r] = iv.children().unwrap();
        prop_assert_eq!(l.parent().unwrap(), iv);
        prop_assert_eq!(r.parent().unwrap(), iv);
        prop_assert_eq!(l.unit_interval().b, r.unit_interval().a);
        let down = navigate(&iv, Step::MinusChain(k)).unwrap();
        prop_assert_eq!(down.ancestor(iv.level), Some(iv));
        prop_assert_eq!(down.unit_interval().a, iv.unit_interval().a);
    }

    #[test]
    fn doubling_constant_is_the_worst_ratio(nu in positive_histogram(4)) {
        let sys = DyadicSystem::standard();
        let report = doubling_constant(&nu, &sys, 4);
        let mut worst: f64 = 1.0;
        for l in 1..=4u32 {
            for k in 0..1i64 << l {
                let c = DyadicInterval::standard(l, k);
                worst = worst.max(nu.mass_of(&c.parent().unwrap().unit_interval()) / nu.mass_of(&c.unit_interval()));
            }
        }
        prop_assert!((report.constant - worst).abs() < 1e-12);
    }

    #[test]
    fn alpha_ranges(a in measure_strategy(), b in measure_strategy(), iv in dyadic_strategy(4)) {
        let g = iv.unit_interval();
        let v = alpha(&a, &b, &g);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&v));
        prop_assert_eq!(alpha(&a, &a, &g), 0.0);
        let s = alpha_smooth(&a, &b, &g);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&s));
    }

    #[test]
    fn forests_are_coherent_partitions(mu in positive_histogram(5), eps in 0.005..0.2f64) {
        let f = stopping_forest(&mu, &lebesgue(), eps, 6, StopMode::Interval).unwrap();
        for t in &f.trees {
            prop_assert!(t.check_invariants().is_ok());
        }
        for l in 0..=6u32 {
            for k in 0..1i64 << l {
                let iv = DyadicInterval::standard(l, k);
                prop_assert_eq!(f.trees.iter().filter(|t| t.contains(&iv)).count(), 1);
            }
        }
    }

    #[test]
    fn haar_coefficients_are_delta(mu in positive_histogram(5), nu in positive_histogram(4)) {
        let t = Tree::full(&mu, &nu, DyadicInterval::ROOT, 6).unwrap();
        let sys = haar(&mu, &nu, &t).unwrap();
        for (iv, c) in &sys.coefficients {
            prop_assert!((c.a - c.a_alt).abs() < 1e-12);
            prop_assert!((c.a.abs() - delta(&mu, &nu, &iv.unit_interval())).abs() < 1e-12);
        }
    }

    #[test]
    fn profiles_are_nondecreasing(mu in positive_histogram(5), x in 0.001..0.999f64) {
        let p = dyadic_square_profile(&mu, &lebesgue(), &DyadicSystem::standard(), &[x], 8).unwrap();
        let row = &p.partial_sums[0];
        prop_assert!(row[0] >= 0.0);
        prop_assert!(row.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cz_invariants(mu in positive_histogram(6), lambda in 1.0..6.0f64) {
        let sys = DyadicSystem::standard();
        let cz = cz_decompose(&mu, &lebesgue(), &sys, lambda, 7).unwrap();
        prop_assert!(cz.reconstruction_error(&mu, &lebesgue(), &sys) < 1e-12);
        prop_assert!(cz.bad_nu_mass() < 1.0 / lambda);
        prop_assert!(cz.good_density_max(&lebesgue(), &sys) <= 2.0 * lambda * (1.0 + 1e-12));
        prop_assert!((cz.good.total() - mu.total()).abs() < 1e-12);
    }

    #[test]
    fn martingale_differences_are_orthogonal(
        values in prop::collection::vec(0.0..3.0f64, 8),
        nu in positive_histogram(4),
    ) {
        let g = DensityHistogram::new(3, values).unwrap();
        let t = martingale_diff(&g, &nu, &DyadicInterval::ROOT, 4).unwrap();
        let keys: Vec<_> = t.entries.keys().copied().filter(|j| j.level < 4).collect();
        for j in &keys {
            let e = t.entries[j];
            let [l, r] = j.children().unwrap();
            let mean = e.diffs[0] * t.entries[&l].nu_mass + e.diffs[1] * t.entries[&r].nu_mass;
            prop_assert!(mean.abs() < 1e-12);
            for k in &keys {
                if j != k {
                    prop_assert!(t.inner_product(j, k).unwrap().abs() < 1e-12);
                }
            }
        }
    }
}
