//! Randomized invariants of the region evaluators and balance factor.

mod common;

use proptest::prelude::*;

use treecap::geometry::{decompose, place_nodes};
use treecap::regions::{membership_unicast, Direction, RegionSpec, TrafficKind};
use treecap::traffic::{balance_factor_unicast, UnicastTraffic};

fn traffic_from(entries: &[(usize, usize, f64)], n: usize) -> UnicastTraffic {
    let mut t = UnicastTraffic::new();
    for &(a, b, r) in entries {
        let src = a % n;
        let dst = b % n;
        if src != dst {
            t.add(src, dst, r).unwrap();
        }
    }
    t
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::vec((0..n, 0..n, 0.01f64..10.0), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplier_scales_inversely(raw in entries(64), c in 0.1f64..10.0) {
        let p = place_nodes(64, 5).unwrap();
        let g = decompose(&p).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let t = traffic_from(&raw, 64);
        prop_assume!(!t.is_empty());
        let r1 = membership_unicast(&t, &g, &spec).unwrap().max_multiplier;
        let r2 = membership_unicast(&t.scaled(c), &g, &spec).unwrap().max_multiplier;
        prop_assert!((r1 - c * r2).abs() <= 1e-9 * r1.abs());
    }

    #[test]
    fn balance_factor_is_scale_invariant(raw in entries(64), c in 0.1f64..10.0) {
        let p = place_nodes(64, 5).unwrap();
        let g = decompose(&p).unwrap();
        let t = traffic_from(&raw, 64);
        prop_assume!(!t.is_empty());
        let g1 = balance_factor_unicast(&t, &g).unwrap().gamma;
        let g2 = balance_factor_unicast(&t.scaled(c), &g).unwrap().gamma;
        if g1.is_finite() {
            prop_assert!((g1 - g2).abs() <= 1e-9 * g1.max(1.0));
        } else {
            prop_assert!(g2.is_infinite());
        }
    }

    #[test]
    fn adding_an_entry_never_raises_the_multiplier(
        raw in entries(64),
        extra in (0usize..64, 0usize..64, 0.01f64..10.0),
    ) {
        let p = place_nodes(64, 5).unwrap();
        let g = decompose(&p).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let t = traffic_from(&raw, 64);
        prop_assume!(!t.is_empty());
        let before = membership_unicast(&t, &g, &spec).unwrap().max_multiplier;
        let mut bigger = t.clone();
        let (a, b, r) = extra;
        prop_assume!(a % 64 != b % 64);
        bigger.add(a % 64, b % 64, r).unwrap();
        let after = membership_unicast(&bigger, &g, &spec).unwrap().max_multiplier;
        prop_assert!(after <= before * (1.0 + 1e-12));
    }

    #[test]
    fn both_directions_never_loosen_the_region(raw in entries(64)) {
        let p = place_nodes(64, 5).unwrap();
        let g = decompose(&p).unwrap();
        let t = traffic_from(&raw, 64);
        prop_assume!(!t.is_empty());
        let out = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let both = RegionSpec::new(TrafficKind::Unicast, Direction::Both, 3.0).unwrap();
        let r_out = membership_unicast(&t, &g, &out).unwrap().max_multiplier;
        let r_both = membership_unicast(&t, &g, &both).unwrap().max_multiplier;
        prop_assert!(r_both <= r_out * (1.0 + 1e-12));
    }
}
