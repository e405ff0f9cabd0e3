use proptest::prelude::*;
use sparselab_core::dyadic::{CubeSet, Domain};
use sparselab_core::maximal::{maximal, MaximalKind};
use sparselab_core::signal::{ln_oscillation, local_oscillation, GridFunction};
use sparselab_core::sparse::{carleson_constant, verify_sparse, Eta};
use sparselab_core::weights::{ap_constant, reverse_holder_report, WeightSpec, CALIBRATED_TAU};

fn weight(depth: u32) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(0.05f64..20.0, 1usize << depth)
        .prop_map(move |v| GridFunction::new(Domain::unit(depth), v).unwrap())
}

fn dyadic_values(depth: u32) -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-64i32..=64, 1usize << depth)
        .prop_map(move |v| GridFunction::new(Domain::unit(depth), v.into_iter().map(|k| k as f64 / 16.0).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_is_at_least_one_and_nonincreasing_in_p(w in weight(5), p in 1.1f64..4.0, dp in 0.1f64..3.0) {
        for scope in [MaximalKind::Dyadic(0), MaximalKind::Shifted3, MaximalKind::Exact] {
            let a = ap_constant(&w, p, scope).unwrap();
            let b = ap_constant(&w, p + dp, scope).unwrap();
            prop_assert!(a >= 1.0 - 1e-12);
            prop_assert!(b <= a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exact_maximal_is_at_most_three_shifted3(f in weight(6)) {
        let e = maximal(&f, MaximalKind::Exact);
        let s3 = maximal(&f, MaximalKind::Shifted3);
        let d0 = maximal(&f, MaximalKind::Dyadic(0));
        for ((x, y), z) in e.values().iter().zip(s3.values()).zip(d0.values()) {
            prop_assert!(z <= y && *y <= x * (1.0 + 1e-12));
            prop_assert!(*x <= 3.0 * y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn removal_oscillation_is_at_most_twice_rearrangement(f in dyadic_values(5), level in 0u32..=5, idx in 0i64..32, shift in 0u8..3, k in 1u32..32) {
        let d = *f.domain();
        let cubes = d.cubes_at(shift, level);
        let q = cubes[idx as usize % cubes.len()];
        let cells = d.cube_cells(&q);
        let lambda = k as f64 / 32.0;
        let omega = ln_oscillation(&f, &cells, lambda).unwrap();
        let tilde = local_oscillation(&f, &cells, lambda).unwrap();
        prop_assert!(omega <= 2.0 * tilde);
    }

    #[test]
    fn carleson_families_are_sparse_at_the_inverse(bits in prop::collection::vec(any::<bool>(), 63)) {
        let d = Domain::unit(5);
        let set: CubeSet = d.lattice(0).into_iter().zip(bits).filter(|(_, b)| *b).map(|(q, _)| q).collect();
        let c = carleson_constant(&d, &set).unwrap();
        let eta = Eta::from_carleson(&c);
        prop_assert!(verify_sparse(&d, &set, eta).is_ok());
        if eta.num() < eta.den() {
            let larger = Eta::new(2 * eta.num() + 1, 2 * eta.den()).unwrap();
            prop_assert!(verify_sparse(&d, &set, larger).is_err());
        }
    }
}

#[test]
fn calibrated_tau_covers_the_calibration_weights() {
    let mut specs: Vec<WeightSpec> = [-0.9, -0.5, -0.25, 0.25, 0.5, 0.75, 0.9]
        .into_iter()
        .map(|a| WeightSpec::Power { a, x0: 0.5 })
        .collect();
    for seed in 0..4 {
        specs.push(WeightSpec::BoundedRandom { lo: 0.5, hi: 2.0, seed });
        specs.push(WeightSpec::A1Like { gamma: 0.5, seed });
    }
    let mut worst: f64 = 0.0;
    for depth in [6, 8, 10] {
        for s in &specs {
            let w = s.generate(Domain::unit(depth)).unwrap();
            let r = reverse_holder_report(&w, MaximalKind::Shifted3, CALIBRATED_TAU).unwrap();
            assert!(r.holds, "{s:?} at depth {depth}");
            worst = worst.max(r.tau_min);
        }
    }
    assert!((worst - 0.9099).abs() < 1e-3, "largest tau_min {worst}");
    assert!(2.0 * worst <= CALIBRATED_TAU);
}


#[test]
fn every_interval_sits_in_a_shifted_cube_at_most_three_times_larger() {
    for depth in 1..=8 {
        let d = Domain::unit(depth);
        let n = d.cells();
        for a in 0..n {
            for b in a + 1..=n {
                let q = d.containing_cube(&(a..b)).unwrap();
                let c = d.cube_cells(&q);
                assert!(c.start <= a && c.end >= b);
                assert!(c.len() <= 3 * (b - a), "depth {depth}: {a}..{b} in {c:?}");
            }
        }
    }
}
