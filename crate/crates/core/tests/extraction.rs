use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparselab_core::czo::{CzOperator, Kernel};
use sparselab_core::dyadic::Domain;
use sparselab_core::signal::{GridFunction, VectorFunction};
use sparselab_core::sparse::{
    carleson_constant, extract_bilinear, extract_commutator, extract_czo, extract_ln, extract_mq, Eta, LN_LAMBDA,
};

fn random(d: Domain, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::new(d, (0..d.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn ln_formula_holds_on_every_lattice() {
    for depth in [4, 6, 8] {
        let d = Domain::unit(depth);
        for seed in 0..6 {
            let f = random(d, seed);
            for shift in 0..3 {
                let e = extract_ln(&f, LN_LAMBDA, shift).unwrap();
                assert!(e.excess(&f) <= 1e-12, "depth {depth} seed {seed} shift {shift}");
                assert!(e.family.carleson().at_most_inverse(Eta::SIXTH));
            }
        }
    }
}

#[test]
fn czo_stopping_time_is_half_sparse() {
    let d = Domain::unit(6);
    for kernel in [Kernel::Hilbert, Kernel::Holder { delta: 0.5 }] {
        let t = CzOperator::new(d, kernel).unwrap();
        for seed in 0..4 {
            let f = VectorFunction::new(vec![random(d, seed), random(d, seed + 100)]).unwrap();
            let e = extract_czo(&t, &f, 2.0, &d.top()).unwrap();
            let c = carleson_constant(&d, &e.family.cube_set()).unwrap();
            assert!(c.value() <= 2.0);
            assert!(e.domination.constant.is_finite());
            let b = random(d, seed + 7);
            let e = extract_commutator(&t, &b, &f, 2.0, &d.top()).unwrap();
            assert!(e.domination.constant.is_finite());
        }
    }
}

#[test]
fn maximal_families_dominate() {
    let d = Domain::unit(6);
    for seed in 0..4 {
        let f = VectorFunction::new((0..4).map(|j| random(d, 10 * seed + j)).collect()).unwrap();
        let e = extract_mq(&f, 2.0).unwrap();
        assert!(e.domination.constant.is_finite());
        let g = VectorFunction::new((0..4).map(|j| random(d, 10 * seed + j + 5)).collect()).unwrap();
        let e = extract_bilinear(&f, &g, 2.0, 1.0, 1.2).unwrap();
        assert!(e.domination.constant.is_finite());
    }
}
