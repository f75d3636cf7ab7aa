use proptest::prelude::*;
use qfound::hepplab::{
    bell_witness, bloch_ket, evolve_chain, local_cross_term, product_overlap, reduced_coherence, reduced_system_state, BlochVector, ChainState,
};
use qfound::numkernel::random::{random_hermitian, random_real_unit, random_state, seeded};
use qfound::numkernel::StateVector;
use rand::Rng;
use std::f64::consts::PI;

fn bloch(rng: &mut qfound::numkernel::random::TestRng) -> BlochVector {
    let e = random_real_unit(rng, 3);
    BlochVector::new([e[0], e[1], e[2]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_overlap_matches_tensor_inner_product(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = seeded(seed);
        let e1: Vec<BlochVector> = (0..n).map(|_| bloch(&mut rng)).collect();
        let e2: Vec<BlochVector> = (0..n).map(|_| bloch(&mut rng)).collect();
        let kron = |es: &[BlochVector]| es.iter().skip(1).fold(bloch_ket(&es[0]), |acc: StateVector, e| acc.kron(&bloch_ket(e)));
        let brute = kron(&e1).inner(&kron(&e2)).norm_sqr();
        prop_assert!((product_overlap(&e1, &e2).unwrap() - brute).abs() <= 1e-12);
    }

    #[test]
    fn coherence_follows_the_half_angle_law(seed in any::<u64>(), n in 1usize..=12, theta in 1e-3f64..=PI) {
        let cs = random_state(&mut seeded(seed), 2);
        let mut s = ChainState::new(cs[0], cs[1], n, theta).unwrap();
        for t in 0..=n {
            let closed = cs[0].norm() * cs[1].norm() * (theta / 2.0).cos().abs().powi(t as i32);
            prop_assert!((reduced_coherence(&s) - closed).abs() <= 1e-12);
            prop_assert!((reduced_system_state(&s)[(0, 1)].norm() - closed).abs() <= 1e-12);
            if t < n {
                s = evolve_chain(&s, 1).unwrap();
            }
        }
    }

    #[test]
    fn flipped_sites_hide_local_cross_terms(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..=8usize);
        let support = rng.random_range(0..n);
        let t = rng.random_range(support + 1..=n);
        let cs = random_state(&mut rng, 2);
        let s = evolve_chain(&ChainState::new(cs[0], cs[1], n, PI).unwrap(), t).unwrap();
        let a = random_hermitian(&mut rng, 1 << (support + 1));
        prop_assert!(local_cross_term(&a, support, &s).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn witness_persists_while_coherence_vanishes(seed in any::<u64>(), n in 2usize..=10) {
        let cs = random_state(&mut seeded(seed), 2);
        let base = ChainState::new(cs[0], cs[1], n, PI).unwrap();
        let expected = cs[0].norm() * cs[1].norm();
        for t in 1..=n {
            let s = evolve_chain(&base, t).unwrap();
            prop_assert!((bell_witness(&s).unwrap().norm() - expected).abs() <= 1e-12);
            prop_assert!(reduced_coherence(&s) <= 1e-12);
        }
    }
}
