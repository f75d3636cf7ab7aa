use proptest::prelude::*;
use qfound::numkernel::random::seeded;
use qfound::numkernel::TolerancePolicy;
use qfound::qlattice::{check_modular, check_orthomodular, complement, join, leq, meet, modularity_gap, random_nested_pair, random_projector, Projector};

const TOL: f64 = 1e-9;

fn pol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn pair(seed: u64, dim: usize, ra: usize, rb: usize) -> (Projector, Projector) {
    let mut rng = seeded(seed);
    (random_projector(&mut rng, dim, ra.min(dim), &pol()), random_projector(&mut rng, dim, rb.min(dim), &pol()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn meet_and_join_commute(seed in any::<u64>(), dim in 2usize..=6, ra in 0usize..=6, rb in 0usize..=6) {
        let pol = pol();
        let (p, q) = pair(seed, dim, ra, rb);
        prop_assert!(meet(&p, &q, &pol).unwrap().approx_eq(&meet(&q, &p, &pol).unwrap(), TOL));
        prop_assert!(join(&p, &q, &pol).unwrap().approx_eq(&join(&q, &p, &pol).unwrap(), TOL));
    }

    #[test]
    fn absorption(seed in any::<u64>(), dim in 2usize..=6, ra in 0usize..=6, rb in 0usize..=6) {
        let pol = pol();
        let (p, q) = pair(seed, dim, ra, rb);
        prop_assert!(join(&p, &meet(&p, &q, &pol).unwrap(), &pol).unwrap().approx_eq(&p, TOL));
        prop_assert!(meet(&p, &join(&p, &q, &pol).unwrap(), &pol).unwrap().approx_eq(&p, TOL));
    }

    #[test]
    fn double_complement(seed in any::<u64>(), dim in 2usize..=6, rank in 0usize..=6) {
        let pol = pol();
        let p = random_projector(&mut seeded(seed), dim, rank.min(dim), &pol);
        prop_assert!(complement(&complement(&p, &pol), &pol).approx_eq(&p, TOL));
    }

    #[test]
    fn complement_reverses_order(seed in any::<u64>(), dim in 2usize..=6) {
        let pol = pol();
        let (p, q) = random_nested_pair(&mut seeded(seed), dim, &pol);
        prop_assert!(leq(&p, &q, &pol));
        prop_assert!(leq(&complement(&q, &pol), &complement(&p, &pol), &pol));
    }

    #[test]
    fn orthomodular_on_nested_pairs(seed in any::<u64>(), dim in 2usize..=6) {
        let pol = pol();
        let (p, q) = random_nested_pair(&mut seeded(seed), dim, &pol);
        prop_assert!(check_orthomodular(&p, &q, &pol).unwrap());
    }

    #[test]
    fn modular_on_finite_triples(seed in any::<u64>(), dim in 2usize..=6, rank in 0usize..=6) {
        let pol = pol();
        let mut rng = seeded(seed);
        let (m, n) = random_nested_pair(&mut rng, dim, &pol);
        let l = random_projector(&mut rng, dim, rank.min(dim), &pol);
        prop_assert!(check_modular(&m, &n, &l, &pol).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modularity_gap_decays(n in 1usize..=10, a in 1.2f64..4.0) {
        let g = modularity_gap(n, a, &pol()).unwrap();
        prop_assert!(g <= a.powi(-(n as i32)) + 1e-12, "gap {g} for n = {n}, a = {a}");
    }
}
