use proptest::prelude::*;
use qfound::kslab::gleason::sample_frame_function;
use qfound::kslab::*;
use qfound::numkernel::random::{random_density, seeded};
use qfound::numkernel::TolerancePolicy;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

fn full() -> Vec<Ray> {
    parse_ray_text(KS117_TEXT).unwrap()
}

/// A seeded random subset of the 117 rays; small subsets are usually
/// colorable, large ones often are not.
fn subset(seed: u64, size: usize) -> Vec<Ray> {
    let mut rays = full();
    rays.shuffle(&mut seeded(seed));
    rays.truncate(size);
    rays
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn search_is_deterministic_and_colorings_valid(seed in any::<u64>(), size in 3usize..=117) {
        let g = derive_structure(&subset(seed, size), 3, ORTHO_TOL);
        let a = color_search(&g, &BTreeMap::new()).unwrap();
        let b = color_search(&g, &BTreeMap::new()).unwrap();
        prop_assert_eq!(a.explored, b.explored);
        prop_assert_eq!(&a.coloring, &b.coloring);
        if let Some(c) = &a.coloring {
            prop_assert!(c.is_valid(&g));
            for ctx in &g.contexts {
                prop_assert_eq!(ctx.iter().map(|&i| c.values[i] as usize).sum::<usize>(), 1);
            }
        }
    }

    #[test]
    fn pinned_colorings_respect_pins(seed in any::<u64>(), size in 3usize..=60) {
        let g = derive_structure(&subset(seed, size), 3, ORTHO_TOL);
        let mut rng = seeded(seed ^ 0x5eed);
        let id = g.rays[rng.random_range(0..g.len())].id;
        let pins = BTreeMap::from([(id, 1u8)]);
        if let Some(c) = color_search(&g, &pins).unwrap().coloring {
            prop_assert!(c.is_valid(&g));
            prop_assert_eq!(c.value_of(&g, id), Some(1));
        }
    }

    #[test]
    fn sign_flips_leave_the_structure_unchanged(seed in any::<u64>()) {
        let rays = full();
        let mut rng = seeded(seed);
        let flipped: Vec<Ray> = rays.iter().map(|r| if rng.random::<bool>() { r.negated() } else { r.clone() }).collect();
        let (a, b) = (derive_structure(&rays, 3, ORTHO_TOL), derive_structure(&flipped, 3, ORTHO_TOL));
        prop_assert_eq!(a.edges, b.edges);
        prop_assert_eq!(a.contexts, b.contexts);
    }

    #[test]
    fn reordered_search_keeps_the_verdict(seed in any::<u64>(), size in 3usize..=117) {
        let g = derive_structure(&subset(seed, size), 3, ORTHO_TOL);
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.shuffle(&mut seeded(seed.wrapping_add(1)));
        let a = color_search(&g, &BTreeMap::new()).unwrap();
        let b = color_search_ordered(&g, &BTreeMap::new(), &order).unwrap();
        prop_assert_eq!(a.coloring.is_some(), b.coloring.is_some());
    }

    #[test]
    fn gleason_round_trip(seed in any::<u64>(), d in 2usize..=4) {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(seed);
        let t = random_density(&mut rng, d).matrix().clone();
        let fit = gleason_fit(&sample_frame_function(&t, 50, &mut rng), d, &pol);
        prop_assert!(fit.t.max_diff(&t) <= 1e-8);
        prop_assert!(fit.residual <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_set_stays_uncolorable_under_shuffles(seed in any::<u64>()) {
        let g = derive_structure(&full(), 3, ORTHO_TOL);
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.shuffle(&mut seeded(seed));
        prop_assert!(color_search_ordered(&g, &BTreeMap::new(), &order).unwrap().coloring.is_none());
    }
}
