use proptest::prelude::*;
use qfound::kslab::{derive_structure, parse_ray_text, Ray, KS117_TEXT, ORTHO_TOL};
use qfound::numkernel::random::seeded;
use qfound::numkernel::TolerancePolicy;
use qfound::presheaf::*;
use rand::seq::SliceRandom;

fn pol() -> TolerancePolicy {
    TolerancePolicy::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contexts_partition_the_identity(seed in any::<u64>()) {
        let ctx = random_context(&mut seeded(seed), &pol()).unwrap();
        prop_assert!(ctx.partition_defect() <= 1e-9);
    }

    #[test]
    fn trivial_context_is_initial(seed in any::<u64>()) {
        let ctx = random_context(&mut seeded(seed), &pol()).unwrap();
        let t = Context::trivial(ctx.d);
        prop_assert_eq!(ctx.restriction_map(&t, 1e-9), Some(vec![0; ctx.len()]));
    }

    #[test]
    fn restriction_is_functorial(seed in any::<u64>()) {
        let fine = random_context(&mut seeded(seed), &pol()).unwrap();
        let mid = generate_context(&fine.generators[..1], &pol()).unwrap();
        let top = Context::trivial(fine.d);
        for chi in characters(&fine) {
            let step = restrict_character(&chi, &mid, 1e-9).unwrap();
            let two = restrict_character(&step, &top, 1e-9).unwrap();
            prop_assert_eq!(two.block, restrict_character(&chi, &top, 1e-9).unwrap().block);
            // the generator kept by the coarser context has the same value on both blocks
            let a = &fine.generators[0];
            let (x, y) = (chi.evaluate(a, 1e-8).unwrap(), step.evaluate(a, 1e-8).unwrap());
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn characters_are_multiplicative(seed in any::<u64>(), coeffs in prop::collection::vec(-2.0f64..2.0, 1..5)) {
        let mut rng = seeded(seed);
        let (sq, prod) = character_calculus(1, &mut rng, &pol()).unwrap();
        prop_assert!(sq <= 1e-10 && prod <= 1e-10, "{} {}", sq, prod);
        let ctx = random_context(&mut rng, &pol()).unwrap();
        for chi in characters(&ctx) {
            let r = functional_calculus_residual(&chi, &ctx.generators[0], &coeffs, 1e-8).unwrap();
            prop_assert!(r <= 1e-8, "{}", r);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sections_exist_iff_colorings_do(seed in any::<u64>(), size in 3usize..=40) {
        let mut rays: Vec<Ray> = parse_ray_text(KS117_TEXT).unwrap();
        rays.shuffle(&mut seeded(seed));
        rays.truncate(size);
        let g = derive_structure(&rays, 3, ORTHO_TOL);
        let rep = valuation_section_roundtrip(&g, &pol()).unwrap();
        let failed: Vec<String> = rep.failures().map(|c| c.name.clone()).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }
}
