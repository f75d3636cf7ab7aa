use proptest::prelude::*;
use qfound::fvlab::{evm_induce, induced_observable, Effect, EffectValuedMeasure, ScatteringMorphism};
use qfound::numkernel::random::{random_density, random_hermitian, random_operator, seeded};
use qfound::numkernel::{hermitian_eigendecomposition, tensor_product, DensityState, Operator, TolerancePolicy};

fn pol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn two_outcome(e: Effect, pol: &TolerancePolicy) -> EffectValuedMeasure {
    let rest = Effect::new(Operator::identity(e.dim()).try_sub(e.op()).unwrap(), pol).unwrap();
    EffectValuedMeasure::new(vec![("0".into(), e), ("1".into(), rest)], pol).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scattering_is_a_star_automorphism(seed in any::<u64>(), ds in 2usize..=3, dp in 2usize..=3) {
        let mut rng = seeded(seed);
        let theta = ScatteringMorphism::random(&mut rng, ds, dp);
        let n = ds * dp;
        let (x, y) = (random_operator(&mut rng, n), random_operator(&mut rng, n));
        let product = theta.apply(&x.try_mul(&y).unwrap());
        prop_assert!(product.max_diff(&theta.apply(&x).try_mul(&theta.apply(&y)).unwrap()) <= 1e-11);
        prop_assert!(theta.apply(&x.adjoint()).max_diff(&theta.apply(&x).adjoint()) <= 1e-11);
    }

    /// ε_σ(B) is linear in σ: each entry is tr(C_ij Δ) for a probe block C_ij of
    /// Θ(1⊗B), so |tr(C_ij Δ)| ≤ ‖C_ij‖·‖Δ‖₁ ≤ dp‖B‖_max · dp^{3/2}‖Δ‖_max.
    #[test]
    fn induced_observable_is_lipschitz_in_the_state(seed in any::<u64>(), ds in 2usize..=3, dp in 2usize..=3) {
        let mut rng = seeded(seed);
        let theta = ScatteringMorphism::random(&mut rng, ds, dp);
        let b = random_hermitian(&mut rng, dp);
        let (s1, s2) = (random_density(&mut rng, dp), random_density(&mut rng, dp));
        let gap = induced_observable(&b, &s1, &theta).unwrap().max_diff(&induced_observable(&b, &s2, &theta).unwrap());
        let bound = (dp as f64).powf(2.5) * b.max_abs() * s1.matrix().max_diff(s2.matrix());
        prop_assert!(gap <= bound + 1e-12, "{gap} > {bound}");
    }

    /// Distinct Hermitian A, A' are told apart by the eigenvector of A − A'
    /// with the largest |eigenvalue|.
    #[test]
    fn states_separate_observables(seed in any::<u64>(), dim in 2usize..=5) {
        let pol = pol();
        let mut rng = seeded(seed);
        let (a, a2) = (random_hermitian(&mut rng, dim), random_hermitian(&mut rng, dim));
        let eig = hermitian_eigendecomposition(&a.try_sub(&a2).unwrap(), &pol).unwrap();
        let k = if eig.values[0].abs() > eig.values[dim - 1].abs() { 0 } else { dim - 1 };
        let w = DensityState::pure(&eig.vectors[k]);
        let diff = w.expect(&a).unwrap().re - w.expect(&a2).unwrap().re;
        prop_assert!((diff - eig.values[k]).abs() <= 1e-10);
        prop_assert!(diff.abs() > 0.0);
    }

    /// Summing the induced joint measure over the second outcome gives the
    /// measure induced from the first probe's effects alone.
    #[test]
    fn joint_measure_marginals(seed in any::<u64>(), ds in 2usize..=3) {
        let pol = pol();
        let mut rng = seeded(seed);
        let (d1, d2) = (2usize, 2usize);
        let e1 = two_outcome(Effect::random(&mut rng, d1), &pol);
        let e2 = two_outcome(Effect::random(&mut rng, d2), &pol);
        let sigma = random_density(&mut rng, d1).tensor(&random_density(&mut rng, d2));
        let theta = ScatteringMorphism::random(&mut rng, ds, d1 * d2);
        let joint = evm_induce(&e1.product(&e2), &sigma, &theta, &pol).unwrap();
        for (i, (name, eff)) in e1.outcomes().iter().enumerate() {
            let lifted = tensor_product(eff.op(), &Operator::identity(d2));
            let direct = induced_observable(&lifted, &sigma, &theta).unwrap();
            let mut summed = Operator::zeros(ds);
            for (_, j) in joint.outcomes().iter().skip(i * e2.len()).take(e2.len()) {
                summed = summed.try_add(j.op()).unwrap();
            }
            prop_assert!(joint.outcomes()[i * e2.len()].0.starts_with(name.as_str()));
            prop_assert!(summed.max_diff(&direct) <= 1e-10);
        }
    }
}
