//! Seeded random matrices and states for property checks.

use super::{DensityState, Operator, StateVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut TestRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_complex(rng: &mut TestRng) -> C64 {
    C64::new(gauss(rng), gauss(rng))
}

/// Unnormalized complex Gaussian vector.
pub fn random_vector(rng: &mut TestRng, dim: usize) -> StateVector {
    StateVector::new((0..dim).map(|_| random_complex(rng)).collect())
}

pub fn random_state(rng: &mut TestRng, dim: usize) -> StateVector {
    random_vector(rng, dim).normalized()
}

pub fn random_real_unit(rng: &mut TestRng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn random_operator(rng: &mut TestRng, dim: usize) -> Operator {
    let data: Vec<C64> = (0..dim * dim).map(|_| random_complex(rng)).collect();
    Operator::from_vec(dim, data).unwrap()
}

pub fn random_hermitian(rng: &mut TestRng, dim: usize) -> Operator {
    random_operator(rng, dim).hermitian_part()
}

/// Haar-distributed unitary via Gram-Schmidt on a Ginibre matrix.
pub fn random_unitary(rng: &mut TestRng, dim: usize) -> Operator {
    let mut cols: Vec<StateVector> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = random_vector(rng, dim);
        for _ in 0..2 {
            for b in &cols {
                let ov = b.inner(&v);
                v.axpy(-ov, b);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v.scale(C64::new(1.0 / n, 0.0)));
        }
    }
    Operator::from_columns(&cols).unwrap()
}

pub fn random_density(rng: &mut TestRng, dim: usize) -> DensityState {
    let g = random_operator(rng, dim);
    let p = &g * &g.adjoint();
    let tr = p.trace().re;
    DensityState::new(p.scale_re(1.0 / tr).hermitian_part(), &Default::default()).unwrap()
}

/// Random density matrix of rank one.
pub fn random_pure_density(rng: &mut TestRng, dim: usize) -> DensityState {
    DensityState::pure(&random_state(rng, dim))
}
