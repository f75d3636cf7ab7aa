//! Finite-dimensional measurement scheme: a system coupled to a probe by a
//! scattering morphism Θ(X) = U*XU on system ⊗ probe, the induced system
//! observables, pre-instruments and their composition.
//!
//! Spacetime localization is modeled by tensor factors of the system tagged
//! with region labels and a declared causal order between regions.

pub mod causal;
pub mod scenario;

pub use causal::{
    compose_instruments, nonsignaling_check, signaling_gap_unchecked, LocalFactorization, LocalObservable, NonSignaling, Probe,
};
pub use scenario::{parse_scenario, Scenario, ScenarioError};

use crate::numkernel::random::{random_density, random_hermitian, random_operator, random_unitary, seeded, TestRng};
use crate::numkernel::{
    hermitian_eigendecomposition, tensor_product, DensityState, NumError, Operator, TolerancePolicy, C64, ONE, ZERO,
};
use crate::report::CheckReport;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FvError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("coupling is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("operator is not an effect: {0}")]
    NotAnEffect(String),
    #[error("effects sum to the identity only up to {0:.3e}")]
    NotNormalized(f64),
    #[error("effect has zero probability (weight {0:.3e})")]
    ZeroProbability(f64),
    #[error("causal order violated: {0}")]
    CausalOrderViolated(String),
    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),
}

/// Θ(X) = U*XU on system ⊗ probe.
///
/// `support` lists the system factors the coupling touches; `region` is the
/// coupling region K.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMorphism {
    pub u: Operator,
    pub system_dim: usize,
    pub probe_dim: usize,
    pub region: String,
    pub support: Vec<usize>,
}

impl ScatteringMorphism {
    /// Coupling of a single-factor system.
    pub fn new(u: Operator, system_dim: usize, probe_dim: usize, pol: &TolerancePolicy) -> Result<Self, FvError> {
        if u.dim() != system_dim * probe_dim {
            return Err(NumError::DimensionMismatch { expected: system_dim * probe_dim, found: u.dim() }.into());
        }
        let dev = (&(&u.adjoint() * &u) - &Operator::identity(u.dim())).max_abs();
        if dev > pol.eq_tol.max(1e-9) {
            return Err(FvError::NotUnitary(dev));
        }
        Ok(ScatteringMorphism { u, system_dim, probe_dim, region: "K".into(), support: vec![0] })
    }

    pub fn identity(system_dim: usize, probe_dim: usize) -> Self {
        let u = Operator::identity(system_dim * probe_dim);
        ScatteringMorphism { u, system_dim, probe_dim, region: "K".into(), support: vec![0] }
    }

    /// Exchange of system and probe, equal dimensions.
    pub fn swap(d: usize) -> Self {
        let u = Operator::from_fn(d * d, |r, c| if r == (c % d) * d + c / d { ONE } else { ZERO });
        ScatteringMorphism { u, system_dim: d, probe_dim: d, region: "K".into(), support: vec![0] }
    }

    /// |i, k⟩ ↦ |i, k + i mod d_probe⟩; for qubits the system σ_z controls a
    /// probe flip.
    pub fn controlled_flip(system_dim: usize, probe_dim: usize) -> Self {
        let n = system_dim * probe_dim;
        let u = Operator::from_fn(n, |r, c| {
            let (i, k) = (c / probe_dim, c % probe_dim);
            if r == i * probe_dim + (k + i) % probe_dim {
                ONE
            } else {
                ZERO
            }
        });
        ScatteringMorphism { u, system_dim, probe_dim, region: "K".into(), support: vec![0] }
    }

    /// Qubit system |1⟩ applies exp(−iθσ_x) to a qubit probe.
    pub fn controlled_rotation(theta: f64) -> Self {
        let (c, s) = (theta.cos(), theta.sin());
        let mut u = Operator::identity(4);
        u[(2, 2)] = C64::new(c, 0.0);
        u[(3, 3)] = C64::new(c, 0.0);
        u[(2, 3)] = C64::new(0.0, -s);
        u[(3, 2)] = C64::new(0.0, -s);
        ScatteringMorphism { u, system_dim: 2, probe_dim: 2, region: "K".into(), support: vec![0] }
    }

    pub fn random(rng: &mut TestRng, system_dim: usize, probe_dim: usize) -> Self {
        let u = random_unitary(rng, system_dim * probe_dim);
        ScatteringMorphism { u, system_dim, probe_dim, region: "K".into(), support: vec![0] }
    }

    pub fn with_region(mut self, region: impl Into<String>) -> Self {
        self.region = region.into();
        self
    }

    /// Θ(X) = U*XU
    pub fn apply(&self, x: &Operator) -> Operator {
        &(&self.u.adjoint() * x) * &self.u
    }

    /// U ρ U*
    pub fn evolve(&self, rho: &Operator) -> Operator {
        &(&self.u * rho) * &self.u.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }
}

/// An operator with 0 ≤ E ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    op: Operator,
}

impl Effect {
    pub fn new(op: Operator, pol: &TolerancePolicy) -> Result<Self, FvError> {
        let dev = op.hermitian_deviation();
        if dev > pol.eq_tol {
            return Err(FvError::NotAnEffect(format!("not Hermitian ({dev:.3e})")));
        }
        let op = op.hermitian_part();
        let eig = hermitian_eigendecomposition(&op, pol)?;
        let (lo, hi) = (eig.values[0], *eig.values.last().unwrap());
        if lo < -pol.eq_tol || hi > 1.0 + pol.eq_tol {
            return Err(FvError::NotAnEffect(format!("spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]")));
        }
        Ok(Effect { op })
    }

    pub fn identity(dim: usize) -> Self {
        Effect { op: Operator::identity(dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Effect { op: Operator::zeros(dim) }
    }

    /// Projector onto basis state k.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut op = Operator::zeros(dim);
        op[(k, k)] = ONE;
        Effect { op }
    }

    /// V diag(u) V* with u uniform in [0, 1] and V Haar.
    pub fn random(rng: &mut TestRng, dim: usize) -> Self {
        let v = random_unitary(rng, dim);
        let d: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let op = (&(&v * &Operator::diag(&d)) * &v.adjoint()).hermitian_part();
        Effect { op }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Smallest eigenvalue of E − E²; zero for a projector.
    pub fn unsharpness(&self, pol: &TolerancePolicy) -> Result<f64, FvError> {
        let e2 = &self.op * &self.op;
        Ok((&self.op - &e2).hermitian_part().min_eigenvalue(pol)?)
    }

    /// Largest eigenvalue of E − E².
    pub fn max_unsharpness(&self, pol: &TolerancePolicy) -> Result<f64, FvError> {
        let e2 = &self.op * &self.op;
        let neg = (&e2 - &self.op).hermitian_part();
        Ok(-neg.min_eigenvalue(pol)?)
    }
}

/// Finite effect-valued measure, outcomes in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectValuedMeasure {
    outcomes: Vec<(String, Effect)>,
}

impl EffectValuedMeasure {
    pub fn new(outcomes: Vec<(String, Effect)>, pol: &TolerancePolicy) -> Result<Self, FvError> {
        let dim = outcomes.first().map(|(_, e)| e.dim()).ok_or_else(|| FvError::NotAnEffect("no outcomes".into()))?;
        let mut sum = Operator::zeros(dim);
        for (_, e) in &outcomes {
            if e.dim() != dim {
                return Err(NumError::DimensionMismatch { expected: dim, found: e.dim() }.into());
            }
            sum = &sum + e.op();
        }
        let dev = sum.max_diff(&Operator::identity(dim));
        if dev > pol.eq_tol.max(1e-9) {
            return Err(FvError::NotNormalized(dev));
        }
        Ok(EffectValuedMeasure { outcomes })
    }

    /// Spectral measure of a Hermitian operator, outcomes labeled by eigenvalue.
    pub fn projective(a: &Operator, pol: &TolerancePolicy) -> Result<Self, FvError> {
        let eig = hermitian_eigendecomposition(a, pol)?;
        let outcomes = eig
            .clusters(pol.eq_tol.max(1e-9))
            .into_iter()
            .map(|(v, vecs)| (format!("{v:.6}"), Effect { op: Operator::projector_onto(&vecs, a.dim()) }))
            .collect();
        Self::new(outcomes, pol)
    }

    pub fn outcomes(&self) -> &[(String, Effect)] {
        &self.outcomes
    }

    pub fn effect_of(&self, name: &str) -> Option<&Effect> {
        self.outcomes.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Product measure with outcomes "a×b".
    pub fn product(&self, other: &EffectValuedMeasure) -> EffectValuedMeasure {
        let mut outcomes = Vec::new();
        for (a, ea) in &self.outcomes {
            for (b, eb) in &other.outcomes {
                outcomes.push((format!("{a}×{b}"), Effect { op: tensor_product(ea.op(), eb.op()) }));
            }
        }
        EffectValuedMeasure { outcomes }
    }
}

/// result[i][j] = Σ_{k,l} C[(i,k),(j,l)]·m[l][k], the slot-two contraction
/// of an operator on A ⊗ B against a matrix on B.
pub(crate) fn contract_second(c: &Operator, m: &Operator) -> Result<Operator, FvError> {
    let db = m.dim();
    if db == 0 || !c.dim().is_multiple_of(db) {
        return Err(NumError::DimensionMismatch { expected: db, found: c.dim() }.into());
    }
    let da = c.dim() / db;
    let mut out = Operator::zeros(da);
    for i in 0..da {
        for j in 0..da {
            let mut s = ZERO;
            for k in 0..db {
                for l in 0..db {
                    s += c[(i * db + k, j * db + l)] * m[(l, k)];
                }
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// η_σ(C) = (id ⊗ σ)(C), so that η_σ(A ⊗ B) = σ(B)·A.
pub fn eta_sigma(c: &Operator, sigma: &DensityState) -> Result<Operator, FvError> {
    contract_second(c, sigma.matrix())
}

fn lift_probe(theta: &ScatteringMorphism, b: &Operator) -> Result<Operator, FvError> {
    if b.dim() != theta.probe_dim {
        return Err(NumError::DimensionMismatch { expected: theta.probe_dim, found: b.dim() }.into());
    }
    Ok(tensor_product(&Operator::identity(theta.system_dim), b))
}

/// ε_σ(B) = η_σ(Θ(1 ⊗ B)).
pub fn induced_observable(b: &Operator, sigma: &DensityState, theta: &ScatteringMorphism) -> Result<Operator, FvError> {
    if sigma.dim() != theta.probe_dim {
        return Err(NumError::DimensionMismatch { expected: theta.probe_dim, found: sigma.dim() }.into());
    }
    eta_sigma(&theta.apply(&lift_probe(theta, b)?), sigma)
}

/// Largest gap |ω(ε_σ(B)) − (ω⊗σ)(Θ(1⊗B))| over random system states.
pub fn induced_identity_residual(
    b: &Operator,
    sigma: &DensityState,
    theta: &ScatteringMorphism,
    states: usize,
    rng: &mut TestRng,
) -> Result<f64, FvError> {
    let eps = induced_observable(b, sigma, theta)?;
    let coupled = theta.apply(&lift_probe(theta, b)?);
    let mut worst = 0.0f64;
    for _ in 0..states {
        let omega = random_density(rng, theta.system_dim);
        let lhs = omega.expect(&eps)?;
        let rhs = omega.tensor(sigma).expect(&coupled)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Choi matrix Σ_{k,l} E_kl ⊗ ε_σ(E_kl) of the induced-observable map.
pub fn induced_choi(sigma: &DensityState, theta: &ScatteringMorphism) -> Result<Operator, FvError> {
    let (db, da) = (theta.probe_dim, theta.system_dim);
    let mut choi = Operator::zeros(db * da);
    for k in 0..db {
        for l in 0..db {
            let mut ekl = Operator::zeros(db);
            ekl[(k, l)] = ONE;
            let img = induced_observable(&ekl, sigma, theta)?;
            for i in 0..da {
                for j in 0..da {
                    choi[(k * da + i, l * da + j)] = img[(i, j)];
                }
            }
        }
    }
    Ok(choi)
}

/// Largest probe dimension for which complete positivity is tested through
/// the Choi matrix.
pub const CHOI_MAX_PROBE_DIM: usize = 4;

/// Unitality, *-compatibility, the Kadison-Schwarz inequality and complete
/// positivity of B ↦ ε_σ(B) on `trials` random probe operators.
pub fn check_epsilon_properties(
    sigma: &DensityState,
    theta: &ScatteringMorphism,
    trials: usize,
    seed: u64,
    pol: &TolerancePolicy,
) -> Result<CheckReport, FvError> {
    let tol = pol.eq_tol;
    let mut rng = seeded(seed);
    let mut rep = CheckReport::new();
    let dp = theta.probe_dim;
    let unit = induced_observable(&Operator::identity(dp), sigma, theta)?;
    rep.residual("unitality ε(1) = 1", unit.max_diff(&Operator::identity(theta.system_dim)), tol);

    let mut star = 0.0f64;
    let mut schwarz = f64::INFINITY;
    let mut ident = 0.0f64;
    for _ in 0..trials {
        let b = random_operator(&mut rng, dp);
        let e = induced_observable(&b, sigma, theta)?;
        let e_adj = induced_observable(&b.adjoint(), sigma, theta)?;
        star = star.max(e_adj.max_diff(&e.adjoint()));
        let btb = &b.adjoint() * &b;
        let gap = &induced_observable(&btb, sigma, theta)? - &(&e.adjoint() * &e);
        schwarz = schwarz.min(gap.hermitian_part().min_eigenvalue(pol)?);
        ident = ident.max(induced_identity_residual(&b, sigma, theta, 5, &mut rng)?);
    }
    rep.residual("*-compatibility ε(B*) = ε(B)*", star, tol);
    rep.residual("defining identity ω(ε(B)) = (ω⊗σ)(Θ(1⊗B))", ident, tol);
    rep.at_least("min eig ε(B*B) − ε(B)*ε(B)", schwarz, -tol);
    if dp <= CHOI_MAX_PROBE_DIM {
        let choi = induced_choi(sigma, theta)?;
        rep.at_least("min Choi eigenvalue", choi.hermitian_part().min_eigenvalue(pol)?, -tol);
    } else {
        rep.info("Choi test skipped (probe dimension)", dp);
    }
    Ok(rep)
}

/// Unnormalized post-measurement state ρ' with tr(ρ'A) = (ω⊗σ)(Θ(A⊗B)).
#[derive(Debug, Clone, PartialEq)]
pub struct PreInstrument {
    pub rho: Operator,
    pub weight: f64,
}

/// 𝔍_σ(B) applied to an arbitrary (possibly unnormalized) system operator.
pub(crate) fn instrument_map(b: &Operator, sigma: &Operator, theta: &ScatteringMorphism, omega: &Operator) -> Result<Operator, FvError> {
    if omega.dim() != theta.system_dim {
        return Err(NumError::DimensionMismatch { expected: theta.system_dim, found: omega.dim() }.into());
    }
    let evolved = theta.evolve(&tensor_product(omega, sigma));
    contract_second(&evolved, b)
}

pub fn pre_instrument(b: &Effect, sigma: &DensityState, theta: &ScatteringMorphism, omega: &DensityState) -> Result<PreInstrument, FvError> {
    if b.dim() != theta.probe_dim || sigma.dim() != theta.probe_dim {
        return Err(NumError::DimensionMismatch { expected: theta.probe_dim, found: b.dim() }.into());
    }
    let rho = instrument_map(b.op(), sigma.matrix(), theta, omega.matrix())?.hermitian_part();
    let weight = rho.trace().re;
    Ok(PreInstrument { rho, weight })
}

/// ω' = 𝔍_σ(B)(ω) / ω(ε_σ(B)).
pub fn post_select(
    b: &Effect,
    sigma: &DensityState,
    theta: &ScatteringMorphism,
    omega: &DensityState,
    pol: &TolerancePolicy,
) -> Result<DensityState, FvError> {
    let pre = pre_instrument(b, sigma, theta, omega)?;
    if pre.weight <= pol.eq_tol {
        return Err(FvError::ZeroProbability(pre.weight));
    }
    Ok(DensityState::new(pre.rho.scale_re(1.0 / pre.weight), pol)?)
}

/// Outcome-wise ε_σ of a probe measure.
pub fn evm_induce(
    e: &EffectValuedMeasure,
    sigma: &DensityState,
    theta: &ScatteringMorphism,
    pol: &TolerancePolicy,
) -> Result<EffectValuedMeasure, FvError> {
    let mut outcomes = Vec::with_capacity(e.len());
    for (name, eff) in e.outcomes() {
        let op = induced_observable(eff.op(), sigma, theta)?.hermitian_part();
        outcomes.push((name.clone(), Effect::new(op, pol)?));
    }
    EffectValuedMeasure::new(outcomes, pol)
}

/// (measured variance of B on the coupled state, variance of ε_σ(B) in ω).
pub fn variance_check(b: &Operator, sigma: &DensityState, theta: &ScatteringMorphism, omega: &DensityState) -> Result<(f64, f64), FvError> {
    if !b.is_hermitian(1e-9) {
        return Err(NumError::NotHermitian { max_dev: b.hermitian_deviation() }.into());
    }
    let joint = omega.tensor(sigma);
    let b1 = theta.apply(&lift_probe(theta, b)?);
    let b2 = theta.apply(&lift_probe(theta, &(b * b))?);
    let mean = joint.expect(&b1)?.re;
    let measured = joint.expect(&b2)?.re - mean * mean;
    let eps = induced_observable(b, sigma, theta)?;
    let m1 = omega.expect(&eps)?.re;
    let induced = omega.expect(&(&eps * &eps))?.re - m1 * m1;
    Ok((measured, induced))
}

/// Check battery over `cases` seeded random couplings on 3 ⊗ 3.
pub fn fv_checks(seed: u64, cases: usize, pol: &TolerancePolicy) -> Result<CheckReport, FvError> {
    let tol = pol.eq_tol;
    let comp_tol = 1e-10;
    let mut rng = seeded(seed);
    let (ds, dp) = (3usize, 3usize);
    let mut unital = 0.0f64;
    let mut star = 0.0f64;
    let mut ident = 0.0f64;
    let mut schwarz = f64::INFINITY;
    let mut choi = f64::INFINITY;
    let mut compose = 0.0f64;
    let mut spacelike = 0.0f64;
    let mut nosignal = 0.0f64;
    let mut variance = f64::INFINITY;
    let strict = TolerancePolicy::with_eq_tol(comp_tol);

    for _ in 0..cases {
        let theta = ScatteringMorphism::random(&mut rng, ds, dp);
        let sigma = random_density(&mut rng, dp);
        let case_seed = rng.random::<u64>();
        let rep = check_epsilon_properties(&sigma, &theta, 3, case_seed, pol)?;
        let val = |name: &str| rep.get(name).and_then(|c| c.value.as_f64()).unwrap_or(f64::NAN);
        unital = unital.max(val("unitality ε(1) = 1"));
        star = star.max(val("*-compatibility ε(B*) = ε(B)*"));
        ident = ident.max(val("defining identity ω(ε(B)) = (ω⊗σ)(Θ(1⊗B))"));
        schwarz = schwarz.min(val("min eig ε(B*B) − ε(B)*ε(B)"));
        choi = choi.min(val("min Choi eigenvalue"));

        let omega = random_density(&mut rng, ds);
        let b = random_hermitian(&mut rng, dp);
        let (vm, vi) = variance_check(&b, &sigma, &theta, &omega)?;
        variance = variance.min(vm - vi);

        // sequential couplings sharing the system
        let theta2 = ScatteringMorphism::random(&mut rng, ds, dp).with_region("K2");
        let theta1 = theta.clone().with_region("K1");
        let fact = LocalFactorization::new(vec![ds], vec!["S".into()], &[("K1", "K2")], &[])?;
        let p1 = Probe { theta: theta1, sigma: sigma.clone(), effect: Effect::random(&mut rng, dp) };
        let p2 = Probe { theta: theta2, sigma: random_density(&mut rng, dp), effect: Effect::random(&mut rng, dp) };
        let rep = compose_instruments(&fact, &p1, &p2, &omega, &strict)?;
        compose = compose.max(rep.get("sequential vs joint probe").and_then(|c| c.value.as_f64()).unwrap_or(f64::NAN));

        // spacelike couplings on separate system factors
        let fact = LocalFactorization::new(vec![ds, ds], vec!["K1".into(), "K2".into()], &[], &[("K1", "K2")])?;
        let u1 = random_unitary(&mut rng, ds * dp);
        let u2 = random_unitary(&mut rng, ds * dp);
        let t1 = fact.local_coupling("K1", &[0], &u1, dp, pol)?;
        let t2 = fact.local_coupling("K2", &[1], &u2, dp, pol)?;
        let omega2 = random_density(&mut rng, ds * ds);
        let q1 = Probe { theta: t1, sigma: random_density(&mut rng, dp), effect: Effect::random(&mut rng, dp) };
        let q2 = Probe { theta: t2, sigma: random_density(&mut rng, dp), effect: Effect::random(&mut rng, dp) };
        let rep = compose_instruments(&fact, &q1, &q2, &omega2, &strict)?;
        compose = compose.max(rep.get("sequential vs joint probe").and_then(|c| c.value.as_f64()).unwrap_or(f64::NAN));
        spacelike = spacelike.max(rep.get("order independence").and_then(|c| c.value.as_f64()).unwrap_or(f64::NAN));

        // A in O1, B in O2, C in O3 with O1 → O2 → O3 and O3 spacelike to O1
        let fact = LocalFactorization::new(
            vec![ds, ds],
            vec!["O1".into(), "O3".into()],
            &[("O1", "O2"), ("O2", "O3")],
            &[("O1", "O3")],
        )?;
        let a1 = fact.local_coupling("O1", &[0], &random_unitary(&mut rng, ds * dp), dp, pol)?;
        let a2 = fact.local_coupling("O2", &[1], &random_unitary(&mut rng, ds * dp), dp, pol)?;
        let c = LocalObservable { op: random_hermitian(&mut rng, ds), support: vec![1], region: "O3".into() };
        let s1 = random_density(&mut rng, dp);
        let s2 = random_density(&mut rng, dp);
        let ns = nonsignaling_check(&fact, &a1, &a2, &c, &omega2, &s1, &s2, pol)?;
        nosignal = nosignal.max(ns.gap);
    }

    let mut rep = CheckReport::new();
    rep.info("couplings", cases);
    rep.residual("unitality", unital, tol);
    rep.residual("*-compatibility", star, tol);
    rep.residual("defining identity of the induced observable", ident, tol);
    rep.at_least("operator inequality min eigenvalue", schwarz, -tol);
    rep.at_least("Choi min eigenvalue", choi, -tol);
    rep.residual("composition law", compose, comp_tol);
    rep.residual("spacelike order independence", spacelike, comp_tol);
    rep.residual("non-signaling gap", nosignal, comp_tol);
    rep.at_least("variance inequality slack", variance, -tol);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::random::random_density;
    use crate::numkernel::StateVector;

    fn pol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn eta_on_products() {
        let mut rng = seeded(1);
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 2);
        let sigma = random_density(&mut rng, 2);
        let lhs = eta_sigma(&tensor_product(&a, &Operator::identity(2)), &sigma).unwrap();
        assert!(lhs.max_diff(&a) < 1e-13);
        let lhs = eta_sigma(&tensor_product(&Operator::identity(3), &b), &sigma).unwrap();
        let tr = sigma.expect(&b).unwrap();
        assert!(lhs.max_diff(&Operator::identity(3).scale(tr)) < 1e-13);
    }

    #[test]
    fn eta_matches_elementary_tensor_expansion() {
        let mut rng = seeded(2);
        let (da, db) = (3, 2);
        let c = random_operator(&mut rng, da * db);
        let sigma = random_density(&mut rng, db);
        // C = Σ_{k,l} C_kl ⊗ E_kl with C_kl[i][j] = C[(i,k),(j,l)]
        let mut oracle = Operator::zeros(da);
        for k in 0..db {
            for l in 0..db {
                let ckl = Operator::from_fn(da, |i, j| c[(i * db + k, j * db + l)]);
                let mut ekl = Operator::zeros(db);
                ekl[(k, l)] = ONE;
                oracle = &oracle + &ckl.scale(sigma.expect(&ekl).unwrap());
            }
        }
        assert!(eta_sigma(&c, &sigma).unwrap().max_diff(&oracle) < 1e-12);
        assert!(eta_sigma(&Operator::identity(da * db), &sigma).unwrap().max_diff(&Operator::identity(da)) < 1e-14);
    }

    #[test]
    fn induced_observable_examples() {
        let mut rng = seeded(3);
        let sigma = random_density(&mut rng, 2);
        let b = random_hermitian(&mut rng, 2);
        let id = induced_observable(&b, &sigma, &ScatteringMorphism::identity(2, 2)).unwrap();
        assert!(id.max_diff(&Operator::identity(2).scale(sigma.expect(&b).unwrap())) < 1e-13);
        let sw = induced_observable(&b, &sigma, &ScatteringMorphism::swap(2)).unwrap();
        assert!(sw.max_diff(&b) < 1e-13);

        // CNOT oracle: U*(1⊗Z)U = Z⊗Z, ground probe gives Z
        let cf = ScatteringMorphism::controlled_flip(2, 2);
        let cnot = Operator::from_real_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(cf.u, cnot);
        let ground = DensityState::pure(&StateVector::basis(2, 0));
        let conj = &(&cnot * &tensor_product(&Operator::identity(2), &Operator::pauli_z())) * &cnot;
        assert!(conj.max_diff(&tensor_product(&Operator::pauli_z(), &Operator::pauli_z())) < 1e-15);
        let e = induced_observable(&Operator::pauli_z(), &ground, &cf).unwrap();
        assert!(e.max_diff(&Operator::pauli_z()) < 1e-15);
        assert!(induced_identity_residual(&b, &sigma, &cf, 5, &mut rng).unwrap() < 1e-13);
    }

    #[test]
    fn epsilon_properties_identity_and_swap() {
        let mut rng = seeded(4);
        let sigma = random_density(&mut rng, 2);
        for theta in [ScatteringMorphism::identity(2, 2), ScatteringMorphism::swap(2)] {
            let rep = check_epsilon_properties(&sigma, &theta, 10, 5, &pol()).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
        // swap: ε is the identity map, Choi = Σ E_kl ⊗ E_kl
        let choi = induced_choi(&sigma, &ScatteringMorphism::swap(2)).unwrap();
        let phi = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]);
        assert!(choi.max_diff(&Operator::outer(&phi, &phi)) < 1e-14);
    }

    #[test]
    fn epsilon_properties_random() {
        let mut rng = seeded(5);
        for s in 0..10 {
            let theta = ScatteringMorphism::random(&mut rng, 3, 3);
            let sigma = random_density(&mut rng, 3);
            let rep = check_epsilon_properties(&sigma, &theta, 4, s, &pol()).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn pre_instrument_examples() {
        let mut rng = seeded(6);
        let omega = random_density(&mut rng, 2);
        let sigma = random_density(&mut rng, 2);
        let theta = ScatteringMorphism::random(&mut rng, 2, 2);
        let ns = pre_instrument(&Effect::identity(2), &sigma, &theta, &omega).unwrap();
        assert!((ns.weight - 1.0).abs() < 1e-13);
        let zero = pre_instrument(&Effect::zero(2), &sigma, &theta, &omega).unwrap();
        assert_eq!(zero.weight, 0.0);
        assert_eq!(zero.rho.max_abs(), 0.0);
        let e = Effect::random(&mut rng, 2);
        let pre = pre_instrument(&e, &sigma, &theta, &omega).unwrap();
        let via_eps = omega.expect(&induced_observable(e.op(), &sigma, &theta).unwrap()).unwrap().re;
        assert!((pre.weight - via_eps).abs() < 1e-11);
        assert!(pre.rho.min_eigenvalue(&pol()).unwrap() > -1e-12);
    }

    #[test]
    fn post_selection() {
        let mut rng = seeded(7);
        let omega = random_density(&mut rng, 2);
        let sigma = random_density(&mut rng, 2);
        let e = Effect::random(&mut rng, 2);
        let same = post_select(&e, &sigma, &ScatteringMorphism::identity(2, 2), &omega, &pol()).unwrap();
        assert!(same.matrix().max_diff(omega.matrix()) < 1e-13);
        // (ω⊗σ)(SWAP(A⊗B)SWAP) = ω(B)σ(A): the system leaves in the probe
        // preparation and the weight is ω(B)
        let v = crate::numkernel::random::random_state(&mut rng, 2);
        let proj = Effect::new(Operator::outer(&v, &v), &pol()).unwrap();
        let pre = pre_instrument(&proj, &sigma, &ScatteringMorphism::swap(2), &omega).unwrap();
        assert!((pre.weight - omega.expect(proj.op()).unwrap().re).abs() < 1e-13);
        let got = post_select(&proj, &sigma, &ScatteringMorphism::swap(2), &omega, &pol()).unwrap();
        assert!(got.matrix().max_diff(sigma.matrix()) < 1e-12);
        let pure = DensityState::pure(&v);
        let got = post_select(&proj, &pure, &ScatteringMorphism::swap(2), &omega, &pol()).unwrap();
        assert!(got.matrix().max_diff(proj.op()) < 1e-12);
        let err = post_select(&Effect::zero(2), &sigma, &ScatteringMorphism::swap(2), &omega, &pol());
        assert!(matches!(err, Err(FvError::ZeroProbability(_))));
    }

    #[test]
    fn induced_measures() {
        let p = pol();
        let sigma = DensityState::pure(&StateVector::basis(2, 0));
        let single = EffectValuedMeasure::new(vec![("all".into(), Effect::identity(2))], &p).unwrap();
        let ind = evm_induce(&single, &sigma, &ScatteringMorphism::controlled_flip(2, 2), &p).unwrap();
        assert!(ind.effect_of("all").unwrap().op().max_diff(&Operator::identity(2)) < 1e-14);

        let z = EffectValuedMeasure::projective(&Operator::pauli_z(), &p).unwrap();
        let mut rng = seeded(8);
        let any = random_density(&mut rng, 2);
        let sw = evm_induce(&z, &any, &ScatteringMorphism::swap(2), &p).unwrap();
        for ((_, a), (_, b)) in z.outcomes().iter().zip(sw.outcomes()) {
            assert!(a.op().max_diff(b.op()) < 1e-14);
            assert!(b.max_unsharpness(&p).unwrap() < 1e-12);
        }

        // a perfect flip copies σ_z; a partial rotation blurs it
        let cnot = evm_induce(&z, &sigma, &ScatteringMorphism::controlled_flip(2, 2), &p).unwrap();
        assert!(cnot.outcomes().iter().all(|(_, e)| e.max_unsharpness(&p).unwrap() < 1e-12));
        let blur = evm_induce(&z, &sigma, &ScatteringMorphism::controlled_rotation(std::f64::consts::FRAC_PI_6), &p).unwrap();
        for (_, e) in blur.outcomes() {
            assert!(e.unsharpness(&p).unwrap() > -1e-12);
            assert!(e.max_unsharpness(&p).unwrap() > 0.1);
        }
    }

    #[test]
    fn variances() {
        let mut rng = seeded(9);
        let omega = random_density(&mut rng, 2);
        let sigma = random_density(&mut rng, 2);
        let b = random_hermitian(&mut rng, 2);
        let (vm, vi) = variance_check(&b, &sigma, &ScatteringMorphism::identity(2, 2), &omega).unwrap();
        let mean = sigma.expect(&b).unwrap().re;
        assert!((vm - (sigma.expect(&(&b * &b)).unwrap().re - mean * mean)).abs() < 1e-13);
        assert!(vi.abs() < 1e-13);
        let (vm, vi) = variance_check(&b, &sigma, &ScatteringMorphism::swap(2), &omega).unwrap();
        assert!((vm - vi).abs() < 1e-13);
        for _ in 0..30 {
            let theta = ScatteringMorphism::random(&mut rng, 3, 3);
            let sigma = random_density(&mut rng, 3);
            let omega = random_density(&mut rng, 3);
            let b = random_hermitian(&mut rng, 3);
            let (vm, vi) = variance_check(&b, &sigma, &theta, &omega).unwrap();
            assert!(vm >= vi - 1e-10);
        }
    }

    #[test]
    fn effect_validation() {
        assert!(matches!(Effect::new(Operator::diag(&[1.5, 0.0]), &pol()), Err(FvError::NotAnEffect(_))));
        assert!(matches!(
            EffectValuedMeasure::new(vec![("a".into(), Effect::basis_projector(2, 0))], &pol()),
            Err(FvError::NotNormalized(_))
        ));
    }

    #[test]
    fn battery_passes() {
        let rep = fv_checks(42, 5, &pol()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
