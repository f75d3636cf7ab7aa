//! Measurement under an additive conservation law: the Yanase condition, the
//! fiduciary approximate-measurement apparatus, conserving unitary extension
//! and Ozawa's noise bound.

pub mod fiduciary;
pub mod manifest;

pub use fiduciary::{build_fiduciary, fiduciary_checks, fiduciary_unitary, minimal_cutoff, verify_fiduciary, FiduciaryApparatus, LambdaRange};
pub use manifest::{parse_manifest, write_manifest, ManifestError};

use crate::numkernel::random::{random_hermitian, random_state, random_unitary, seeded};
use crate::numkernel::{
    complete_basis, hermitian_eigendecomposition, tensor_product, NumError, Operator, StateVector, TolerancePolicy, C64, ZERO,
};
use crate::report::CheckReport;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WayError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("conserved charge has a non-integer eigenvalue {0}")]
    NonIntegerSpectrum(f64),
    #[error("Gram matrix for λ = {lambda} is not positive semidefinite (min eigenvalue {min_eig})")]
    GramNotPsd { lambda: i64, min_eig: f64 },
    #[error("block for λ = {lambda} has dimension {have}, needs {need}")]
    InsufficientMultiplicity { lambda: i64, have: usize, need: usize },
    #[error("projected Gram matrices differ at λ = {lambda}, pair ({alpha}, {beta}): gap {gap}")]
    GramMismatch { lambda: f64, alpha: usize, beta: usize, gap: f64 },
    #[error("coupling does not conserve the charge: ‖[U, L]‖ = {0}")]
    ConservationViolated(f64),
    #[error("both charge variances vanish while the commutator term is {0}")]
    ZeroVariance(f64),
}

/// A measured observable with the conserved charges of system and apparatus.
#[derive(Debug, Clone)]
pub struct ConservedPair {
    pub m: Operator,
    pub l1: Operator,
    pub l2: Operator,
    pub l: i64,
}

impl ConservedPair {
    pub fn new(m: Operator, l1: Operator, l2: Operator, pol: &TolerancePolicy) -> Result<Self, WayError> {
        for (name, op) in [("M", &m), ("L1", &l1), ("L2", &l2)] {
            if !op.is_hermitian(pol.eq_tol) {
                return Err(WayError::Invalid(format!("{name} is not Hermitian")));
            }
        }
        if m.dim() != l1.dim() {
            return Err(NumError::DimensionMismatch { expected: l1.dim(), found: m.dim() }.into());
        }
        let l = integer_spectrum(&l1, pol)?.iter().map(|&(v, _)| v.abs()).max().unwrap_or(0);
        integer_spectrum(&l2, pol)?;
        Ok(ConservedPair { m, l1, l2, l })
    }

    /// L = L1 ⊗ 1 + 1 ⊗ L2
    pub fn total_charge(&self) -> Operator {
        total_charge(&self.l1, &self.l2)
    }
}

pub fn total_charge(l1: &Operator, l2: &Operator) -> Operator {
    &tensor_product(l1, &Operator::identity(l2.dim())) + &tensor_product(&Operator::identity(l1.dim()), l2)
}

/// Integer eigenvalues with their spectral projectors, ascending.
pub fn integer_spectrum(op: &Operator, pol: &TolerancePolicy) -> Result<Vec<(i64, Operator)>, WayError> {
    let eig = hermitian_eigendecomposition(op, pol)?;
    let mut out = Vec::new();
    for (v, vecs) in eig.clusters(pol.eq_tol.max(1e-9)) {
        let k = v.round();
        if (v - k).abs() > 1e-9 {
            return Err(WayError::NonIntegerSpectrum(v));
        }
        out.push((k as i64, Operator::projector_onto(&vecs, op.dim())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YanaseVerdict {
    pub commutes: bool,
    pub commutator_max: f64,
}

impl YanaseVerdict {
    pub fn statement(&self) -> &'static str {
        if self.commutes {
            "M commutes with the conserved charge: exact repeatable measurement is not excluded"
        } else {
            "M does not commute with the conserved charge: no exact conservation-respecting repeatable measurement exists"
        }
    }
}

/// [L1, M] = 0 within the policy tolerance.
pub fn yanase_condition(m: &Operator, l1: &Operator, pol: &TolerancePolicy) -> Result<YanaseVerdict, WayError> {
    for op in [m, l1] {
        let dev = op.hermitian_deviation();
        if dev > pol.eq_tol {
            return Err(NumError::NotHermitian { max_dev: dev }.into());
        }
    }
    let commutator_max = l1.commutator(m)?.max_abs();
    Ok(YanaseVerdict { commutes: commutator_max <= pol.eq_tol, commutator_max })
}

/// Orthonormal eigenspaces of L; diagonal L takes the fast path.
fn charge_eigenspaces(l: &Operator, pol: &TolerancePolicy) -> Result<Vec<(f64, Vec<StateVector>)>, WayError> {
    let n = l.dim();
    if l.is_diagonal(pol.eq_tol) {
        let mut groups: Vec<(f64, Vec<StateVector>)> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| l[(a, a)].re.total_cmp(&l[(b, b)].re));
        for i in idx {
            let v = l[(i, i)].re;
            match groups.last_mut() {
                Some((w, vecs)) if (v - *w).abs() <= pol.eq_tol => vecs.push(StateVector::basis(n, i)),
                _ => groups.push((v, vec![StateVector::basis(n, i)])),
            }
        }
        return Ok(groups);
    }
    Ok(hermitian_eigendecomposition(l, pol)?.clusters(pol.eq_tol))
}

/// A unitary commuting with L that maps each `psi_in[α]` to `psi_out[α]`.
///
/// Built per eigenspace of L: pair the projected input and output vectors by
/// simultaneous Gram-Schmidt, then complete both orthonormal families in index
/// order and map one completion onto the other.
pub fn extend_conserving_unitary(
    psi_in: &[StateVector],
    psi_out: &[StateVector],
    l: &Operator,
    pol: &TolerancePolicy,
) -> Result<Operator, WayError> {
    if psi_in.len() != psi_out.len() {
        return Err(WayError::Invalid(format!("{} inputs vs {} outputs", psi_in.len(), psi_out.len())));
    }
    let n = l.dim();
    for v in psi_in.iter().chain(psi_out) {
        if v.dim() != n {
            return Err(NumError::DimensionMismatch { expected: n, found: v.dim() }.into());
        }
    }
    let mut u = Operator::zeros(n);
    for (lambda, basis) in charge_eigenspaces(l, pol)? {
        let m = basis.len();
        let coords = |v: &StateVector| StateVector::new(basis.iter().map(|b| b.inner(v)).collect());
        let a: Vec<StateVector> = psi_in.iter().map(coords).collect();
        let b: Vec<StateVector> = psi_out.iter().map(coords).collect();

        let mut worst = (0.0, 0, 0);
        for i in 0..a.len() {
            for j in i..a.len() {
                let gap = (a[i].inner(&a[j]) - b[i].inner(&b[j])).norm();
                if gap > worst.0 {
                    worst = (gap, i, j);
                }
            }
        }
        if worst.0 > pol.eq_tol {
            return Err(WayError::GramMismatch { lambda, alpha: worst.1, beta: worst.2, gap: worst.0 });
        }

        let mut e: Vec<StateVector> = Vec::new();
        let mut f: Vec<StateVector> = Vec::new();
        for (ai, bi) in a.iter().zip(&b) {
            let mut v = ai.clone();
            let mut w = bi.clone();
            for _ in 0..2 {
                for (ej, fj) in e.iter().zip(&f) {
                    let cv = ej.inner(&v);
                    v.axpy(-cv, ej);
                    let cw = fj.inner(&w);
                    w.axpy(-cw, fj);
                }
            }
            let nv = v.norm();
            if nv > 1e-9 {
                e.push(v.scale(C64::new(1.0 / nv, 0.0)));
                f.push(w.scale(C64::new(1.0 / w.norm(), 0.0)));
            }
        }
        let e = complete_basis(&e, m, 1e-8);
        let f = complete_basis(&f, m, 1e-8);
        // block in coordinates: V = Σ_j f_j e_j†, lifted by the eigenspace basis
        let mut lifted_e = Vec::with_capacity(m);
        let mut lifted_f = Vec::with_capacity(m);
        for (ej, fj) in e.iter().zip(&f) {
            let lift = |c: &StateVector| {
                let mut out = StateVector::zeros(n);
                for (k, bk) in basis.iter().enumerate() {
                    out.axpy(c[k], bk);
                }
                out
            };
            lifted_e.push(lift(ej));
            lifted_f.push(lift(fj));
        }
        for (ej, fj) in lifted_e.iter().zip(&lifted_f) {
            let fa = fj.amplitudes();
            let ea = ej.amplitudes();
            let nz_f: Vec<usize> = (0..n).filter(|&r| fa[r] != ZERO).collect();
            let nz_e: Vec<usize> = (0..n).filter(|&s| ea[s] != ZERO).collect();
            for &r in &nz_f {
                for &s in &nz_e {
                    u[(r, s)] += fa[r] * ea[s].conj();
                }
            }
        }
    }
    Ok(u)
}

/// max |[U, L]| entry; O(n²) for diagonal L.
pub fn commutator_max(u: &Operator, l: &Operator, pol: &TolerancePolicy) -> f64 {
    let n = u.dim();
    if l.is_diagonal(pol.eq_tol) {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((u[(i, j)] * (l[(j, j)] - l[(i, i)])).norm());
            }
        }
        return worst;
    }
    u.commutator(l).map(|c| c.max_abs()).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OzawaBound {
    pub noise_sq: f64,
    pub lower_bound: f64,
    /// both charge variances vanished; the bound is reported as 0
    pub zero_variance: bool,
}

fn variance(op: &Operator, v: &StateVector) -> Result<f64, NumError> {
    let av = op.apply(v)?;
    Ok(av.norm_sqr() - v.inner(&av).re.powi(2))
}

/// Noise ⟨ψ⊗ξ, N²(ψ⊗ξ)⟩ for N = U*(1⊗A)U − M⊗1 and the Robertson lower bound
/// |⟨[N, L]⟩|² / (4 Var(L1) + 4 Var(L2)).
#[allow(clippy::too_many_arguments)]
pub fn ozawa_noise_bound(
    u: &Operator,
    m: &Operator,
    a_probe: &Operator,
    l1: &Operator,
    l2: &Operator,
    psi: &StateVector,
    xi: &StateVector,
    pol: &TolerancePolicy,
) -> Result<OzawaBound, WayError> {
    let l = total_charge(l1, l2);
    let comm = commutator_max(u, &l, pol);
    if comm > pol.eq_tol {
        return Err(WayError::ConservationViolated(comm));
    }
    let d1 = l1.dim();
    let d2 = l2.dim();
    let heis = u.adjoint().try_mul(&tensor_product(&Operator::identity(d1), a_probe))?.try_mul(u)?;
    let noise_op = heis.try_sub(&tensor_product(m, &Operator::identity(d2)))?;
    let state = psi.kron(xi);
    let nv = noise_op.apply(&state)?;
    let noise_sq = nv.norm_sqr();
    let commutator = noise_op.commutator(&l)?;
    let numerator = state.inner(&commutator.apply(&state)?).norm_sqr();
    let var = 4.0 * variance(l1, psi)? + 4.0 * variance(l2, xi)?;
    if var <= pol.eq_tol {
        if numerator <= pol.eq_tol {
            return Ok(OzawaBound { noise_sq, lower_bound: 0.0, zero_variance: true });
        }
        return Err(WayError::ZeroVariance(numerator));
    }
    Ok(OzawaBound { noise_sq, lower_bound: numerator / var, zero_variance: false })
}

/// Exact repeatable measurement of M = σ_z with L1 = diag(1, 0) and a
/// two-block apparatus; the Yanase condition holds.
pub fn exact_yanase_case(pol: &TolerancePolicy) -> Result<OzawaBound, WayError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = Operator::pauli_z();
    let l1 = Operator::diag(&[1.0, 0.0]);
    // apparatus basis (λ, j): index 2λ + j for λ ∈ {0, 1}, j ∈ {0, 1}
    let l2 = Operator::diag(&[0.0, 0.0, 1.0, 1.0]);
    let pointer = |j: usize| StateVector::from_real(&(0..4).map(|i| if i % 2 == j { h } else { 0.0 }).collect::<Vec<_>>());
    let xi = pointer(0);
    let phi = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
    let psi_in: Vec<StateVector> = phi.iter().map(|p| p.kron(&xi)).collect();
    let psi_out: Vec<StateVector> = phi.iter().enumerate().map(|(j, p)| p.kron(&pointer(j))).collect();
    let u = extend_conserving_unitary(&psi_in, &psi_out, &total_charge(&l1, &l2), pol)?;
    // pointer observable: σ_z eigenvalue +1 on X₀, −1 on X₁
    let a = &Operator::outer(&pointer(0), &pointer(0)) - &Operator::outer(&pointer(1), &pointer(1));
    let psi = StateVector::from_real(&[0.6, 0.8]);
    ozawa_noise_bound(&u, &m, &a, &l1, &l2, &psi, &xi, pol)
}

/// Random block-diagonal unitary commuting with a diagonal integer charge.
pub fn random_conserving_coupling(rng: &mut crate::numkernel::random::TestRng, l: &Operator, pol: &TolerancePolicy) -> Result<Operator, WayError> {
    let n = l.dim();
    let mut u = Operator::zeros(n);
    for (_, basis) in charge_eigenspaces(l, pol)? {
        let idx: Vec<usize> = basis.iter().map(|b| b.amplitudes().iter().position(|z| *z != ZERO).unwrap()).collect();
        let block = random_unitary(rng, idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                u[(i, j)] = block[(a, b)];
            }
        }
    }
    Ok(u)
}

/// Seeded Ozawa survey: `cases` random conserving couplings with total
/// dimension at most 12, plus the exact Yanase case.
pub fn ozawa_checks(seed: u64, cases: usize, pol: &TolerancePolicy) -> Result<CheckReport, WayError> {
    let mut rep = CheckReport::new();
    let mut rng = seeded(seed);
    let mut worst_slack = f64::INFINITY;
    let mut positive = 0usize;
    for _ in 0..cases {
        let d1 = rng.random_range(2..=3usize);
        let d2 = rng.random_range(2..=12 / d1);
        let l1 = Operator::diag(&(0..d1).map(|_| rng.random_range(-1..=1i64) as f64).collect::<Vec<_>>());
        let l2 = Operator::diag(&(0..d2).map(|_| rng.random_range(-2..=2i64) as f64).collect::<Vec<_>>());
        let u = random_conserving_coupling(&mut rng, &total_charge(&l1, &l2), pol)?;
        let m = random_hermitian(&mut rng, d1);
        let a = random_hermitian(&mut rng, d2);
        let psi = random_state(&mut rng, d1);
        let xi = random_state(&mut rng, d2);
        match ozawa_noise_bound(&u, &m, &a, &l1, &l2, &psi, &xi, pol) {
            Ok(b) => {
                worst_slack = worst_slack.min(b.noise_sq - b.lower_bound);
                if b.lower_bound > 0.0 {
                    positive += 1;
                }
            }
            Err(WayError::ZeroVariance(_)) => {}
            Err(e) => return Err(e),
        }
    }
    rep.push(crate::report::Check {
        name: format!("noise² − lower bound, minimum over {cases} couplings"),
        status: crate::report::Status::from_bool(worst_slack >= -1e-9),
        value: worst_slack.into(),
        expected: crate::report::Value::Text("≥ −1e-9".into()),
        tolerance: Some(1e-9),
    });
    rep.info("couplings with a positive lower bound", positive);
    let exact = exact_yanase_case(pol)?;
    rep.residual("exact case: noise²", exact.noise_sq, 1e-10);
    rep.residual("exact case: lower bound", exact.lower_bound, 1e-10);
    rep.info("lower bound", "unconditional Robertson form with the full charge");
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::c;

    #[test]
    fn yanase_examples() {
        let pol = TolerancePolicy::default();
        let z = Operator::pauli_z();
        let v = yanase_condition(&z, &z, &pol).unwrap();
        assert!(v.commutes && v.commutator_max == 0.0);
        let v = yanase_condition(&Operator::pauli_x(), &z, &pol).unwrap();
        assert!(!v.commutes);
        assert!((v.commutator_max - 2.0).abs() < 1e-15);
        assert!(yanase_condition(&Operator::identity(2), &Operator::pauli_y(), &pol).unwrap().commutes);
        let bad = Operator::from_rows(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert!(matches!(yanase_condition(&bad, &z, &pol), Err(WayError::Num(NumError::NotHermitian { .. }))));
    }

    #[test]
    fn identity_extension() {
        let pol = TolerancePolicy::default();
        let l = Operator::diag(&[0.0, 1.0, 1.0]);
        let v = StateVector::from_real(&[0.6, 0.8, 0.0]);
        let u = extend_conserving_unitary(std::slice::from_ref(&v), std::slice::from_ref(&v), &l, &pol).unwrap();
        assert!(u.is_unitary(1e-12));
        assert!(u.apply(&v).unwrap().max_diff(&v) < 1e-12);
        assert!(commutator_max(&u, &l, &pol) < 1e-12);
    }

    #[test]
    fn swap_inside_eigenspace() {
        let pol = TolerancePolicy::default();
        let l = Operator::diag(&[0.0, 1.0, 1.0]);
        let (a, b) = (StateVector::basis(3, 1), StateVector::basis(3, 2));
        let u = extend_conserving_unitary(&[a.clone(), b.clone()], &[b.clone(), a.clone()], &l, &pol).unwrap();
        assert!(u.is_unitary(1e-12));
        assert!(u.apply(&a).unwrap().max_diff(&b) < 1e-12);
        assert!(u.commutator(&l).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn mass_moved_between_eigenspaces() {
        let pol = TolerancePolicy::default();
        let l = Operator::diag(&[0.0, 1.0]);
        let r = extend_conserving_unitary(&[StateVector::basis(2, 0)], &[StateVector::basis(2, 1)], &l, &pol);
        assert!(matches!(r, Err(WayError::GramMismatch { .. })));
    }

    #[test]
    fn non_diagonal_charge() {
        let pol = TolerancePolicy::default();
        let l = Operator::pauli_x();
        let plus = StateVector::from_real(&[1.0, 1.0]).normalized();
        let ph = plus.scale(c(0.0, 1.0));
        let u = extend_conserving_unitary(std::slice::from_ref(&plus), std::slice::from_ref(&ph), &l, &pol).unwrap();
        assert!(u.apply(&plus).unwrap().max_diff(&ph) < 1e-12);
        assert!(u.commutator(&l).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn exact_case_has_no_noise() {
        let b = exact_yanase_case(&TolerancePolicy::default()).unwrap();
        assert!(b.noise_sq.abs() < 1e-12);
        assert!(b.lower_bound.abs() < 1e-12);
    }

    #[test]
    fn conservation_violation_rejected() {
        let pol = TolerancePolicy::default();
        let l1 = Operator::diag(&[1.0, 0.0]);
        let l2 = Operator::diag(&[0.0, 0.0]);
        let u = tensor_product(&Operator::pauli_x(), &Operator::identity(2));
        let r = ozawa_noise_bound(&u, &l1, &l2, &l1, &l2, &StateVector::basis(2, 0), &StateVector::basis(2, 0), &pol);
        assert!(matches!(r, Err(WayError::ConservationViolated(_))));
    }

    #[test]
    fn eigenvector_probe_still_bounded() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(5);
        let l1 = Operator::diag(&[1.0, 0.0, -1.0]);
        let l2 = Operator::diag(&[0.0, 1.0, 1.0, 2.0]);
        let u = random_conserving_coupling(&mut rng, &total_charge(&l1, &l2), &pol).unwrap();
        let m = random_hermitian(&mut rng, 3);
        let a = random_hermitian(&mut rng, 4);
        let psi = random_state(&mut rng, 3);
        let b = ozawa_noise_bound(&u, &m, &a, &l1, &l2, &psi, &StateVector::basis(4, 1), &pol).unwrap();
        assert!(b.noise_sq >= b.lower_bound - 1e-9);
    }

    #[test]
    fn survey_passes() {
        let rep = ozawa_checks(11, 30, &TolerancePolicy::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
