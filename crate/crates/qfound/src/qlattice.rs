//! The lattice of orthogonal projectors: meet, join, complement, order, and
//! the orthomodular, modular and distributive laws.

use crate::numkernel::random::{random_state, seeded, TestRng};
use crate::numkernel::{
    hermitian_eigendecomposition, orthonormal_range_basis, NumError, Operator, StateVector, TolerancePolicy,
};
use crate::report::{Check, CheckReport, Status, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("not a projector: eigenvalue {eigenvalue:.3e} is neither 0 nor 1")]
    NotProjector { eigenvalue: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no witness found after {attempts} attempts")]
    SearchExhausted { attempts: usize },
}

/// A validated orthogonal projector together with an orthonormal basis of its range.
#[derive(Debug, Clone)]
pub struct Projector {
    op: Operator,
    basis: Vec<StateVector>,
}

impl PartialEq for Projector {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
    }
}

impl Projector {
    /// Validate `op` as a projector; eigenvalues strictly between tol and 1−tol are rejected.
    pub fn new(op: Operator, pol: &TolerancePolicy) -> Result<Self, LatticeError> {
        let e = hermitian_eigendecomposition(&op, pol)?;
        let mut basis = Vec::new();
        for (lam, v) in e.values.iter().zip(e.vectors) {
            if (lam - 1.0).abs() <= pol.eq_tol {
                basis.push(v);
            } else if lam.abs() > pol.eq_tol {
                return Err(LatticeError::NotProjector { eigenvalue: *lam });
            }
        }
        basis.reverse();
        let op = op.hermitian_part();
        Ok(Projector { op, basis })
    }

    /// Projector onto the span of arbitrary vectors.
    pub fn from_span(vectors: &[StateVector], dim: usize, pol: &TolerancePolicy) -> Self {
        let basis = orthonormal_range_basis(vectors, pol);
        Self::from_orthonormal(basis, dim)
    }

    pub(crate) fn from_orthonormal(basis: Vec<StateVector>, dim: usize) -> Self {
        let op = Operator::projector_onto(&basis, dim);
        Projector { op, basis }
    }

    pub fn ray(v: &StateVector) -> Self {
        let n = v.normalized();
        Self::from_orthonormal(vec![n], v.dim())
    }

    pub fn zero(dim: usize) -> Self {
        Projector { op: Operator::zeros(dim), basis: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_orthonormal((0..dim).map(|k| StateVector::basis(dim, k)).collect(), dim)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn range_basis(&self) -> &[StateVector] {
        &self.basis
    }

    pub fn max_diff(&self, other: &Projector) -> f64 {
        self.op.max_diff(&other.op)
    }

    pub fn approx_eq(&self, other: &Projector, tol: f64) -> bool {
        self.max_diff(other) <= tol
    }
}

fn same_dim(p: &Projector, q: &Projector) -> Result<(), LatticeError> {
    if p.dim() != q.dim() {
        return Err(NumError::DimensionMismatch { expected: p.dim(), found: q.dim() }.into());
    }
    Ok(())
}

/// 1 − P
pub fn complement(p: &Projector, pol: &TolerancePolicy) -> Projector {
    let n = p.dim();
    let mut family = p.basis.clone();
    family = crate::numkernel::complete_basis(&family, n, pol.eq_tol.sqrt());
    let basis = family.split_off(p.rank());
    Projector { op: &Operator::identity(n) - &p.op, basis }
}

/// Projector onto range(P) ∩ range(Q): the null space of (1−P)+(1−Q).
pub fn meet(p: &Projector, q: &Projector, pol: &TolerancePolicy) -> Result<Projector, LatticeError> {
    same_dim(p, q)?;
    let n = p.dim();
    let two = Operator::identity(n).scale_re(2.0);
    let s = &(&two - &p.op) - &q.op;
    let e = hermitian_eigendecomposition(&s, pol)?;
    // eigenvalues of S lie in [0, 2]; zero eigenvalue marks the intersection
    let basis: Vec<StateVector> =
        e.values.iter().zip(e.vectors).filter(|(l, _)| l.abs() <= pol.eq_tol).map(|(_, v)| v).collect();
    Ok(Projector::from_orthonormal(basis, n))
}

/// Projector onto span(range(P) ∪ range(Q)).
pub fn join(p: &Projector, q: &Projector, pol: &TolerancePolicy) -> Result<Projector, LatticeError> {
    same_dim(p, q)?;
    let mut all = p.basis.clone();
    all.extend(q.basis.iter().cloned());
    Ok(Projector::from_span(&all, p.dim(), pol))
}

/// P ≤ Q iff QP = P.
pub fn leq(p: &Projector, q: &Projector, pol: &TolerancePolicy) -> bool {
    if p.dim() != q.dim() {
        return false;
    }
    (&q.op * &p.op).max_diff(&p.op) <= pol.eq_tol
}

/// Q = P ∨ (¬P ∧ Q) for P ≤ Q.
pub fn check_orthomodular(p: &Projector, q: &Projector, pol: &TolerancePolicy) -> Result<bool, LatticeError> {
    if !leq(p, q, pol) {
        return Err(LatticeError::PreconditionViolated("P is not below Q".into()));
    }
    let rhs = join(p, &meet(&complement(p, pol), q, pol)?, pol)?;
    Ok(rhs.approx_eq(q, pol.eq_tol))
}

/// M ∨ (L ∧ N) = (M ∨ L) ∧ N for M ≤ N.
pub fn check_modular(m: &Projector, n: &Projector, l: &Projector, pol: &TolerancePolicy) -> Result<bool, LatticeError> {
    if !leq(m, n, pol) {
        return Err(LatticeError::PreconditionViolated("M is not below N".into()));
    }
    let lhs = join(m, &meet(l, n, pol)?, pol)?;
    let rhs = meet(&join(m, l, pol)?, n, pol)?;
    Ok(lhs.approx_eq(&rhs, pol.eq_tol))
}

#[derive(Debug, Clone)]
pub struct DistributivityWitness {
    pub p: Projector,
    pub q: Projector,
    pub r: Projector,
    /// P ∧ (Q ∨ R)
    pub lhs: Projector,
    /// (P ∧ Q) ∨ (P ∧ R)
    pub rhs: Projector,
    pub gap: f64,
    pub attempts: usize,
}

pub fn distributive_gap(
    p: &Projector,
    q: &Projector,
    r: &Projector,
    pol: &TolerancePolicy,
) -> Result<(Projector, Projector, f64), LatticeError> {
    let lhs = meet(p, &join(q, r, pol)?, pol)?;
    let rhs = join(&meet(p, q, pol)?, &meet(p, r, pol)?, pol)?;
    let gap = lhs.max_diff(&rhs);
    Ok((lhs, rhs, gap))
}

const WITNESS_ATTEMPTS: usize = 1000;

/// Search seeded random ray triples until distributivity fails by more than 0.5.
pub fn distributivity_witness(dim: usize, seed: u64, pol: &TolerancePolicy) -> Result<DistributivityWitness, LatticeError> {
    if dim < 2 {
        return Err(LatticeError::PreconditionViolated("dimension must be at least 2".into()));
    }
    let mut rng = seeded(seed);
    for attempt in 1..=WITNESS_ATTEMPTS {
        // in dim ≥ 3 put Q, R and P in a common plane so that P ≤ Q ∨ R
        let (p, q, r) = coplanar_rays(&mut rng, dim);
        let (lhs, rhs, gap) = distributive_gap(&p, &q, &r, pol)?;
        if gap > 0.5 {
            return Ok(DistributivityWitness { p, q, r, lhs, rhs, gap, attempts: attempt });
        }
    }
    Err(LatticeError::SearchExhausted { attempts: WITNESS_ATTEMPTS })
}

fn coplanar_rays(rng: &mut TestRng, dim: usize) -> (Projector, Projector, Projector) {
    let a = random_state(rng, dim);
    let b = random_state(rng, dim);
    let mix = |rng: &mut TestRng| {
        let s = random_state(rng, 2);
        let mut v = a.scale(s[0]);
        v.axpy(s[1], &b);
        Projector::ray(&v)
    };
    (mix(rng), Projector::ray(&a), Projector::ray(&b))
}

/// Distance from ϑ₁ to span{a^k ξ_k − a^k ϑ_{2k} : k ≤ n} in the truncation to 2n+2 basis vectors,
/// with ξ_k = ϑ_{2k} + a^{−k} ϑ₁ + a^{−2k} ϑ_{2k+1}.
pub fn modularity_gap(n: usize, a: f64, pol: &TolerancePolicy) -> Result<f64, LatticeError> {
    if n < 1 || a <= 1.0 {
        return Err(LatticeError::PreconditionViolated("need n ≥ 1 and a > 1".into()));
    }
    let dim = 2 * n + 2;
    // ϑ_j is basis index j−1
    let vecs: Vec<StateVector> = (1..=n)
        .map(|k| {
            let ak = a.powi(k as i32);
            let mut xi = vec![0.0; dim];
            xi[2 * k - 1] = 1.0;
            xi[0] = a.powi(-(k as i32));
            xi[2 * k] = a.powi(-2 * k as i32);
            xi[2 * k - 1] -= 1.0;
            StateVector::from_real(&xi.iter().map(|x| x * ak).collect::<Vec<_>>())
        })
        .collect();
    let basis = orthonormal_range_basis(&vecs, pol);
    let t1 = StateVector::basis(dim, 0);
    let mut resid = t1.clone();
    for b in &basis {
        let ov = b.inner(&t1);
        resid.axpy(-ov, b);
    }
    Ok(resid.norm())
}

/// Random projector of the given rank.
pub fn random_projector(rng: &mut TestRng, dim: usize, rank: usize, pol: &TolerancePolicy) -> Projector {
    let vs: Vec<StateVector> = (0..rank).map(|_| random_state(rng, dim)).collect();
    Projector::from_span(&vs, dim, pol)
}

/// Random pair P ≤ Q: P is spanned by part of Q's random spanning set.
pub fn random_nested_pair(rng: &mut TestRng, dim: usize, pol: &TolerancePolicy) -> (Projector, Projector) {
    use rand::Rng;
    let rq = rng.random_range(0..=dim);
    let rp = if rq == 0 { 0 } else { rng.random_range(0..=rq) };
    let vs: Vec<StateVector> = (0..rq).map(|_| random_state(rng, dim)).collect();
    let q = Projector::from_span(&vs, dim, pol);
    let combos: Vec<StateVector> = (0..rp)
        .map(|_| {
            let w = random_state(rng, rq.max(1));
            let mut v = StateVector::zeros(dim);
            for (j, b) in vs.iter().enumerate() {
                v.axpy(w[j], b);
            }
            v
        })
        .collect();
    let p = Projector::from_span(&combos, dim, pol);
    (p, q)
}

/// Seeded survey of the lattice laws: orthomodularity on nested pairs,
/// modularity on triples with M ≤ N (dims 2–6), a distributivity witness in
/// dim 2 and the decay of the modularity gap.
pub fn lattice_checks(seed: u64, trials: usize, pol: &TolerancePolicy) -> Result<CheckReport, LatticeError> {
    use rand::Rng;
    let mut rep = CheckReport::new();
    let mut rng = seeded(seed);
    let mut om_fail = 0usize;
    for _ in 0..trials {
        let dim = rng.random_range(2..=6);
        let (p, q) = random_nested_pair(&mut rng, dim, pol);
        if !check_orthomodular(&p, &q, pol)? {
            om_fail += 1;
        }
    }
    rep.equal(format!("orthomodular law failures over {trials} nested pairs"), om_fail, 0usize);

    let mut mod_fail = 0usize;
    for _ in 0..trials {
        let dim = rng.random_range(2..=6);
        let (m, n) = random_nested_pair(&mut rng, dim, pol);
        let rank = rng.random_range(0..=dim);
        let l = random_projector(&mut rng, dim, rank, pol);
        if !check_modular(&m, &n, &l, pol)? {
            mod_fail += 1;
        }
    }
    rep.equal(format!("modular law failures over {trials} triples"), mod_fail, 0usize);

    match distributivity_witness(2, seed, pol) {
        Ok(w) => {
            rep.at_least("distributivity witness gap in dim 2", w.gap, 0.5);
            rep.info("witness attempts", w.attempts);
        }
        Err(e) => rep.flag(format!("distributivity witness in dim 2 ({e})"), false),
    }

    let mut worst = f64::NEG_INFINITY;
    for n in 1..=12usize {
        let g = modularity_gap(n, 2.0, pol)?;
        worst = worst.max(g - 0.5f64.powi(n as i32));
    }
    rep.push(Check {
        name: "modularity gap minus 2^-n, max over n = 1..12".into(),
        status: Status::from_bool(worst <= 0.0),
        value: Value::Num(worst),
        expected: Value::Text("≤ 0".into()),
        tolerance: None,
    });
    Ok(rep)
}
