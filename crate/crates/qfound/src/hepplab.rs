//! Discrete-time Coleman-Hepp chain: a spin-½ system passes a row of N
//! apparatus spins, rotating site k by θ about x at step k when the system
//! spin is down. θ = π is the full flip.
//!
//! Global vectors order the qubits as (system, site 1, …, site N) with the
//! system as the most significant bit.

use crate::numkernel::random::{random_hermitian, random_state, seeded};
use crate::numkernel::{c, canonical_phase, DensityState, NumError, Operator, StateVector, C64, ONE, ZERO};
use crate::report::CheckReport;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeppError {
    #[error("lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("chain exhausted: t = {t}, steps = {steps}, N = {n}")]
    ChainExhausted { t: usize, steps: usize, n: usize },
    #[error("operator support of {0} sites exceeds the chain length {1}")]
    SupportTooLarge(usize, usize),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Unit vector e ∈ ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub e: [f64; 3],
}

impl BlochVector {
    pub fn new(e: [f64; 3]) -> Result<Self, HeppError> {
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(HeppError::PreconditionViolated(format!("Bloch vector norm {n}")));
        }
        Ok(BlochVector { e })
    }

    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        BlochVector { e: [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()] }
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.e.iter().zip(&o.e).map(|(a, b)| a * b).sum()
    }

    /// σ⃗·e
    pub fn spin_operator(&self) -> Operator {
        let [x, y, z] = self.e;
        &Operator::pauli_x().scale_re(x) + &(&Operator::pauli_y().scale_re(y) + &Operator::pauli_z().scale_re(z))
    }
}

/// The +1 eigenvector of σ⃗·e. At the north pole the general formula is 0/0
/// and the ket is |↑⟩.
pub fn bloch_ket(b: &BlochVector) -> StateVector {
    let [x, y, z] = b.e;
    let v = if 1.0 - z < 1e-12 {
        StateVector::basis(2, 0)
    } else {
        let n = (2.0 * (1.0 - z)).sqrt();
        StateVector::new(vec![c(x / n, -y / n), c((1.0 - z) / n, 0.0)])
    };
    canonical_phase(v, 1e-12)
}

/// |⟨e¹|e²⟩|² for product states, as the product of (1 + e¹ₙ·e²ₙ)/2.
pub fn product_overlap(e1: &[BlochVector], e2: &[BlochVector]) -> Result<f64, HeppError> {
    if e1.len() != e2.len() {
        return Err(HeppError::LengthMismatch(e1.len(), e2.len()));
    }
    Ok(e1.iter().zip(e2).map(|(a, b)| (1.0 + a.dot(b)) / 2.0).product())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub c_plus: C64,
    pub c_minus: C64,
    pub n: usize,
    pub theta: f64,
    pub t: usize,
}

impl ChainState {
    pub fn new(c_plus: C64, c_minus: C64, n: usize, theta: f64) -> Result<Self, HeppError> {
        let norm = c_plus.norm_sqr() + c_minus.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(HeppError::PreconditionViolated(format!("|c₊|² + |c₋|² = {norm}")));
        }
        if !(theta > 0.0 && theta <= PI) {
            return Err(HeppError::PreconditionViolated(format!("θ = {theta} outside (0, π]")));
        }
        Ok(ChainState { c_plus, c_minus, n, theta, t: 0 })
    }

    /// Dimension of the global vector.
    pub fn dim(&self) -> usize {
        1 << (self.n + 1)
    }

    /// Phase-carrying coefficient of the fully flipped minus branch at θ = π:
    /// each flip contributes −i.
    pub fn c_minus_tilde(&self) -> C64 {
        self.c_minus * C64::new(0.0, -1.0).powu(self.t as u32)
    }
}

pub fn evolve_chain(s: &ChainState, steps: usize) -> Result<ChainState, HeppError> {
    if s.t + steps > s.n {
        return Err(HeppError::ChainExhausted { t: s.t, steps, n: s.n });
    }
    Ok(ChainState { t: s.t + steps, ..*s })
}

/// exp(−iθσ¹/2)|↑⟩
fn rotated_up(theta: f64) -> [C64; 2] {
    [c((theta / 2.0).cos(), 0.0), c(0.0, -(theta / 2.0).sin())]
}

/// The two branches c₊Ψ₊⊗↑ᴺ and c₋Ψ₋⊗R^{⊗t}↑ᴺ as full vectors.
pub fn branch_vectors(s: &ChainState) -> (StateVector, StateVector) {
    let sites_plus: Vec<[C64; 2]> = vec![[ONE, ZERO]; s.n];
    let sites_minus: Vec<[C64; 2]> = (0..s.n).map(|k| if k < s.t { rotated_up(s.theta) } else { [ONE, ZERO] }).collect();
    let build = |sys: [C64; 2], sites: &[[C64; 2]]| {
        let mut v = StateVector::new(sys.to_vec());
        for site in sites {
            v = v.kron(&StateVector::new(site.to_vec()));
        }
        v
    };
    (build([s.c_plus, ZERO], &sites_plus), build([ZERO, s.c_minus], &sites_minus))
}

pub fn global_state(s: &ChainState) -> StateVector {
    let (p, m) = branch_vectors(s);
    p.add(&m)
}

/// Closed form |c₊||c₋|·|cos(θ/2)|^t of the off-diagonal entry of the reduced
/// system state.
pub fn reduced_coherence(s: &ChainState) -> f64 {
    s.c_plus.norm() * s.c_minus.norm() * (s.theta / 2.0).cos().abs().powi(s.t as i32)
}

/// Reduced 2×2 system state, summing the apparatus index of the global vector.
pub fn reduced_system_state(s: &ChainState) -> Operator {
    let psi = global_state(s);
    let a = psi.amplitudes();
    let rest = 1usize << s.n;
    Operator::from_fn(2, |i, j| (0..rest).map(|r| a[i * rest + r] * a[j * rest + r].conj()).sum())
}

/// ⟨branch₊|(A ⊗ 𝟙)|branch₋⟩ for A acting on the system and the first
/// `support` apparatus sites.
pub fn local_cross_term(a: &Operator, support: usize, s: &ChainState) -> Result<C64, HeppError> {
    if support > s.n {
        return Err(HeppError::SupportTooLarge(support, s.n));
    }
    let local = 1usize << (support + 1);
    if a.dim() != local {
        return Err(NumError::DimensionMismatch { expected: local, found: a.dim() }.into());
    }
    let (p, m) = branch_vectors(s);
    let (p, m) = (p.amplitudes(), m.amplitudes());
    let rest = 1usize << (s.n - support);
    let mut acc = ZERO;
    for i in 0..local {
        for j in 0..local {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for r in 0..rest {
                acc += p[i * rest + r].conj() * aij * m[j * rest + r];
            }
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Apply a tensor product of Pauli matrices, one per qubit (system first).
pub fn apply_pauli_string(v: &StateVector, ops: &[Pauli]) -> StateVector {
    let nq = ops.len();
    assert_eq!(v.dim(), 1 << nq, "Pauli string length must match the qubit count");
    let a = v.amplitudes();
    let mut out = vec![ZERO; a.len()];
    for (idx, &amp) in a.iter().enumerate() {
        let mut target = idx;
        let mut phase = ONE;
        for (q, op) in ops.iter().enumerate() {
            let bit = 1 << (nq - 1 - q);
            let down = idx & bit != 0;
            match op {
                Pauli::I => {}
                Pauli::X => target ^= bit,
                Pauli::Y => {
                    target ^= bit;
                    // σ²|↑⟩ = i|↓⟩, σ²|↓⟩ = −i|↑⟩
                    phase *= if down { c(0.0, -1.0) } else { c(0.0, 1.0) };
                }
                Pauli::Z => {
                    if down {
                        phase = -phase;
                    }
                }
            }
        }
        out[target] += phase * amp;
    }
    StateVector::new(out)
}

/// σ¹ on the system and σ² on the first `m` sites.
pub fn witness_string(n: usize, m: usize) -> Vec<Pauli> {
    let mut ops = vec![Pauli::I; n + 1];
    ops[0] = Pauli::X;
    for op in ops.iter_mut().skip(1).take(m) {
        *op = Pauli::Y;
    }
    ops
}

/// ⟨ψ₊,t| σ₀¹ ⊗ σ₁² ⊗ … ⊗ σ_t² |ψ₋,t⟩ in the flip model.
pub fn bell_witness(s: &ChainState) -> Result<C64, HeppError> {
    if (s.theta - PI).abs() > 1e-12 {
        return Err(HeppError::PreconditionViolated("the witness is defined for θ = π".into()));
    }
    if s.t == 0 {
        return Err(HeppError::PreconditionViolated("the witness needs t ≥ 1".into()));
    }
    let (p, m) = branch_vectors(s);
    Ok(p.inner(&apply_pauli_string(&m, &witness_string(s.n, s.t))))
}

#[derive(Debug, Clone, Copy)]
pub struct TruncationCheck {
    pub m: usize,
    pub witness: f64,
    pub truncated: f64,
    /// operator norm of Z_t − A_L
    pub norm_gap: f64,
    pub holds: bool,
}

/// Truncate the witness to m < t sites and check the quasilocal estimate
/// |⟨ψ₊|Z|ψ₋⟩| ≤ |⟨ψ₊|A_L|ψ₋⟩| + ‖Z − A_L‖·‖ψ₊‖‖ψ₋‖.
pub fn truncation_check(s: &ChainState, m: usize) -> Result<TruncationCheck, HeppError> {
    if m >= s.t {
        return Err(HeppError::PreconditionViolated(format!("truncation m = {m} must be below t = {}", s.t)));
    }
    let (p, mv) = branch_vectors(s);
    let witness = bell_witness(s)?.norm();
    let truncated = p.inner(&apply_pauli_string(&mv, &witness_string(s.n, m))).norm();
    // Z − A_L = A_L(σ²^{⊗(t−m)} − 𝟙); a Pauli string with a nontrivial factor has
    // spectrum {±1}, so the norm is 2.
    let norm_gap = 2.0;
    let holds = truncated <= norm_gap && witness <= truncated + norm_gap * p.norm() * mv.norm() + 1e-12;
    Ok(TruncationCheck { m, witness, truncated, norm_gap, holds })
}

/// tr(W₁A) = tr(W₂A) within `tol` for every listed A.
pub fn macrostate_equivalent(w1: &DensityState, w2: &DensityState, observables: &[Operator], tol: f64) -> Result<bool, NumError> {
    if w1.dim() != w2.dim() {
        return Err(NumError::DimensionMismatch { expected: w1.dim(), found: w2.dim() });
    }
    for a in observables {
        if (w1.expect(a)? - w2.expect(a)?).norm() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Reduced coherence against the partial-trace route, local cross terms in the
/// flip model, and the t-independence of the witness.
pub fn hepp_checks(seed: u64, tol: f64) -> Result<CheckReport, HeppError> {
    let mut rep = CheckReport::new();
    let mut rng = seeded(seed);

    let mut worst = 0.0f64;
    for n in 1..=12usize {
        let cs = random_state(&mut rng, 2);
        for theta in [PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, PI] {
            let mut s = ChainState::new(cs[0], cs[1], n, theta)?;
            for _ in 0..=n {
                let rho = reduced_system_state(&s);
                worst = worst.max((rho[(0, 1)].norm() - reduced_coherence(&s)).abs());
                if s.t < n {
                    s = evolve_chain(&s, 1)?;
                }
            }
        }
    }
    rep.residual("reduced coherence: closed form vs partial trace (N ≤ 12)", worst, tol);

    let mut worst_cross = 0.0f64;
    for _ in 0..100 {
        let n = rand::Rng::random_range(&mut rng, 2..=8usize);
        let support = rand::Rng::random_range(&mut rng, 0..n);
        let t = rand::Rng::random_range(&mut rng, support + 1..=n);
        let cs = random_state(&mut rng, 2);
        let s = evolve_chain(&ChainState::new(cs[0], cs[1], n, PI)?, t)?;
        let a = random_hermitian(&mut rng, 1 << (support + 1));
        worst_cross = worst_cross.max(local_cross_term(&a, support, &s)?.norm());
    }
    rep.residual("θ = π: local cross terms for t > support (100 cases)", worst_cross, 1e-14);

    let cs = random_state(&mut rng, 2);
    let base = ChainState::new(cs[0], cs[1], 10, PI)?;
    let mut mags = Vec::new();
    let mut coh = 0.0f64;
    let mut trunc_ok = true;
    for t in 1..=10 {
        let s = evolve_chain(&base, t)?;
        mags.push(bell_witness(&s)?.norm());
        coh = coh.max(reduced_coherence(&s));
        for m in 0..t {
            trunc_ok &= truncation_check(&s, m)?.holds;
        }
    }
    let expected = cs[0].norm() * cs[1].norm();
    let spread = mags.iter().map(|x| (x - expected).abs()).fold(0.0, f64::max);
    rep.residual("witness magnitude spread over t = 1..10", spread, tol);
    rep.residual("θ = π: reduced coherence for t ≥ 1", coh, tol);
    rep.flag("truncated witness obeys the quasilocal bound", trunc_ok);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64, y: f64, z: f64) -> BlochVector {
        BlochVector::new([x, y, z]).unwrap()
    }

    #[test]
    fn bloch_ket_is_eigenvector() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let e = crate::numkernel::random::random_real_unit(&mut rng, 3);
            let b = unit(e[0], e[1], e[2]);
            let k = bloch_ket(&b);
            let img = b.spin_operator().apply(&k).unwrap();
            assert!(img.max_diff(&k) < 1e-12);
        }
        let north = bloch_ket(&unit(0.0, 0.0, 1.0));
        assert_eq!(north.amplitudes(), &[ONE, ZERO]);
    }

    #[test]
    fn overlap_law() {
        let z = unit(0.0, 0.0, 1.0);
        let x = unit(1.0, 0.0, 0.0);
        let ov = bloch_ket(&z).inner(&bloch_ket(&x)).norm_sqr();
        assert!((ov - 0.5).abs() < 1e-15);
        assert!((product_overlap(&[z], &[x]).unwrap() - 0.5).abs() < 1e-15);
        assert!(product_overlap(&[z], &[unit(0.0, 0.0, -1.0)]).unwrap().abs() < 1e-15);
        assert!(matches!(product_overlap(&[z], &[]), Err(HeppError::LengthMismatch(1, 0))));
    }

    #[test]
    fn chain_steps() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = ChainState::new(c(h, 0.0), c(h, 0.0), 3, PI).unwrap();
        assert_eq!(evolve_chain(&s, 0).unwrap(), s);
        assert!(matches!(evolve_chain(&s, 4), Err(HeppError::ChainExhausted { .. })));
        let s1 = evolve_chain(&s, 1).unwrap();
        let (_, m) = branch_vectors(&s1);
        // minus branch: |↓⟩ ⊗ (−i|↓⟩) ⊗ |↑↑⟩ → index 0b1100
        assert!((m[0b1100] - c(0.0, -h)).norm() < 1e-15);
        assert!((reduced_coherence(&s1)).abs() < 1e-15);
        assert!((reduced_coherence(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn half_angle_coherence() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = evolve_chain(&ChainState::new(c(h, 0.0), c(0.0, h), 4, PI / 2.0).unwrap(), 4).unwrap();
        assert!((reduced_coherence(&s) - 0.5 / 4.0).abs() < 1e-15);
        let rho = reduced_system_state(&s);
        assert!((rho[(0, 1)].norm() - 0.125).abs() < 1e-14);
    }

    #[test]
    fn bell_witness_preconditions() {
        let s = ChainState::new(ONE, ZERO, 2, PI / 2.0).unwrap();
        assert!(matches!(bell_witness(&evolve_chain(&s, 1).unwrap()), Err(HeppError::PreconditionViolated(_))));
        let s = ChainState::new(ONE, ZERO, 2, PI).unwrap();
        assert!(matches!(bell_witness(&s), Err(HeppError::PreconditionViolated(_))));
    }

    #[test]
    fn pauli_string_matches_matrices() {
        let mut rng = seeded(9);
        let v = random_state(&mut rng, 8);
        let ops = [Pauli::X, Pauli::Y, Pauli::Z];
        let m = crate::numkernel::tensor_all(&[&Operator::pauli_x(), &Operator::pauli_y(), &Operator::pauli_z()]);
        assert!(apply_pauli_string(&v, &ops).max_diff(&m.apply(&v).unwrap()) < 1e-14);
    }

    #[test]
    fn support_too_large() {
        let s = ChainState::new(ONE, ZERO, 2, PI).unwrap();
        assert!(matches!(local_cross_term(&Operator::identity(16), 3, &s), Err(HeppError::SupportTooLarge(3, 2))));
    }

    #[test]
    fn macrostates() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pure = DensityState::pure(&StateVector::new(vec![c(h, 0.0), c(h, 0.0)]));
        let pol = crate::numkernel::TolerancePolicy::default();
        let mixed = DensityState::new(Operator::diag(&[0.5, 0.5]), &pol).unwrap();
        let diag = vec![Operator::diag(&[1.0, 0.0]), Operator::diag(&[0.3, -2.0])];
        assert!(macrostate_equivalent(&pure, &pure, &[Operator::pauli_x()], 1e-12).unwrap());
        assert!(macrostate_equivalent(&pure, &mixed, &diag, 1e-12).unwrap());
        let mut with_x = diag.clone();
        with_x.push(Operator::pauli_x());
        assert!(!macrostate_equivalent(&pure, &mixed, &with_x, 1e-12).unwrap());
    }

    #[test]
    fn checks_pass() {
        let rep = hepp_checks(7, 1e-12).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
