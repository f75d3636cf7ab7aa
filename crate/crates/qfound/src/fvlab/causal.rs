//! Localization by tensor factors, causal composition of two probes and the
//! no-signaling test for three regions.

use super::{instrument_map, pre_instrument, Effect, FvError, ScatteringMorphism};
use crate::numkernel::{partial_trace, tensor_all, tensor_product, DensityState, NumError, Operator, TolerancePolicy, ONE, ZERO};
use crate::report::CheckReport;
use std::collections::{BTreeMap, BTreeSet};

/// System factors with their regions, causal edges between regions and a
/// symmetric spacelike relation.
///
/// An edge a → b states that b meets the causal future of a. Extended regions
/// make this relation intransitive: O₁ → O₂ → O₃ is compatible with O₃
/// spacelike to O₁. The edges must still form a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFactorization {
    pub factor_dims: Vec<usize>,
    pub region_of_factor: Vec<String>,
    regions: BTreeSet<String>,
    direct: BTreeMap<String, BTreeSet<String>>,
    future: BTreeMap<String, BTreeSet<String>>,
    spacelike: BTreeSet<(String, String)>,
}

impl LocalFactorization {
    pub fn new(
        factor_dims: Vec<usize>,
        region_of_factor: Vec<String>,
        edges: &[(&str, &str)],
        spacelike: &[(&str, &str)],
    ) -> Result<Self, FvError> {
        let bad = |m: String| Err(FvError::InvalidFactorization(m));
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return bad(format!("factor dimensions {factor_dims:?} must be positive"));
        }
        if factor_dims.len() != region_of_factor.len() {
            return bad("every factor needs a region".into());
        }
        let mut regions: BTreeSet<String> = region_of_factor.iter().cloned().collect();
        let mut direct: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for &(a, b) in edges {
            if a == b {
                return bad(format!("region {a} cannot precede itself"));
            }
            regions.insert(a.into());
            regions.insert(b.into());
            direct.entry(a.into()).or_default().insert(b.into());
        }
        // transitive closure; a region reaching itself is a cycle
        let mut future = BTreeMap::new();
        for r in &regions {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&String> = direct.get(r).map(|s| s.iter().collect()).unwrap_or_default();
            while let Some(x) = stack.pop() {
                if seen.insert(x.clone()) {
                    stack.extend(direct.get(x).into_iter().flatten());
                }
            }
            if seen.contains(r) {
                return bad(format!("causal order has a cycle through {r}"));
            }
            future.insert(r.clone(), seen);
        }
        let mut sl = BTreeSet::new();
        for &(a, b) in spacelike {
            regions.insert(a.into());
            regions.insert(b.into());
            sl.insert((a.to_string(), b.to_string()));
            sl.insert((b.to_string(), a.to_string()));
        }
        let mut out = LocalFactorization { factor_dims, region_of_factor, regions, direct, future, spacelike: sl };
        for r in out.regions.clone() {
            out.future.entry(r).or_default();
        }
        for (a, b) in &out.spacelike {
            if a == b || out.precedes(a, b) || out.precedes(b, a) {
                return bad(format!("regions {a} and {b} are declared spacelike but causally related"));
            }
        }
        Ok(out)
    }

    /// Single-factor system in region `region`.
    pub fn single(dim: usize, region: &str) -> Self {
        Self::new(vec![dim], vec![region.into()], &[], &[]).expect("one positive factor")
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn regions(&self) -> impl Iterator<Item = &String> {
        self.regions.iter()
    }

    pub fn has_region(&self, r: &str) -> bool {
        self.regions.contains(r)
    }

    /// A declared edge a → b.
    pub fn precedes(&self, a: &str, b: &str) -> bool {
        self.direct.get(a).is_some_and(|f| f.contains(b))
    }

    /// A directed path from a to b.
    pub fn reaches(&self, a: &str, b: &str) -> bool {
        self.future.get(a).is_some_and(|f| f.contains(b))
    }

    /// a meets J⁻(b)
    pub fn in_causal_past(&self, a: &str, b: &str) -> bool {
        a == b || self.precedes(a, b)
    }

    pub fn is_spacelike(&self, a: &str, b: &str) -> bool {
        self.spacelike.contains(&(a.to_string(), b.to_string()))
    }

    /// Lift an operator on the listed system factors to the whole system.
    pub fn lift(&self, op: &Operator, support: &[usize]) -> Result<Operator, FvError> {
        embed(op, support, &self.factor_dims)
    }

    /// Coupling in `region` acting by `u_local` on (support factors) ⊗ probe.
    pub fn local_coupling(
        &self,
        region: &str,
        support: &[usize],
        u_local: &Operator,
        probe_dim: usize,
        pol: &TolerancePolicy,
    ) -> Result<ScatteringMorphism, FvError> {
        let mut dims = self.factor_dims.clone();
        dims.push(probe_dim);
        let mut pos = support.to_vec();
        pos.push(self.factor_dims.len());
        let u = embed(u_local, &pos, &dims)?;
        let mut theta = ScatteringMorphism::new(u, self.total_dim(), probe_dim, pol)?;
        theta.region = region.into();
        theta.support = support.to_vec();
        self.validate(&theta)?;
        Ok(theta)
    }

    /// A coupling may touch only factors whose region is not spacelike to
    /// its own region.
    pub fn validate(&self, theta: &ScatteringMorphism) -> Result<(), FvError> {
        if theta.system_dim != self.total_dim() {
            return Err(NumError::DimensionMismatch { expected: self.total_dim(), found: theta.system_dim }.into());
        }
        for &f in &theta.support {
            let Some(rf) = self.region_of_factor.get(f) else {
                return Err(FvError::InvalidFactorization(format!("no factor {f}")));
            };
            if self.is_spacelike(rf, &theta.region) {
                return Err(FvError::CausalOrderViolated(format!(
                    "coupling in {} touches factor {f} localized in the spacelike region {rf}",
                    theta.region
                )));
            }
        }
        Ok(())
    }

    /// max ‖Θ(X) − X‖ over matrix units X on factors outside the support.
    pub fn off_support_residual(&self, theta: &ScatteringMorphism) -> Result<f64, FvError> {
        let mut dims = self.factor_dims.clone();
        dims.push(theta.probe_dim);
        let mut worst = 0.0f64;
        for (f, &d) in self.factor_dims.iter().enumerate() {
            if theta.support.contains(&f) {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    let mut e = Operator::zeros(d);
                    e[(i, j)] = ONE;
                    let x = embed(&e, &[f], &dims)?;
                    worst = worst.max(theta.apply(&x).max_diff(&x));
                }
            }
        }
        Ok(worst)
    }
}

/// Operator acting on `positions` (in that order) of a tensor product with
/// factor dimensions `dims`, identity elsewhere.
pub fn embed(local: &Operator, positions: &[usize], dims: &[usize]) -> Result<Operator, FvError> {
    let nf = dims.len();
    let mut seen = BTreeSet::new();
    if positions.iter().any(|&p| p >= nf || !seen.insert(p)) {
        return Err(FvError::InvalidFactorization(format!("positions {positions:?} do not index {nf} distinct factors")));
    }
    let ldims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
    let ld: usize = ldims.iter().product();
    if local.dim() != ld {
        return Err(NumError::DimensionMismatch { expected: ld, found: local.dim() }.into());
    }
    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; nf];
    for f in (0..nf.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let rest: Vec<usize> = (0..nf).filter(|f| !positions.contains(f)).collect();
    let offset = |factors: &[usize], mut idx: usize| {
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (idx % dims[f]) * strides[f];
            idx /= dims[f];
        }
        off
    };
    let local_off: Vec<usize> = (0..ld).map(|i| offset(positions, i)).collect();
    let rest_count: usize = rest.iter().map(|&f| dims[f]).product();
    let mut out = Operator::zeros(total);
    for r in 0..rest_count {
        let base = offset(&rest, r);
        for (a, &oa) in local_off.iter().enumerate() {
            for (b, &ob) in local_off.iter().enumerate() {
                let z = local[(a, b)];
                if z != ZERO {
                    out[(base + oa, base + ob)] = z;
                }
            }
        }
    }
    Ok(out)
}

/// A probe: its coupling, preparation and the effect read off.
#[derive(Debug, Clone)]
pub struct Probe {
    pub theta: ScatteringMorphism,
    pub sigma: DensityState,
    pub effect: Effect,
}

/// Two probes coupled in K₁ then K₂ with K₂ ∩ J⁻(K₁) = ∅.
///
/// Three routes to the unnormalized final state are compared: applying the
/// two pre-instruments in turn, the joint probe on probe₁ ⊗ system ⊗ probe₂
/// with Θ̂ = Θ̂₁ ∘ Θ̂₂, and the same joint probe reordered as
/// system ⊗ (probe₁ ⊗ probe₂) and fed through the single-probe
/// pre-instrument. For spacelike K₁, K₂ the reversed sequence is compared too.
pub fn compose_instruments(
    fact: &LocalFactorization,
    p1: &Probe,
    p2: &Probe,
    omega: &DensityState,
    pol: &TolerancePolicy,
) -> Result<CheckReport, FvError> {
    let tol = pol.eq_tol;
    let (t1, t2) = (&p1.theta, &p2.theta);
    fact.validate(t1)?;
    fact.validate(t2)?;
    if fact.in_causal_past(&t2.region, &t1.region) {
        return Err(FvError::CausalOrderViolated(format!("{} lies in the causal past of {}", t2.region, t1.region)));
    }
    let spacelike = fact.is_spacelike(&t1.region, &t2.region);
    if spacelike {
        if let Some(f) = t1.support.iter().find(|f| t2.support.contains(f)) {
            return Err(FvError::InvalidFactorization(format!("spacelike couplings share system factor {f}")));
        }
    }
    let s = fact.total_dim();
    let (d1, d2) = (t1.probe_dim, t2.probe_dim);

    // probe₁ ⊗ system ⊗ probe₂: Θ̂₁ is Θ₁ with its arguments swapped, Θ̂₂ = 1 ⊗ Θ₂
    let dims = [d1, s, d2];
    let hat1 = embed(&t1.u, &[1, 0], &dims)?;
    let hat2 = embed(&t2.u, &[1, 2], &dims)?;
    let w = &hat2 * &hat1;
    let prep = tensor_all(&[p1.sigma.matrix(), omega.matrix(), p2.sigma.matrix()]);
    let evolved = &(&w * &prep) * &w.adjoint();
    let effect = tensor_all(&[p1.effect.op(), &Operator::identity(s), p2.effect.op()]);
    let joint = partial_trace(&(&evolved * &effect), &dims, &[0, 2])?;

    // system ⊗ (probe₁ ⊗ probe₂) as one probe
    let sdims = [s, d1, d2];
    let check = &embed(&t2.u, &[0, 2], &sdims)? * &embed(&t1.u, &[0, 1], &sdims)?;
    let combined = ScatteringMorphism::new(check, s, d1 * d2, pol)?;
    let single = pre_instrument(
        &Effect::new(tensor_product(p1.effect.op(), p2.effect.op()), pol)?,
        &p1.sigma.tensor(&p2.sigma),
        &combined,
        omega,
    )?;

    let first = instrument_map(p1.effect.op(), p1.sigma.matrix(), t1, omega.matrix())?;
    let seq = instrument_map(p2.effect.op(), p2.sigma.matrix(), t2, &first)?;
    let reversed = instrument_map(
        p1.effect.op(),
        p1.sigma.matrix(),
        t1,
        &instrument_map(p2.effect.op(), p2.sigma.matrix(), t2, omega.matrix())?,
    )?;

    let mut rep = CheckReport::new();
    rep.residual("coupling 1 trivial off its support", fact.off_support_residual(t1)?, tol);
    rep.residual("coupling 2 trivial off its support", fact.off_support_residual(t2)?, tol);
    rep.residual("sequential vs joint probe", seq.max_diff(&joint), tol);
    rep.residual("joint probe in system-first ordering", joint.max_diff(&single.rho), tol);
    let (w_seq, w_joint) = (seq.trace().re, joint.trace().re);
    rep.residual("joint probability", (w_seq - w_joint).abs(), tol);
    rep.info("probability of both effects", w_joint);
    rep.info("probability after the first effect", first.trace().re);
    if w_joint > tol && first.trace().re > tol {
        // post-selecting in two steps or once gives the same state
        let two_step = seq.scale_re(1.0 / w_seq);
        let one_step = joint.scale_re(1.0 / w_joint);
        rep.residual("post-selected states agree", two_step.max_diff(&one_step), tol.max(tol / w_joint));
    }
    let gap = reversed.max_diff(&joint);
    if spacelike {
        rep.residual("order independence", gap, tol);
    } else {
        rep.info("order-swapped gap", gap);
    }
    Ok(rep)
}

/// An observable on some system factors, localized in `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservable {
    pub op: Operator,
    pub support: Vec<usize>,
    pub region: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonSignaling {
    pub with_a: f64,
    pub without_a: f64,
    pub gap: f64,
}

/// ω_AB(C) against ω_B(C) for A coupled in O₁, B in O₂ and C read in O₃.
///
/// Requires O₂ ∩ J⁻(O₁) = ∅, O₃ ∩ J⁻(O₂) = ∅ and O₃ spacelike to O₁. At
/// finite dimension Θ̂₂(C ⊗ 1 ⊗ 1) lives on the factors of C and of the
/// second coupling, so those must be disjoint from the first coupling.
#[allow(clippy::too_many_arguments)]
pub fn nonsignaling_check(
    fact: &LocalFactorization,
    theta1: &ScatteringMorphism,
    theta2: &ScatteringMorphism,
    c: &LocalObservable,
    omega: &DensityState,
    sigma1: &DensityState,
    sigma2: &DensityState,
    pol: &TolerancePolicy,
) -> Result<NonSignaling, FvError> {
    let (o1, o2, o3) = (&theta1.region, &theta2.region, &c.region);
    fact.validate(theta1)?;
    fact.validate(theta2)?;
    let violated = |m: String| Err(FvError::CausalOrderViolated(m));
    if fact.in_causal_past(o2, o1) {
        return violated(format!("{o2} lies in the causal past of {o1}"));
    }
    if fact.in_causal_past(o3, o2) {
        return violated(format!("{o3} lies in the causal past of {o2}"));
    }
    if !fact.is_spacelike(o3, o1) {
        return violated(format!("{o3} is not spacelike to {o1}"));
    }
    for &f in &c.support {
        if fact.region_of_factor.get(f).is_none_or(|rf| fact.is_spacelike(rf, o3)) {
            return violated(format!("observable in {o3} is not localizable on factor {f}"));
        }
    }
    if let Some(f) = theta1.support.iter().find(|f| c.support.contains(f) || theta2.support.contains(f)) {
        return violated(format!("coupling in {o1} shares factor {f} with the later coupling or the observable"));
    }
    signaling_gap_unchecked(fact, theta1, theta2, c, omega, sigma1, sigma2, pol)
}

/// The two expectations without any causal precondition.
#[allow(clippy::too_many_arguments)]
pub fn signaling_gap_unchecked(
    fact: &LocalFactorization,
    theta1: &ScatteringMorphism,
    theta2: &ScatteringMorphism,
    c: &LocalObservable,
    omega: &DensityState,
    sigma1: &DensityState,
    sigma2: &DensityState,
    _pol: &TolerancePolicy,
) -> Result<NonSignaling, FvError> {
    let s = fact.total_dim();
    let (d1, d2) = (theta1.probe_dim, theta2.probe_dim);
    let c_sys = fact.lift(&c.op, &c.support)?;

    // system ⊗ probe₁ ⊗ probe₂, Θ̂₁ = Θ₁ ⊗₃ 1 and Θ̂₂ = Θ₂ ⊗₂ 1
    let dims = [s, d1, d2];
    let w = &embed(&theta2.u, &[0, 2], &dims)? * &embed(&theta1.u, &[0, 1], &dims)?;
    let prep = tensor_all(&[omega.matrix(), sigma1.matrix(), sigma2.matrix()]);
    let c_full = tensor_all(&[&c_sys, &Operator::identity(d1), &Operator::identity(d2)]);
    let with_a = (&(&(&w * &prep) * &w.adjoint()) * &c_full).trace().re;

    let without_a = omega.tensor(sigma2).expect(&theta2.apply(&tensor_product(&c_sys, &Operator::identity(d2))))?.re;
    Ok(NonSignaling { with_a, without_a, gap: (with_a - without_a).abs() })
}
