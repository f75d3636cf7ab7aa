//! The two-friends scenario: knowledge base, derivation runs, ablations and
//! the quantum side of the protocol.

use super::{
    check_trace, derive_closure, parse_formula, EpiError, Formula, KnowledgeBase, Modality, ProofTrace, Refusal,
    TraceError, TrustMode,
};
use crate::numkernel::random::seeded;
use crate::numkernel::{tensor_product, Operator, StateVector};
use crate::report::CheckReport;
use num_rational::Ratio;
use rand::Rng;

pub const FR_KB: &str = include_str!("../../data/frauchiger_renner.kb");

/// Default round cap for scenario runs.
pub const FR_MAX_DEPTH: usize = 60;

pub fn fr_build_kb(mode: TrustMode) -> KnowledgeBase {
    KnowledgeBase::parse(FR_KB, mode).expect("shipped scenario parses")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Contradiction { agent: String },
    Consistent,
    /// cap hit before a fixpoint without a contradiction
    DepthExceeded,
}

impl Verdict {
    pub fn is_contradiction(&self) -> bool {
        matches!(self, Verdict::Contradiction { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Contradiction { agent } => format!("contradiction ({agent})"),
            Verdict::Consistent => "consistent".into(),
            Verdict::DepthExceeded => "depth exceeded".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrRun {
    pub mode: TrustMode,
    pub verdict: Verdict,
    /// round in which the decisive contradiction appeared
    pub contradiction_round: Option<usize>,
    pub rounds: usize,
    pub closure_size: usize,
    pub trace: ProofTrace,
    pub trace_check: Result<(), TraceError>,
    pub milestones: Vec<(&'static str, bool)>,
    /// every agent for which K φ and K ¬φ were both derived
    pub contradicting_agents: Vec<String>,
    pub blocked_step: Option<Refusal>,
    /// distinct refused edges with their reasons
    pub refused_edges: Vec<(String, String, String)>,
}

fn milestone_bodies(kb: &KnowledgeBase) -> [(&'static str, Vec<Formula>); 3] {
    let tag = |s: &str| {
        let f = parse_formula(s).expect("milestone formula");
        match kb.trust.mode {
            TrustMode::Plain => f,
            TrustMode::Contextual => f.retag(&|a| kb.context_of(a)),
        }
    };
    [
        ("friend-level prediction F ⇒ W", vec![tag("K[F@1..2] d_b => K[W@3..4] !c")]),
        ("outside prediction W~ ⇒ W", vec![tag("K[Wt@2..3] ct => K[W@3..4] !c")]),
        ("W holds both values under one knower", vec![tag("K[W@3..4] c"), tag("K[W@3..4] !c")]),
    ]
}

fn prefixes_of(f: &Formula, body: &Formula) -> Vec<Vec<Modality>> {
    f.splits().into_iter().filter(|(_, b)| *b == body).map(|(p, _)| p).collect()
}

/// Each milestone body must appear in the trace; a multi-part milestone
/// needs all parts under one shared non-empty prefix.
fn find_milestones(kb: &KnowledgeBase, trace: &ProofTrace) -> Vec<(&'static str, bool)> {
    milestone_bodies(kb)
        .into_iter()
        .map(|(name, parts)| {
            let sets: Vec<Vec<Vec<Modality>>> = parts
                .iter()
                .map(|b| trace.steps.iter().flat_map(|s| prefixes_of(&s.conclusion, b)).collect())
                .collect();
            let found = if parts.len() == 1 {
                !sets[0].is_empty()
            } else {
                sets[0].iter().any(|p| !p.is_empty() && sets[1..].iter().all(|s| s.contains(p)))
            };
            (name, found)
        })
        .collect()
}

pub fn fr_run(kb: &KnowledgeBase, max_depth: usize) -> Result<FrRun, EpiError> {
    let cl = derive_closure(kb, max_depth)?;
    let decisive = cl.contradiction_for(kb.target.as_deref()).cloned();
    let verdict = match &decisive {
        Some(c) => Verdict::Contradiction { agent: c.agent.clone() },
        None if cl.fixpoint => Verdict::Consistent,
        None => Verdict::DepthExceeded,
    };
    let bodies = milestone_bodies(kb);
    let lemma_mask = |f: &Formula| {
        let mut m = 0u64;
        let mut bit = 0;
        for (_, parts) in &bodies {
            for b in parts {
                if f.splits().iter().any(|(_, x)| *x == b) {
                    m |= 1 << bit;
                }
                bit += 1;
            }
        }
        m
    };
    let trace = decisive.as_ref().map(|c| cl.trace_preferring(&[c.positive, c.negative], &lemma_mask)).unwrap_or_default();
    let trace_check = check_trace(kb, &trace);
    let milestones = find_milestones(kb, &trace);
    let mut contradicting_agents: Vec<String> = Vec::new();
    for c in &cl.contradictions {
        if !contradicting_agents.contains(&c.agent) {
            contradicting_agents.push(c.agent.clone());
        }
    }
    let mut refused_edges: Vec<(String, String, String)> = Vec::new();
    for r in &cl.refusals {
        if !refused_edges.iter().any(|(a, b, _)| *a == r.truster && *b == r.trusted) {
            refused_edges.push((r.truster.clone(), r.trusted.clone(), r.reason.clone()));
        }
    }
    Ok(FrRun {
        mode: kb.trust.mode,
        verdict,
        contradiction_round: decisive.map(|c| cl.origins[c.positive].round.max(cl.origins[c.negative].round)),
        rounds: cl.rounds,
        closure_size: cl.formulas.len(),
        trace,
        trace_check,
        milestones,
        contradicting_agents,
        blocked_step: cl.refusals.first().cloned(),
        refused_edges,
    })
}

/// Single ablations: each chain edge, each tautology family with its
/// liftings, and all announcements together.
pub fn fr_ablations(kb: &KnowledgeBase, max_depth: usize) -> Result<Vec<(String, Verdict)>, EpiError> {
    let mut cases: Vec<(String, KnowledgeBase)> = Vec::new();
    for e in kb.trust.edges.iter().filter(|e| e.chain) {
        cases.push((format!("edge {}⇝{}", e.truster, e.trusted), kb.without_edge(&e.truster, &e.trusted)));
    }
    for fam in kb.tautology_families() {
        cases.push((format!("tautology family {fam}"), kb.without_family(&fam)));
    }
    cases.push(("announcements".into(), kb.without_announcements()));
    cases.into_iter().map(|(label, k)| Ok((label, fr_run(&k, max_depth)?.verdict))).collect()
}

// Two labs of dimension 4, basis |x y⟩ with x ∈ {a, b} the record and
// y ∈ {u, w} the memory. Global index 4·lab~ + lab.
const LAB: usize = 4;

/// Integer amplitudes of the post-measurement state, common factor 1/√3:
/// |a u⟩|a u⟩ + |b w⟩|a u⟩ + |b w⟩|b w⟩.
fn state_numerators() -> [i64; 16] {
    let mut n = [0i64; 16];
    n[0] = 1; // au au
    n[3 * LAB] = 1; // bw au
    n[3 * LAB + 3] = 1; // bw bw
    n
}

/// ok = (|au⟩ − |bw⟩)/√2, its partner (|au⟩ + |bw⟩)/√2; integer parts, factor 1/√2.
fn lab_vector(ok: bool) -> [i64; 4] {
    if ok {
        [1, 0, 0, -1]
    } else {
        [1, 0, 0, 1]
    }
}

fn exact_joint(ok_tilde: bool, ok: bool) -> Ratio<i64> {
    let n = state_numerators();
    let (p, q) = (lab_vector(ok_tilde), lab_vector(ok));
    let amp: i64 = (0..16).map(|k| n[k] * p[k / LAB] * q[k % LAB]).sum();
    // amplitude = amp / (2√3)
    Ratio::new(amp * amp, 12)
}

fn float_state() -> StateVector {
    StateVector::from_real(&state_numerators().map(|x| x as f64 / 3f64.sqrt()))
}

fn lab_projector(ok: bool) -> Operator {
    let v = lab_vector(ok).map(|x| x as f64 / 2f64.sqrt());
    let sv = StateVector::from_real(&v);
    Operator::outer(&sv, &sv)
}

fn float_joint(ok_tilde: bool, ok: bool) -> f64 {
    let p = tensor_product(&lab_projector(ok_tilde), &lab_projector(ok));
    p.expectation(&float_state()).expect("dimensions match")
}

/// Probability that both outside observers find the "ok" projection
/// nonzero: exact rational and floating point.
pub fn fr_quantum_probability() -> (Ratio<i64>, f64) {
    (exact_joint(true, true), float_joint(true, true))
}

/// All four outside outcomes (ok~, ok) with exact and float probabilities.
pub fn fr_joint_outcomes() -> Vec<((bool, bool), Ratio<i64>, f64)> {
    [(true, true), (true, false), (false, true), (false, false)]
        .into_iter()
        .map(|(a, b)| ((a, b), exact_joint(a, b), float_joint(a, b)))
        .collect()
}

/// Probability that the first friend's record is b.
pub fn prob_first_record_b() -> Ratio<i64> {
    let n = state_numerators();
    let hits: i64 = (0..16).filter(|k| (k / LAB) / 2 == 1).map(|k| n[k] * n[k]).sum();
    Ratio::new(hits, 3)
}

/// Mean number of rounds until the halting outcome, geometric in `p`.
pub fn expected_halting_rounds(p: Ratio<i64>) -> Ratio<i64> {
    p.recip()
}

/// Monte Carlo rounds until halting, sampling the four joint outcomes from
/// the float Born probabilities. Returns (mean, standard error).
pub fn halting_monte_carlo(trials: usize, seed: u64) -> (f64, f64) {
    let probs: Vec<f64> = fr_joint_outcomes().iter().map(|(_, _, p)| *p).collect();
    let mut rng = seeded(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut rounds = 0u64;
        loop {
            rounds += 1;
            // the first outcome is (ok~, ok): halt
            if rng.random::<f64>() < probs[0] {
                break;
            }
        }
        let r = rounds as f64;
        sum += r;
        sum_sq += r * r;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Frobenius norm of the commutator between the friends' record projector
/// and the outside "ok" projector on one lab.
pub fn context_commutator_norm() -> f64 {
    let record_a = tensor_product(&Operator::diag(&[1.0, 0.0]), &Operator::identity(2));
    record_a.commutator(&lab_projector(true)).expect("same dimension").frobenius()
}

pub fn fr_checks(seed: u64, trials: usize, tol: f64) -> Result<CheckReport, EpiError> {
    let mut rep = fr_logic_checks()?;
    rep.extend("", fr_probability_checks(seed, trials, tol));
    Ok(rep)
}

/// Plain and contextual runs plus every single ablation.
pub fn fr_logic_checks() -> Result<CheckReport, EpiError> {
    let mut rep = CheckReport::new();

    let plain_kb = fr_build_kb(TrustMode::Plain);
    let plain = fr_run(&plain_kb, FR_MAX_DEPTH)?;
    let target = plain_kb.target.clone().unwrap_or_default();
    rep.flag("plain trust reaches the contradiction", plain.verdict == Verdict::Contradiction { agent: target });
    rep.info("closure size (plain)", plain.closure_size);
    rep.flag("contradiction within the depth cap", plain.contradiction_round.is_some_and(|r| r <= FR_MAX_DEPTH));
    rep.flag("proof trace at most 60 steps", !plain.trace.is_empty() && plain.trace.len() <= FR_MAX_DEPTH);
    rep.info("proof trace steps", plain.trace.len());
    rep.flag("proof trace re-validates", plain.trace_check.is_ok());
    for (name, ok) in &plain.milestones {
        rep.flag(format!("milestone: {name}"), *ok);
    }

    let mut ctx_kb = fr_build_kb(TrustMode::Contextual);
    ctx_kb.target = plain_kb.target.clone();
    let ctx = fr_run(&ctx_kb, FR_MAX_DEPTH)?;
    rep.flag("contextual trust stays consistent", ctx.verdict == Verdict::Consistent);
    let blocked = ctx.blocked_step.as_ref().map(|r| (r.truster.as_str(), r.trusted.as_str()));
    rep.flag("first blocked step is W~⇝F", blocked == Some(("Wt@2..3", "F@1..2")));
    rep.flag("Ft@4⇝W refused in contextual mode", ctx.refused_edges.iter().any(|(a, b, _)| a == "Ft@4" && b == "W@3..4"));

    for (label, v) in fr_ablations(&plain_kb, FR_MAX_DEPTH)? {
        rep.flag(format!("ablation removes the contradiction: {label}"), !v.is_contradiction());
    }
    Ok(rep)
}

/// Exact and floating outcome probabilities and the halting statistics.
pub fn fr_probability_checks(seed: u64, trials: usize, tol: f64) -> CheckReport {
    let mut rep = CheckReport::new();
    let (exact, float) = fr_quantum_probability();
    rep.equal("halting probability (exact)", exact, Ratio::new(1, 12));
    rep.close("halting probability (float)", float, 1.0 / 12.0, tol);
    let outcomes = fr_joint_outcomes();
    let total: Ratio<i64> = outcomes.iter().map(|(_, e, _)| *e).sum();
    rep.equal("joint outcomes sum (exact)", total, Ratio::from_integer(1));
    let worst = outcomes.iter().map(|(_, e, f)| (*e.numer() as f64 / *e.denom() as f64 - f).abs()).fold(0.0, f64::max);
    rep.residual("joint outcomes exact vs float", worst, tol);
    rep.equal("first record b", prob_first_record_b(), Ratio::new(2, 3));
    rep.equal("expected rounds to halt", expected_halting_rounds(exact), Ratio::from_integer(12));
    let (mean, se) = halting_monte_carlo(trials, seed);
    rep.info("Monte Carlo mean rounds", mean);
    rep.flag("Monte Carlo mean within 3 standard errors of 12", (mean - 12.0).abs() <= 3.0 * se);
    rep.at_least("record and ok projectors fail to commute", context_commutator_norm(), 1e-3);
    rep
}
