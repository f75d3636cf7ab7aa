//! Replays a proof trace step by step, matching each rule against the raw
//! formula trees. Shares no matching code with the closure engine.

use super::{Formula, KnowledgeBase, ProofTrace, Rule, SeedKind, TrustMode};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("step {step}: {reason}")]
pub struct TraceError {
    pub step: usize,
    pub reason: String,
}

/// Peel matching knowledge operators off both formulas while they agree.
/// Yields each pair of remainders, outermost first.
fn common_layers<'a>(mut a: &'a Formula, mut b: &'a Formula) -> Vec<(&'a Formula, &'a Formula)> {
    let mut out = vec![(a, b)];
    while let (Formula::Knows { agent: x, ctx: cx, body: ba }, Formula::Knows { agent: y, ctx: cy, body: bb }) = (a, b) {
        if x != y || cx != cy {
            break;
        }
        a = ba;
        b = bb;
        out.push((a, b));
    }
    out
}

/// True when `f` equals `g` wrapped in the first `depth` operators of `host`.
fn rewrap_eq(host: &Formula, depth: usize, g: &Formula, f: &Formula) -> bool {
    if depth == 0 {
        return g == f;
    }
    match (host, f) {
        (Formula::Knows { agent: a, ctx: c, body }, Formula::Knows { agent: b, ctx: d, body: fb }) => {
            a == b && c == d && rewrap_eq(body, depth - 1, g, fb)
        }
        _ => false,
    }
}

fn layer(f: &Formula, depth: usize) -> Option<&Formula> {
    let mut cur = f;
    for _ in 0..depth {
        match cur {
            Formula::Knows { body, .. } => cur = body,
            _ => return None,
        }
    }
    Some(cur)
}

fn knows_depth(f: &Formula) -> usize {
    match f {
        Formula::Knows { body, .. } => 1 + knows_depth(body),
        _ => 0,
    }
}

fn check_conjunction(p: &Formula, c: &Formula) -> bool {
    common_layers(p, c).into_iter().any(|(x, y)| matches!(x, Formula::And(l, r) if **l == *y || **r == *y))
}

fn check_modus_ponens(major: &Formula, minor: &Formula, c: &Formula) -> bool {
    (0..=knows_depth(major)).any(|d| match layer(major, d) {
        Some(Formula::Implies(a, b)) => rewrap_eq(major, d, a, minor) && rewrap_eq(major, d, b, c),
        _ => false,
    })
}

fn check_chaining(first: &Formula, second: &Formula, c: &Formula) -> bool {
    (0..=knows_depth(first)).any(|d| match (layer(first, d), layer(second, d), layer(c, d)) {
        (Some(Formula::Implies(a, b)), Some(Formula::Implies(b2, z)), Some(Formula::Implies(a3, z3))) => {
            b == b2 && a == a3 && z == z3 && rewrap_eq(first, d, layer(second, d).unwrap(), second) && rewrap_eq(first, d, layer(c, d).unwrap(), c)
        }
        _ => false,
    })
}

fn check_trust(kb: &KnowledgeBase, p: &Formula, c: &Formula, edge: Option<&(String, String)>) -> Result<(), String> {
    for d in 0..=knows_depth(p) {
        let Some(Formula::Knows { agent: i, ctx: ci, body }) = layer(p, d) else { continue };
        let Formula::Knows { agent: j, ctx: cj, body: phi } = &**body else { continue };
        let stripped = Formula::Knows { agent: i.clone(), ctx: ci.clone(), body: phi.clone() };
        if !rewrap_eq(p, d, &stripped, c) {
            continue;
        }
        if let Some((a, b)) = edge {
            if a != i || b != j {
                return Err(format!("step names edge {a}⇝{b} but applies {i}⇝{j}"));
            }
        }
        if !kb.trust.edges.iter().any(|e| &e.truster == i && &e.trusted == j) {
            return Err(format!("no trust edge {i}⇝{j}"));
        }
        if kb.trust.mode == TrustMode::Contextual && (ci.is_none() || ci != cj) {
            return Err(format!("contexts {ci:?} and {cj:?} are incompatible"));
        }
        return Ok(());
    }
    Err("conclusion is not the premise with one trusted operator removed".into())
}

/// Check every step: premises precede it and the rule licenses the
/// conclusion from them.
pub fn check_trace(kb: &KnowledgeBase, trace: &ProofTrace) -> Result<(), TraceError> {
    for (n, st) in trace.steps.iter().enumerate() {
        let fail = |reason: String| TraceError { step: n, reason };
        if let Some(&p) = st.premises.iter().find(|&&p| p >= n) {
            return Err(fail(format!("premise {p} does not precede the step")));
        }
        let prem: Vec<&Formula> = st.premises.iter().map(|&p| &trace.steps[p].conclusion).collect();
        let c = &st.conclusion;
        let arity = |k: usize| if prem.len() == k { Ok(()) } else { Err(fail(format!("expected {k} premises, got {}", prem.len()))) };
        match st.rule {
            Rule::Seed => {
                arity(0)?;
                if !kb.seeds.iter().any(|s| &s.formula == c) {
                    return Err(fail("not a seed of the knowledge base".into()));
                }
            }
            Rule::Generalization => {
                arity(1)?;
                if !kb.seeds.iter().any(|s| s.kind == SeedKind::Tautology && &s.formula == prem[0]) {
                    return Err(fail("generalized formula is not in the tautology stock".into()));
                }
                let ok = match c {
                    Formula::Knows { agent, ctx, body } => {
                        **body == *prem[0]
                            && kb.agent(agent).is_some()
                            && *ctx == if kb.trust.mode == TrustMode::Contextual { kb.context_of(agent) } else { None }
                    }
                    _ => false,
                };
                if !ok {
                    return Err(fail("conclusion is not K_i of the premise for a declared agent".into()));
                }
            }
            Rule::Conjunction => {
                arity(1)?;
                if !check_conjunction(prem[0], c) {
                    return Err(fail("conclusion is not a conjunct under a shared prefix".into()));
                }
            }
            Rule::ModusPonens => {
                arity(2)?;
                if !check_modus_ponens(prem[0], prem[1], c) {
                    return Err(fail("modus ponens does not match".into()));
                }
            }
            Rule::Chaining => {
                arity(2)?;
                if !check_chaining(prem[0], prem[1], c) {
                    return Err(fail("implications do not chain to the conclusion".into()));
                }
            }
            Rule::Trust => {
                arity(1)?;
                check_trust(kb, prem[0], c, st.edge.as_ref()).map_err(fail)?;
            }
            Rule::PositiveIntrospection => {
                arity(1)?;
                let ok = matches!((c, prem[0]), (Formula::Knows { agent, ctx, body }, Formula::Knows { agent: a2, ctx: c2, .. })
                    if agent == a2 && ctx == c2 && **body == *prem[0]);
                if !ok {
                    return Err(fail("not K_i φ ⊢ K_i K_i φ".into()));
                }
            }
            Rule::NegativeIntrospection => {
                arity(1)?;
                let ok = match (c, prem[0]) {
                    (Formula::Knows { agent, ctx, body }, Formula::Not(inner)) => {
                        matches!(&**inner, Formula::Knows { agent: a2, ctx: c2, .. } if a2 == agent && c2 == ctx) && **body == *prem[0]
                    }
                    _ => false,
                };
                if !ok {
                    return Err(fail("not ¬K_i φ ⊢ K_i ¬K_i φ".into()));
                }
            }
        }
    }
    Ok(())
}
