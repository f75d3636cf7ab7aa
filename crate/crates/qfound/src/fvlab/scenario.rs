//! Scenario files for probe couplings.
//!
//! ```text
//! # comment
//! factor <region> <dim>                        system factor, numbered in order
//! precedes <region> <region>
//! spacelike <region> <region>
//! coupling <name> <region> <probe_dim> <f,f,..> <gate> [arg]
//! entry <coupling> <row> <col> <re> <im>       entries of an `explicit` gate
//! prepare <coupling> ground|mixed|basis <k>    probe preparation (default ground)
//! effect <coupling> identity|basis <k>         effect read off (default basis 0)
//! observable <region> <f,f,..> pauli_z|pauli_x|basis <k>
//! state ground|mixed|basis <k>                 system state (default mixed)
//! ```
//!
//! Gates act on (support factors) ⊗ probe: `identity`, `swap`, `cflip`
//! (|i,k⟩ ↦ |i,k+i⟩), `crot <θ>` (qubit-controlled exp(−iθσ_x)), `random <seed>`
//! and `explicit`.

use super::causal::{compose_instruments, nonsignaling_check, LocalFactorization, LocalObservable, NonSignaling, Probe};
use super::{Effect, FvError, ScatteringMorphism};
use crate::numkernel::random::{random_unitary, seeded};
use crate::numkernel::{DensityState, Operator, StateVector, TolerancePolicy, C64};
use crate::report::CheckReport;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Fv(#[from] FvError),
    #[error("scenario needs {0}")]
    Incomplete(&'static str),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub fact: LocalFactorization,
    pub probes: Vec<(String, Probe)>,
    pub observable: Option<LocalObservable>,
    pub omega: DensityState,
}

#[derive(Debug, Clone)]
enum Prep {
    Ground,
    Mixed,
    Basis(usize),
}

impl Prep {
    fn state(&self, dim: usize) -> Result<DensityState, FvError> {
        Ok(match *self {
            Prep::Ground => DensityState::pure(&StateVector::basis(dim, 0)),
            Prep::Mixed => DensityState::maximally_mixed(dim),
            Prep::Basis(k) if k < dim => DensityState::pure(&StateVector::basis(dim, k)),
            Prep::Basis(k) => return Err(FvError::InvalidFactorization(format!("basis state {k} outside dimension {dim}"))),
        })
    }
}

struct CouplingSpec {
    line: usize,
    region: String,
    probe_dim: usize,
    support: Vec<usize>,
    gate: String,
    arg: Option<String>,
}

fn parse_support(s: &str) -> Result<Vec<usize>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.parse::<usize>().map_err(|_| format!("bad factor index {t:?}"))).collect()
}

fn parse_prep(toks: &[&str]) -> Result<Prep, String> {
    match toks {
        ["ground"] => Ok(Prep::Ground),
        ["mixed"] => Ok(Prep::Mixed),
        ["basis", k] => k.parse().map(Prep::Basis).map_err(|_| format!("bad basis index {k:?}")),
        _ => Err(format!("unknown preparation {toks:?}")),
    }
}

pub fn parse_scenario(text: &str, pol: &TolerancePolicy) -> Result<Scenario, ScenarioError> {
    let mut dims = Vec::new();
    let mut regions = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut spacelike: Vec<(String, String)> = Vec::new();
    let mut couplings: Vec<(String, CouplingSpec)> = Vec::new();
    let mut entries: BTreeMap<String, Vec<(usize, usize, C64)>> = BTreeMap::new();
    let mut preps: BTreeMap<String, Prep> = BTreeMap::new();
    let mut effects: BTreeMap<String, Option<usize>> = BTreeMap::new();
    let mut observable: Option<(String, Vec<usize>, Vec<String>)> = None;
    let mut state = Prep::Mixed;

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ScenarioError::Syntax { line: ln + 1, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer {s:?}")));
        match toks.as_slice() {
            ["factor", region, d] => {
                regions.push(region.to_string());
                dims.push(idx(d)?);
            }
            ["precedes", a, b] => edges.push((a.to_string(), b.to_string())),
            ["spacelike", a, b] => spacelike.push((a.to_string(), b.to_string())),
            ["coupling", name, region, pd, support, gate, rest @ ..] if rest.len() <= 1 => {
                if couplings.iter().any(|(n, _)| n == name) {
                    return Err(err(format!("coupling {name} defined twice")));
                }
                let spec = CouplingSpec {
                    line: ln + 1,
                    region: region.to_string(),
                    probe_dim: idx(pd)?,
                    support: parse_support(support).map_err(err)?,
                    gate: gate.to_string(),
                    arg: rest.first().map(|s| s.to_string()),
                };
                couplings.push((name.to_string(), spec));
            }
            ["entry", name, i, j, re, im] => {
                entries.entry(name.to_string()).or_default().push((idx(i)?, idx(j)?, C64::new(num(re)?, num(im)?)));
            }
            ["prepare", name, rest @ ..] => {
                preps.insert(name.to_string(), parse_prep(rest).map_err(err)?);
            }
            ["effect", name, "identity"] => {
                effects.insert(name.to_string(), None);
            }
            ["effect", name, "basis", k] => {
                effects.insert(name.to_string(), Some(idx(k)?));
            }
            ["observable", region, support, rest @ ..] => {
                observable = Some((region.to_string(), parse_support(support).map_err(err)?, rest.iter().map(|s| s.to_string()).collect()));
            }
            ["state", rest @ ..] => state = parse_prep(rest).map_err(err)?,
            _ => return Err(err(format!("unrecognized record {:?}", toks[0]))),
        }
    }
    if dims.is_empty() {
        return Err(ScenarioError::Incomplete("at least one factor"));
    }
    let e: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let s: Vec<(&str, &str)> = spacelike.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let fact = LocalFactorization::new(dims, regions, &e, &s)?;

    let mut probes = Vec::new();
    for (name, spec) in couplings {
        let err = |msg: String| ScenarioError::Syntax { line: spec.line, msg };
        if spec.support.iter().any(|&f| f >= fact.factor_dims.len()) {
            return Err(err(format!("support {:?} names a missing factor", spec.support)));
        }
        let ds: usize = spec.support.iter().map(|&f| fact.factor_dims[f]).product();
        let dp = spec.probe_dim;
        let u = match (spec.gate.as_str(), spec.arg.as_deref()) {
            ("identity", None) => Operator::identity(ds * dp),
            ("swap", None) if ds == dp => ScatteringMorphism::swap(dp).u,
            ("cflip", None) => ScatteringMorphism::controlled_flip(ds, dp).u,
            ("crot", Some(a)) if ds == 2 && dp == 2 => {
                let theta = a.parse::<f64>().map_err(|_| err(format!("bad angle {a:?}")))?;
                ScatteringMorphism::controlled_rotation(theta).u
            }
            ("random", Some(a)) => {
                let seed = a.parse::<u64>().map_err(|_| err(format!("bad seed {a:?}")))?;
                random_unitary(&mut seeded(seed), ds * dp)
            }
            ("explicit", None) => {
                let mut u = Operator::zeros(ds * dp);
                for &(i, j, z) in entries.get(&name).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if i >= ds * dp || j >= ds * dp {
                        return Err(err(format!("entry ({i}, {j}) outside dimension {}", ds * dp)));
                    }
                    u[(i, j)] = z;
                }
                u
            }
            (g, _) => return Err(err(format!("gate {g} does not fit dimensions {ds}⊗{dp}"))),
        };
        let theta = fact.local_coupling(&spec.region, &spec.support, &u, dp, pol)?;
        let sigma = preps.get(&name).cloned().unwrap_or(Prep::Ground).state(dp)?;
        let effect = match effects.get(&name).copied().unwrap_or(Some(0)) {
            None => Effect::identity(dp),
            Some(k) if k < dp => Effect::basis_projector(dp, k),
            Some(k) => return Err(err(format!("effect basis index {k} outside probe dimension {dp}"))),
        };
        probes.push((name, Probe { theta, sigma, effect }));
    }

    let observable = match observable {
        None => None,
        Some((region, support, kind)) => {
            let d: usize = support.iter().map(|&f| fact.factor_dims.get(f).copied().unwrap_or(0)).product();
            let kinds: Vec<&str> = kind.iter().map(|s| s.as_str()).collect();
            let op = match kinds.as_slice() {
                ["pauli_z"] if d == 2 => Operator::pauli_z(),
                ["pauli_x"] if d == 2 => Operator::pauli_x(),
                ["basis", k] => {
                    let k: usize = k.parse().map_err(|_| ScenarioError::Incomplete("an integer basis index"))?;
                    Effect::basis_projector(d, k.min(d.saturating_sub(1))).op().clone()
                }
                _ => return Err(ScenarioError::Incomplete("an observable of pauli_z, pauli_x or basis type matching its support")),
            };
            Some(LocalObservable { op, support, region })
        }
    };
    let omega = state.state(fact.total_dim())?;
    Ok(Scenario { fact, probes, observable, omega })
}

impl Scenario {
    pub fn probe(&self, name: &str) -> Option<&Probe> {
        self.probes.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    /// Composition checks for the first two couplings, in file order.
    pub fn compose(&self, pol: &TolerancePolicy) -> Result<CheckReport, ScenarioError> {
        let [(_, a), (_, b), ..] = self.probes.as_slice() else {
            return Err(ScenarioError::Incomplete("two couplings"));
        };
        Ok(compose_instruments(&self.fact, a, b, &self.omega, pol)?)
    }

    /// No-signaling test with the first two couplings and the observable.
    pub fn nosignal(&self, pol: &TolerancePolicy) -> Result<NonSignaling, ScenarioError> {
        let [(_, a), (_, b), ..] = self.probes.as_slice() else {
            return Err(ScenarioError::Incomplete("two couplings"));
        };
        let c = self.observable.as_ref().ok_or(ScenarioError::Incomplete("an observable"))?;
        Ok(nonsignaling_check(&self.fact, &a.theta, &b.theta, c, &self.omega, &a.sigma, &b.sigma, pol)?)
    }
}

/// Two sequential probes on one qubit.
pub const DEFAULT_COMPOSE: &str = "\
factor S 2
precedes K1 K2
coupling A K1 2 0 crot 0.6
coupling B K2 2 0 random 7
prepare B mixed
effect A basis 1
";

/// Alice in O1, Bob in O2 and Charlie reading σ_z in O3.
pub const DEFAULT_NOSIGNAL: &str = "\
factor O1 2
factor O3 2
precedes O1 O2
precedes O2 O3
spacelike O1 O3
coupling A O1 2 0 random 3
coupling B O2 2 1 cflip
observable O3 1 pauli_z
state basis 1
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_pass() {
        let pol = TolerancePolicy::default();
        let s = parse_scenario(DEFAULT_COMPOSE, &pol).unwrap();
        assert_eq!(s.probes.len(), 2);
        assert!(s.compose(&pol).unwrap().passed());
        let s = parse_scenario(DEFAULT_NOSIGNAL, &pol).unwrap();
        assert!(s.nosignal(&pol).unwrap().gap < 1e-12);
    }

    #[test]
    fn explicit_gate() {
        let pol = TolerancePolicy::default();
        let text = "factor S 2\ncoupling A K 2 0 explicit\nentry A 0 0 1 0\nentry A 1 1 1 0\nentry A 2 3 1 0\nentry A 3 2 1 0\n";
        let s = parse_scenario(text, &pol).unwrap();
        assert_eq!(s.probe("A").unwrap().theta.u, ScatteringMorphism::controlled_flip(2, 2).u);
    }

    #[test]
    fn errors() {
        let pol = TolerancePolicy::default();
        assert!(matches!(parse_scenario("", &pol), Err(ScenarioError::Incomplete(_))));
        assert!(matches!(parse_scenario("factor S x\n", &pol), Err(ScenarioError::Syntax { line: 1, .. })));
        let non_unitary = "factor S 2\ncoupling A K 2 0 explicit\n";
        assert!(matches!(parse_scenario(non_unitary, &pol), Err(ScenarioError::Fv(FvError::NotUnitary(_)))));
        let s = parse_scenario("factor S 2\ncoupling A K 2 0 swap\n", &pol).unwrap();
        assert!(matches!(s.compose(&pol), Err(ScenarioError::Incomplete(_))));
    }
}
