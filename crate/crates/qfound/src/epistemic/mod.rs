//! Multi-agent epistemic logic with trust in place of the knowledge axiom.
//!
//! Formulas are closed under a forward-chaining engine; each derived formula
//! keeps the rule and premises that produced it, so that any conclusion can
//! be replayed as a proof trace and re-checked by [`checker`].

pub mod checker;
pub mod fr;

pub use checker::{check_trace, TraceError};
pub use fr::{
    expected_halting_rounds, fr_build_kb, fr_checks, fr_joint_outcomes, fr_quantum_probability, fr_run, halting_monte_carlo,
    fr_ablations, fr_logic_checks, fr_probability_checks, FrRun, Verdict, FR_MAX_DEPTH,
};

use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpiError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("undeclared agent {0}")]
    UnknownAgent(String),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Knows { agent: String, ctx: Option<String>, body: Box<Formula> },
}

/// One modal operator K_agent|ctx.
pub type Modality = (String, Option<String>);

impl Formula {
    pub fn atom(s: &str) -> Self {
        Formula::Atom(s.into())
    }

    pub fn negate(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn knows(agent: &str, body: Formula) -> Self {
        Formula::Knows { agent: agent.into(), ctx: None, body: Box::new(body) }
    }

    /// Nesting depth of knowledge operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(a, b) | Formula::Implies(a, b) => a.modal_depth().max(b.modal_depth()),
            Formula::Knows { body, .. } => 1 + body.modal_depth(),
        }
    }

    /// Every way of reading the formula as P[body] with P a run of leading
    /// knowledge operators, shortest prefix first.
    pub fn splits(&self) -> Vec<(Vec<Modality>, &Formula)> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        let mut cur = self;
        loop {
            out.push((prefix.clone(), cur));
            match cur {
                Formula::Knows { agent, ctx, body } => {
                    prefix.push((agent.clone(), ctx.clone()));
                    cur = body;
                }
                _ => return out,
            }
        }
    }

    /// Replace every context tag using `ctx_of`.
    pub fn retag(&self, ctx_of: &dyn Fn(&str) -> Option<String>) -> Formula {
        match self {
            Formula::Atom(_) => self.clone(),
            Formula::Not(f) => Formula::negate(f.retag(ctx_of)),
            Formula::And(a, b) => Formula::and(a.retag(ctx_of), b.retag(ctx_of)),
            Formula::Implies(a, b) => Formula::implies(a.retag(ctx_of), b.retag(ctx_of)),
            Formula::Knows { agent, body, .. } => {
                Formula::Knows { agent: agent.clone(), ctx: ctx_of(agent), body: Box::new(body.retag(ctx_of)) }
            }
        }
    }

    pub fn agents(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom(_) => {}
            Formula::Not(f) => f.agents(out),
            Formula::And(a, b) | Formula::Implies(a, b) => {
                a.agents(out);
                b.agents(out);
            }
            Formula::Knows { agent, body, .. } => {
                if !out.contains(agent) {
                    out.push(agent.clone());
                }
                body.agents(out);
            }
        }
    }
}

pub fn wrap(prefix: &[Modality], body: Formula) -> Formula {
    prefix
        .iter()
        .rev()
        .fold(body, |acc, (a, c)| Formula::Knows { agent: a.clone(), ctx: c.clone(), body: Box::new(acc) })
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(s) => f.write_str(s),
            Formula::Not(x) => match **x {
                Formula::Atom(_) | Formula::Not(_) | Formula::Knows { .. } => write!(f, "!{x}"),
                _ => write!(f, "!({x})"),
            },
            Formula::And(a, b) => {
                // `&` groups to the left, so a conjunction on the right needs parentheses
                let l = matches!(**a, Formula::Implies(..));
                let r = matches!(**b, Formula::Implies(..) | Formula::And(..));
                match (l, r) {
                    (true, true) => write!(f, "({a}) & ({b})"),
                    (true, false) => write!(f, "({a}) & {b}"),
                    (false, true) => write!(f, "{a} & ({b})"),
                    (false, false) => write!(f, "{a} & {b}"),
                }
            }
            Formula::Implies(a, b) => {
                if matches!(**a, Formula::Implies(..)) {
                    write!(f, "({a}) => {b}")
                } else {
                    write!(f, "{a} => {b}")
                }
            }
            Formula::Knows { agent, ctx, body } => {
                match ctx {
                    Some(c) => write!(f, "K[{agent}:{c}]")?,
                    None => write!(f, "K[{agent}]")?,
                }
                match **body {
                    Formula::Atom(_) | Formula::Not(_) | Formula::Knows { .. } => write!(f, " {body}"),
                    _ => write!(f, "({body})"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Not,
    And,
    Implies,
    K(String, Option<String>),
    Ident(String),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let ident = |c: char| c.is_alphanumeric() || "_@.~-".contains(c);
    while i < cs.len() {
        let c = cs[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' => {
                out.push(Tok::Open);
                i += 1
            }
            ')' => {
                out.push(Tok::Close);
                i += 1
            }
            '!' => {
                out.push(Tok::Not);
                i += 1
            }
            '&' => {
                out.push(Tok::And);
                i += 1
            }
            '=' if cs.get(i + 1) == Some(&'>') => {
                out.push(Tok::Implies);
                i += 2
            }
            'K' if cs.get(i + 1) == Some(&'[') => {
                let end = cs[i..].iter().position(|&x| x == ']').ok_or("unterminated K[")? + i;
                let inner: String = cs[i + 2..end].iter().collect();
                let (a, c) = match inner.split_once(':') {
                    Some((a, c)) => (a.trim().to_string(), Some(c.trim().to_string())),
                    None => (inner.trim().to_string(), None),
                };
                if a.is_empty() {
                    return Err("empty agent in K[]".into());
                }
                out.push(Tok::K(a, c));
                i = end + 1;
            }
            c if ident(c) => {
                let start = i;
                while i < cs.len() && ident(cs[i]) && !(cs[i] == '=' || cs[i] == '-' && cs.get(i + 1) == Some(&'>')) {
                    i += 1;
                }
                out.push(Tok::Ident(cs[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected character {c:?}")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn implication(&mut self) -> Result<Formula, String> {
        let lhs = self.conjunction()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, String> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            acc = Formula::and(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, String> {
        let tok = self.peek().cloned().ok_or("unexpected end of formula")?;
        self.pos += 1;
        match tok {
            Tok::Not => Ok(Formula::negate(self.unary()?)),
            Tok::K(agent, ctx) => Ok(Formula::Knows { agent, ctx, body: Box::new(self.unary()?) }),
            Tok::Ident(s) => Ok(Formula::Atom(s)),
            Tok::Open => {
                let f = self.implication()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err("missing )".into());
                }
                self.pos += 1;
                Ok(f)
            }
            t => Err(format!("unexpected token {t:?}")),
        }
    }
}

/// Parse the text syntax: `!`, `&`, `=>` (right associative), `K[agent]` or
/// `K[agent:context]` binding like negation, parentheses.
pub fn parse_formula(s: &str) -> Result<Formula, String> {
    let mut p = Parser { toks: tokenize(s)?, pos: 0 };
    let f = p.implication()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input at token {}", p.pos));
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustMode {
    Plain,
    Contextual,
}

impl TrustMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plain" => Some(TrustMode::Plain),
            "contextual" => Some(TrustMode::Contextual),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrustMode::Plain => "plain",
            TrustMode::Contextual => "contextual",
        }
    }
}

/// truster ⇝ trusted
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustEdge {
    pub truster: String,
    pub trusted: String,
    pub chain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRelation {
    pub edges: Vec<TrustEdge>,
    pub mode: TrustMode,
}

impl TrustRelation {
    pub fn find(&self, truster: &str, trusted: &str) -> Option<&TrustEdge> {
        self.edges.iter().find(|e| e.truster == truster && e.trusted == trusted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub context: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    /// A validity of the scenario; knowledge generalization applies.
    Tautology,
    Announcement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub family: String,
    pub kind: SeedKind,
    pub formula: Formula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSet {
    pub distribution: bool,
    pub trust: bool,
    pub introspection: bool,
    pub generalization: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet { distribution: true, trust: true, introspection: true, generalization: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub agents: Vec<Agent>,
    pub seeds: Vec<Seed>,
    pub trust: TrustRelation,
    pub rules: RuleSet,
    /// Generated formulas never exceed this knowledge nesting.
    pub max_nesting: usize,
    /// Agent whose (S)-contradiction decides the verdict; any agent if unset.
    pub target: Option<String>,
}

impl KnowledgeBase {
    pub fn agent(&self, name: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn context_of(&self, name: &str) -> Option<String> {
        self.agent(name).and_then(|a| a.context.clone())
    }

    /// Parse the scenario text in the given trust mode. In contextual mode
    /// every knowledge operator is tagged with its agent's context.
    ///
    /// ```text
    /// agent <name> <context|->
    /// trust <truster> <trusted> [chain]
    /// seed <family> tautology|announcement <formula>
    /// target <agent>
    /// nesting <n>
    /// ```
    pub fn parse(text: &str, mode: TrustMode) -> Result<Self, EpiError> {
        let mut agents = Vec::new();
        let mut edges = Vec::new();
        let mut seeds = Vec::new();
        let mut target = None;
        let mut nesting = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| EpiError::Syntax { line: ln + 1, msg };
            let mut parts = line.splitn(2, char::is_whitespace);
            let head = parts.next().unwrap_or("");
            let rest = parts.next().unwrap_or("").trim();
            let words: Vec<&str> = rest.split_whitespace().collect();
            match head {
                "agent" => match words.as_slice() {
                    [name, ctx] => agents.push(Agent {
                        name: name.to_string(),
                        context: (*ctx != "-").then(|| ctx.to_string()),
                    }),
                    _ => return Err(err("agent <name> <context|->".into())),
                },
                "trust" => match words.as_slice() {
                    [a, b] => edges.push(TrustEdge { truster: a.to_string(), trusted: b.to_string(), chain: false }),
                    [a, b, "chain"] => edges.push(TrustEdge { truster: a.to_string(), trusted: b.to_string(), chain: true }),
                    _ => return Err(err("trust <truster> <trusted> [chain]".into())),
                },
                "seed" => {
                    let mut p = rest.splitn(3, char::is_whitespace);
                    let family = p.next().unwrap_or("").to_string();
                    let kind = match p.next() {
                        Some("tautology") => SeedKind::Tautology,
                        Some("announcement") => SeedKind::Announcement,
                        _ => return Err(err("seed kind must be tautology or announcement".into())),
                    };
                    let formula = parse_formula(p.next().unwrap_or("")).map_err(err)?;
                    seeds.push(Seed { family, kind, formula });
                }
                "target" => target = Some(rest.to_string()),
                "nesting" => nesting = Some(rest.parse::<usize>().map_err(|_| err(format!("bad nesting {rest:?}")))?),
                _ => return Err(err(format!("unknown record {head:?}"))),
            }
        }
        let declared = |a: &str| agents.iter().any(|x: &Agent| x.name == a);
        for e in &edges {
            for a in [&e.truster, &e.trusted] {
                if !declared(a) {
                    return Err(EpiError::UnknownAgent(a.clone()));
                }
            }
        }
        for s in &seeds {
            let mut used = Vec::new();
            s.formula.agents(&mut used);
            if let Some(a) = used.into_iter().find(|a| !declared(a)) {
                return Err(EpiError::UnknownAgent(a));
            }
        }
        if let Some(t) = &target {
            if !declared(t) {
                return Err(EpiError::UnknownAgent(t.clone()));
            }
        }
        let max_nesting = nesting.unwrap_or_else(|| seeds.iter().map(|s| s.formula.modal_depth()).max().unwrap_or(0) + 1);
        let mut kb = KnowledgeBase {
            agents,
            seeds,
            trust: TrustRelation { edges, mode: TrustMode::Plain },
            rules: RuleSet::default(),
            max_nesting,
            target,
        };
        kb.set_mode(mode);
        Ok(kb)
    }

    /// Switch trust mode, re-tagging every seed.
    pub fn set_mode(&mut self, mode: TrustMode) {
        self.trust.mode = mode;
        let ctx: HashMap<String, Option<String>> = self.agents.iter().map(|a| (a.name.clone(), a.context.clone())).collect();
        let tag = |a: &str| match mode {
            TrustMode::Plain => None,
            TrustMode::Contextual => ctx.get(a).cloned().flatten(),
        };
        for s in &mut self.seeds {
            s.formula = s.formula.retag(&tag);
        }
    }

    pub fn without_edge(&self, truster: &str, trusted: &str) -> Self {
        let mut kb = self.clone();
        kb.trust.edges.retain(|e| !(e.truster == truster && e.trusted == trusted));
        kb
    }

    pub fn without_family(&self, family: &str) -> Self {
        let mut kb = self.clone();
        kb.seeds.retain(|s| s.family != family);
        kb
    }

    pub fn without_announcements(&self) -> Self {
        let mut kb = self.clone();
        kb.seeds.retain(|s| s.kind != SeedKind::Announcement);
        kb
    }

    /// Tautology families in first-appearance order.
    pub fn tautology_families(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.seeds {
            if s.kind == SeedKind::Tautology && !out.contains(&s.family) {
                out.push(s.family.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Seed,
    Conjunction,
    ModusPonens,
    Chaining,
    Trust,
    PositiveIntrospection,
    NegativeIntrospection,
    Generalization,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Seed => "seed",
            Rule::Conjunction => "distribution: conjunction",
            Rule::ModusPonens => "distribution: modus ponens",
            Rule::Chaining => "distribution: chaining",
            Rule::Trust => "trust",
            Rule::PositiveIntrospection => "positive introspection",
            Rule::NegativeIntrospection => "negative introspection",
            Rule::Generalization => "generalization",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Origin {
    pub rule: Rule,
    pub premises: Vec<usize>,
    pub round: usize,
    /// trust edge used, for trust steps
    pub edge: Option<(String, String)>,
}

/// K_i φ and K_i ¬φ both derived at top level: condition (S) fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Contradiction {
    pub agent: String,
    pub positive: usize,
    pub negative: usize,
}

/// A trust application refused because the contexts differ or are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Refusal {
    pub truster: String,
    pub trusted: String,
    pub premise: usize,
    pub would_derive: Formula,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub formulas: Vec<Formula>,
    pub origins: Vec<Origin>,
    /// further derivations of each formula from strictly earlier formulas
    pub alternatives: Vec<Vec<Origin>>,
    pub contradictions: Vec<Contradiction>,
    pub refusals: Vec<Refusal>,
    pub fixpoint: bool,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub rule: Rule,
    pub premises: Vec<usize>,
    pub conclusion: Formula,
    pub edge: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProofTrace {
    pub steps: Vec<TraceStep>,
}

impl ProofTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, st) in self.steps.iter().enumerate() {
            let prem = st.premises.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
            let edge = st.edge.as_ref().map(|(a, b)| format!(" {a}⇝{b}")).unwrap_or_default();
            s.push_str(&format!("{i:>3}  {:<28} [{prem}]{edge}  {}\n", st.rule.name(), st.conclusion));
        }
        s
    }
}

impl Closure {
    pub fn id_of(&self, f: &Formula) -> Option<usize> {
        self.formulas.iter().position(|g| g == f)
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.formulas.contains(f)
    }

    /// Proof of the listed formulas: their ancestors in derivation order,
    /// renumbered.
    pub fn trace_for(&self, targets: &[usize]) -> ProofTrace {
        let mut keep = vec![false; self.formulas.len()];
        let mut stack: Vec<usize> = targets.to_vec();
        while let Some(i) = stack.pop() {
            if !keep[i] {
                keep[i] = true;
                stack.extend(&self.origins[i].premises);
            }
        }
        let mut renum = vec![usize::MAX; self.formulas.len()];
        let mut steps = Vec::new();
        for i in 0..self.formulas.len() {
            if keep[i] {
                renum[i] = steps.len();
                let o = &self.origins[i];
                steps.push(TraceStep {
                    rule: o.rule,
                    premises: o.premises.iter().map(|&p| renum[p]).collect(),
                    conclusion: self.formulas[i].clone(),
                    edge: o.edge.clone(),
                });
            }
        }
        ProofTrace { steps }
    }

    /// Like [`Closure::trace_for`], but where a formula has several
    /// derivations, take the one whose sub-proof passes through the most
    /// lemmas; `lemmas` maps a formula to a bitmask of lemmas it matches.
    pub fn trace_preferring(&self, targets: &[usize], lemmas: &dyn Fn(&Formula) -> u64) -> ProofTrace {
        let n = self.formulas.len();
        let mut mask = vec![0u64; n];
        let mut choice = vec![0usize; n];
        for i in 0..n {
            let own = lemmas(&self.formulas[i]);
            let cover = |o: &Origin| o.premises.iter().fold(own, |m, &p| m | mask[p]);
            let mut best = cover(&self.origins[i]);
            for (k, alt) in self.alternatives[i].iter().enumerate() {
                let m = cover(alt);
                if m.count_ones() > best.count_ones() {
                    best = m;
                    choice[i] = k + 1;
                }
            }
            mask[i] = best;
        }
        let pick = |i: usize| if choice[i] == 0 { &self.origins[i] } else { &self.alternatives[i][choice[i] - 1] };
        let mut keep = vec![false; n];
        let mut stack: Vec<usize> = targets.to_vec();
        while let Some(i) = stack.pop() {
            if !keep[i] {
                keep[i] = true;
                stack.extend(&pick(i).premises);
            }
        }
        let mut renum = vec![usize::MAX; n];
        let mut steps = Vec::new();
        for i in 0..n {
            if keep[i] {
                renum[i] = steps.len();
                let o = pick(i);
                steps.push(TraceStep {
                    rule: o.rule,
                    premises: o.premises.iter().map(|&p| renum[p]).collect(),
                    conclusion: self.formulas[i].clone(),
                    edge: o.edge.clone(),
                });
            }
        }
        ProofTrace { steps }
    }

    /// First contradiction for `agent`, or for anyone when `agent` is None.
    pub fn contradiction_for(&self, agent: Option<&str>) -> Option<&Contradiction> {
        self.contradictions.iter().find(|c| agent.is_none_or(|a| c.agent == a))
    }
}

type ImplIndex = HashMap<(Vec<Modality>, Formula), Vec<(usize, Formula)>>;

const MAX_ALTERNATIVES: usize = 8;

struct Engine<'a> {
    kb: &'a KnowledgeBase,
    formulas: Vec<Formula>,
    origins: Vec<Origin>,
    alternatives: Vec<Vec<Origin>>,
    ids: HashMap<Formula, usize>,
    /// (prefix, antecedent) → implications P[A ⇒ B] as (id, B)
    by_antecedent: ImplIndex,
    /// (prefix, consequent) → implications P[A ⇒ B] as (id, A)
    by_consequent: ImplIndex,
    contradictions: Vec<Contradiction>,
    refusals: Vec<Refusal>,
    round: usize,
    next: Vec<usize>,
}

impl Engine<'_> {
    fn add(&mut self, f: Formula, rule: Rule, premises: Vec<usize>, edge: Option<(String, String)>) {
        if let Some(&old) = self.ids.get(&f) {
            let alts = &mut self.alternatives[old];
            if premises.iter().all(|&p| p < old) && alts.len() < MAX_ALTERNATIVES && self.origins[old].premises != premises {
                alts.push(Origin { rule, premises, round: self.round, edge });
            }
            return;
        }
        if f.modal_depth() > self.kb.max_nesting {
            return;
        }
        let id = self.formulas.len();
        self.ids.insert(f.clone(), id);
        // condition (S) at top level
        if let Formula::Knows { agent, ctx, body } = &f {
            let opposite = match &**body {
                Formula::Not(inner) => Formula::Knows { agent: agent.clone(), ctx: ctx.clone(), body: inner.clone() },
                other => Formula::Knows { agent: agent.clone(), ctx: ctx.clone(), body: Box::new(Formula::negate(other.clone())) },
            };
            if let Some(&j) = self.ids.get(&opposite) {
                let (positive, negative) = if matches!(**body, Formula::Not(_)) { (j, id) } else { (id, j) };
                self.contradictions.push(Contradiction { agent: agent.clone(), positive, negative });
            }
        }
        self.formulas.push(f);
        self.origins.push(Origin { rule, premises, round: self.round, edge });
        self.alternatives.push(Vec::new());
        self.next.push(id);
    }

    fn process(&mut self, id: usize) {
        let f = self.formulas[id].clone();
        let rules = self.kb.rules;
        let splits: Vec<(Vec<Modality>, Formula)> = f.splits().into_iter().map(|(p, b)| (p, b.clone())).collect();

        if rules.distribution {
            for (prefix, body) in &splits {
                if let Formula::And(a, b) = body {
                    self.add(wrap(prefix, (**a).clone()), Rule::Conjunction, vec![id], None);
                    self.add(wrap(prefix, (**b).clone()), Rule::Conjunction, vec![id], None);
                }
                // body as the minor premise of an earlier implication
                let key = (prefix.clone(), body.clone());
                if let Some(list) = self.by_antecedent.get(&key).cloned() {
                    for (imp, cons) in list {
                        self.add(wrap(prefix, cons), Rule::ModusPonens, vec![imp, id], None);
                    }
                }
                if let Formula::Implies(a, b) = body {
                    let (a, b) = ((**a).clone(), (**b).clone());
                    if let Some(&minor) = self.ids.get(&wrap(prefix, a.clone())) {
                        self.add(wrap(prefix, b.clone()), Rule::ModusPonens, vec![id, minor], None);
                    }
                    if let Some(list) = self.by_antecedent.get(&(prefix.clone(), b.clone())).cloned() {
                        for (other, c) in list {
                            self.add(wrap(prefix, Formula::implies(a.clone(), c)), Rule::Chaining, vec![id, other], None);
                        }
                    }
                    if let Some(list) = self.by_consequent.get(&(prefix.clone(), a.clone())).cloned() {
                        for (other, z) in list {
                            self.add(wrap(prefix, Formula::implies(z, b.clone())), Rule::Chaining, vec![other, id], None);
                        }
                    }
                    self.by_antecedent.entry((prefix.clone(), a.clone())).or_default().push((id, b.clone()));
                    self.by_consequent.entry((prefix.clone(), b)).or_default().push((id, a));
                }
            }
        }

        if rules.trust {
            for (prefix, body) in &splits {
                let Formula::Knows { agent: i, ctx: ci, body: inner } = body else { continue };
                let Formula::Knows { agent: j, ctx: cj, body: phi } = &**inner else { continue };
                let Some(edge) = self.kb.trust.find(i, j) else { continue };
                let conclusion = wrap(prefix, Formula::Knows { agent: i.clone(), ctx: ci.clone(), body: phi.clone() });
                let refusal = match self.kb.trust.mode {
                    TrustMode::Plain => None,
                    TrustMode::Contextual => match (ci, cj) {
                        (Some(a), Some(b)) if a == b => None,
                        (Some(a), Some(b)) => Some(format!("context {a} differs from {b}")),
                        _ => Some("an agent without a measurement context".to_string()),
                    },
                };
                match refusal {
                    None => self.add(conclusion, Rule::Trust, vec![id], Some((edge.truster.clone(), edge.trusted.clone()))),
                    Some(reason) => self.refusals.push(Refusal {
                        truster: edge.truster.clone(),
                        trusted: edge.trusted.clone(),
                        premise: id,
                        would_derive: conclusion,
                        reason,
                    }),
                }
            }
        }

        if rules.introspection {
            // axiom instances are not generalized, so introspection acts at top level
            match &f {
                Formula::Knows { agent, ctx, .. } => {
                    let g = Formula::Knows { agent: agent.clone(), ctx: ctx.clone(), body: Box::new(f.clone()) };
                    self.add(g, Rule::PositiveIntrospection, vec![id], None);
                }
                Formula::Not(inner) => {
                    if let Formula::Knows { agent, ctx, .. } = &**inner {
                        let g = Formula::Knows { agent: agent.clone(), ctx: ctx.clone(), body: Box::new(f.clone()) };
                        self.add(g, Rule::NegativeIntrospection, vec![id], None);
                    }
                }
                _ => {}
            }
        }

        if rules.generalization && self.origins[id].rule == Rule::Seed {
            let is_taut = self.kb.seeds.iter().any(|s| s.kind == SeedKind::Tautology && s.formula == f);
            if is_taut {
                for a in &self.kb.agents {
                    let ctx = match self.kb.trust.mode {
                        TrustMode::Plain => None,
                        TrustMode::Contextual => a.context.clone(),
                    };
                    let g = Formula::Knows { agent: a.name.clone(), ctx, body: Box::new(f.clone()) };
                    self.add(g, Rule::Generalization, vec![id], None);
                }
            }
        }
    }
}

/// Forward chaining to a fixpoint or `max_depth` rounds in total. Tautology
/// seeds are closed first, then announcements are added and closed. Rule
/// order within a formula: distribution, trust, introspection,
/// generalization; formulas are processed in insertion order, round by round.
pub fn derive_closure(kb: &KnowledgeBase, max_depth: usize) -> Result<Closure, EpiError> {
    if max_depth == 0 {
        return Err(EpiError::ZeroDepth);
    }
    let mut e = Engine {
        kb,
        formulas: Vec::new(),
        origins: Vec::new(),
        alternatives: Vec::new(),
        ids: HashMap::new(),
        by_antecedent: HashMap::new(),
        by_consequent: HashMap::new(),
        contradictions: Vec::new(),
        refusals: Vec::new(),
        round: 0,
        next: Vec::new(),
    };
    // validities are closed first; announcements then enter a settled stock
    let mut fixpoint = false;
    let mut rounds = 0;
    for stage in [SeedKind::Tautology, SeedKind::Announcement] {
        for s in kb.seeds.iter().filter(|s| s.kind == stage) {
            e.add(s.formula.clone(), Rule::Seed, Vec::new(), None);
        }
        fixpoint = false;
        while rounds < max_depth {
            let frontier = std::mem::take(&mut e.next);
            if frontier.is_empty() {
                fixpoint = true;
                break;
            }
            rounds += 1;
            e.round = rounds;
            for id in frontier {
                e.process(id);
            }
        }
        if e.next.is_empty() {
            fixpoint = true;
        }
        if !fixpoint {
            break;
        }
    }
    Ok(Closure {
        formulas: e.formulas,
        origins: e.origins,
        alternatives: e.alternatives,
        contradictions: e.contradictions, refusals: e.refusals, fixpoint, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb(text: &str) -> KnowledgeBase {
        KnowledgeBase::parse(text, TrustMode::Plain).unwrap()
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["K[A](p => q)", "K[A] K[B:C1] !p", "(p & q) => !(r & s)", "K[A](K[B] p & q) => r"] {
            let f = parse_formula(s).unwrap();
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f, "{s} → {f}");
        }
        assert_eq!(parse_formula("K[A:C] p").unwrap(), Formula::Knows { agent: "A".into(), ctx: Some("C".into()), body: Box::new(Formula::atom("p")) });
        assert!(parse_formula("p & ").is_err());
        assert!(parse_formula("(p").is_err());
    }

    #[test]
    fn distribution() {
        let k = kb("agent A -\nseed s announcement K[A] p\nseed s announcement K[A](p => q)\n");
        let c = derive_closure(&k, 10).unwrap();
        assert!(c.contains(&parse_formula("K[A] q").unwrap()));
        assert!(c.fixpoint);
    }

    #[test]
    fn trust_needs_an_edge() {
        let with = kb("agent A -\nagent B -\ntrust A B\nseed s announcement K[A] K[B] p\n");
        let c = derive_closure(&with, 10).unwrap();
        assert!(c.contains(&parse_formula("K[A] p").unwrap()));
        let without = kb("agent A -\nagent B -\nseed s announcement K[A] K[B] p\n");
        let c = derive_closure(&without, 10).unwrap();
        assert!(!c.contains(&parse_formula("K[A] p").unwrap()));
    }

    #[test]
    fn condition_s() {
        let k = kb("agent A -\nseed s announcement K[A] p\nseed s announcement K[A] !p\n");
        let c = derive_closure(&k, 5).unwrap();
        assert_eq!(c.contradictions.len(), 1);
        assert_eq!(c.contradictions[0].agent, "A");
        let t = c.trace_for(&[c.contradictions[0].positive, c.contradictions[0].negative]);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn contextual_refusal() {
        let text = "agent A C1\nagent B C2\ntrust A B\nseed s announcement K[A] K[B] p\n";
        let k = KnowledgeBase::parse(text, TrustMode::Contextual).unwrap();
        let c = derive_closure(&k, 5).unwrap();
        assert!(!c.contains(&parse_formula("K[A:C1] p").unwrap()));
        assert!(!c.refusals.is_empty());
        assert_eq!((c.refusals[0].truster.as_str(), c.refusals[0].trusted.as_str()), ("A", "B"));
    }

    #[test]
    fn chaining_and_generalization() {
        let k = kb("agent A -\nseed t tautology p => q\nseed t tautology q => r\n");
        let c = derive_closure(&k, 10).unwrap();
        assert!(c.contains(&parse_formula("p => r").unwrap()));
        assert!(c.contains(&parse_formula("K[A](p => q)").unwrap()));
        assert!(c.contains(&parse_formula("K[A](p => r)").unwrap()));
        let mut off = k.clone();
        off.rules.generalization = false;
        let c = derive_closure(&off, 10).unwrap();
        assert!(!c.contains(&parse_formula("K[A](p => q)").unwrap()));
    }

    #[test]
    fn depth_cap_reported() {
        let k = kb("agent A -\nseed s announcement K[A] p\nseed s announcement K[A](p => q)\n");
        let c = derive_closure(&k, 1).unwrap();
        assert!(!c.fixpoint);
        assert!(matches!(derive_closure(&k, 0), Err(EpiError::ZeroDepth)));
    }

    #[test]
    fn unknown_agent() {
        assert!(matches!(KnowledgeBase::parse("agent A -\ntrust A B\n", TrustMode::Plain), Err(EpiError::UnknownAgent(_))));
    }
}
