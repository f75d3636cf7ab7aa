//! Contexts as finite abelian algebras, their characters, and global
//! sections of the spectral presheaf over a supplied family of contexts.
//!
//! At finite dimension a context is fully described by the partition of the
//! space into its minimal projections (blocks); the weak closure of the
//! generated algebra equals its algebraic span, so nothing is lost. A
//! character is the choice of one block, and restriction to a coarser context
//! picks the block that contains it.

use crate::kslab::{
    color_search, derive_structure, parse_ray_text, Coloring, GreechieStructure, Ray, BUG_TEXT, KS117_TEXT, ORTHO_TOL,
};
use crate::numkernel::random::{random_unitary, seeded, TestRng};
use crate::numkernel::{hermitian_eigendecomposition, NumError, Operator, StateVector, TolerancePolicy, C64};
use crate::qlattice::Projector;
use crate::report::CheckReport;
use rand::Rng;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

/// Eigenvalues closer than this are merged into one block.
pub const DEGENERACY_GAP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresheafError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("generators {0} and {1} do not commute (commutator norm {2:.3e})")]
    NotCommuting(usize, usize, f64),
    #[error("generator {0} is not Hermitian")]
    NotHermitian(usize),
    #[error("no generators")]
    Empty,
    #[error("context is not included in the character's context")]
    NotIncluded,
    #[error("ray data: {0}")]
    Data(String),
}

/// Two eigenvalues of one generator closer than [`DEGENERACY_GAP`] but not
/// equal; their blocks were merged.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyWarning {
    pub generator: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub d: usize,
    pub blocks: Vec<Projector>,
    pub generators: Vec<Operator>,
    pub warnings: Vec<DegeneracyWarning>,
}

fn restricted(a: &Operator, basis: &[StateVector]) -> Result<Operator, NumError> {
    let images: Vec<StateVector> = basis.iter().map(|v| a.apply(v)).collect::<Result<_, _>>()?;
    Ok(Operator::from_fn(basis.len(), |i, j| basis[i].inner(&images[j])))
}

fn combine(basis: &[StateVector], coeffs: &StateVector) -> StateVector {
    let mut out = StateVector::zeros(basis[0].dim());
    for (v, &c) in basis.iter().zip(coeffs.amplitudes()) {
        out.axpy(c, v);
    }
    out
}

/// Context generated by commuting Hermitian operators: eigendecompose the
/// first, then split each block by the next generator restricted to it.
pub fn generate_context(generators: &[Operator], pol: &TolerancePolicy) -> Result<Context, PresheafError> {
    let d = generators.first().ok_or(PresheafError::Empty)?.dim();
    for (i, g) in generators.iter().enumerate() {
        if g.dim() != d {
            return Err(NumError::DimensionMismatch { expected: d, found: g.dim() }.into());
        }
        if !g.is_hermitian(pol.eq_tol) {
            return Err(PresheafError::NotHermitian(i));
        }
    }
    let mut worst = (0, 0, 0.0);
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            let n = generators[i].commutator(&generators[j])?.frobenius();
            if n > worst.2 {
                worst = (i, j, n);
            }
        }
    }
    if worst.2 > pol.eq_tol {
        return Err(PresheafError::NotCommuting(worst.0, worst.1, worst.2));
    }

    let mut blocks: Vec<Vec<StateVector>> = vec![(0..d).map(|k| StateVector::basis(d, k)).collect()];
    let mut warnings = Vec::new();
    for (gi, g) in generators.iter().enumerate() {
        let mut next = Vec::new();
        for b in &blocks {
            let eig = hermitian_eigendecomposition(&restricted(g, b)?, pol)?;
            for w in eig.values.windows(2) {
                let gap = w[1] - w[0];
                if gap > pol.eq_tol && gap <= DEGENERACY_GAP {
                    warnings.push(DegeneracyWarning { generator: gi, gap });
                }
            }
            for (_, vecs) in eig.clusters(DEGENERACY_GAP) {
                next.push(vecs.iter().map(|c| combine(b, c)).collect());
            }
        }
        blocks = next;
    }
    let blocks = blocks.iter().map(|b| Projector::from_span(b, d, pol)).collect();
    Ok(Context { d, blocks, generators: generators.to_vec(), warnings })
}

impl Context {
    /// The trivial context {α·1}.
    pub fn trivial(d: usize) -> Self {
        Context { d, blocks: vec![Projector::identity(d)], generators: vec![Operator::identity(d)], warnings: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Eigenvalue of `a` on block `k`, if `a` acts as a scalar there.
    pub fn value_on(&self, k: usize, a: &Operator, tol: f64) -> Option<f64> {
        let p = self.blocks[k].op();
        let ap = a.try_mul(p).ok()?;
        let lam = ap.trace() / C64::new(self.blocks[k].rank() as f64, 0.0);
        let resid = ap.try_sub(&p.scale(lam)).ok()?.max_abs();
        (resid <= tol && lam.im.abs() <= tol).then_some(lam.re)
    }

    /// Max deviation of the blocks from a resolution of the identity.
    pub fn partition_defect(&self) -> f64 {
        let mut sum = Operator::zeros(self.d);
        let mut worst: f64 = 0.0;
        for (i, p) in self.blocks.iter().enumerate() {
            sum = sum.try_add(p.op()).expect("same dimension");
            for q in &self.blocks[i + 1..] {
                worst = worst.max(p.op().try_mul(q.op()).expect("same dimension").max_abs());
            }
        }
        worst.max(sum.max_diff(&Operator::identity(self.d)))
    }

    /// For each block of `self`, the block of `sub` containing it; `None`
    /// when `sub` is not coarser than `self`.
    pub fn restriction_map(&self, sub: &Context, tol: f64) -> Option<Vec<usize>> {
        if sub.d != self.d || sub.blocks.len() > self.blocks.len() {
            return None;
        }
        self.blocks
            .iter()
            .map(|b| {
                sub.blocks.iter().position(|s| {
                    b.range_basis().iter().all(|v| s.op().apply(v).map(|w| w.max_diff(v) <= tol).unwrap_or(false))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Character<'a> {
    pub context: &'a Context,
    pub block: usize,
}

impl Character<'_> {
    pub fn evaluate(&self, a: &Operator, tol: f64) -> Option<f64> {
        self.context.value_on(self.block, a, tol)
    }
}

/// One character per block.
pub fn characters(ctx: &Context) -> Vec<Character<'_>> {
    (0..ctx.blocks.len()).map(|block| Character { context: ctx, block }).collect()
}

pub fn restrict_character<'b>(chi: &Character<'_>, sub: &'b Context, tol: f64) -> Result<Character<'b>, PresheafError> {
    let map = chi.context.restriction_map(sub, tol).ok_or(PresheafError::NotIncluded)?;
    Ok(Character { context: sub, block: map[chi.block] })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_op(coeffs: &[f64], a: &Operator) -> Operator {
    let mut acc = Operator::zeros(a.dim());
    for &c in coeffs.iter().rev() {
        acc = acc.try_mul(a).expect("square").try_add(&Operator::identity(a.dim()).scale_re(c)).expect("square");
    }
    acc
}

/// |λ(f(A)) − f(λ(A))| for a polynomial with the given coefficients
/// (constant term first). `None` if A is not constant on the block.
pub fn functional_calculus_residual(chi: &Character<'_>, a: &Operator, coeffs: &[f64], tol: f64) -> Option<f64> {
    let lam = chi.evaluate(a, tol)?;
    let lf = chi.evaluate(&poly_op(coeffs, a), tol.max(1e-8))?;
    Some((lf - poly(coeffs, lam)).abs())
}

/// Contexts with their inclusion order; `inclusion` lists (sub, super)
/// pairs, reflexive ones included.
#[derive(Debug, Clone)]
pub struct ContextPoset {
    pub contexts: Vec<Context>,
    pub labels: Vec<String>,
    pub inclusion: Vec<(usize, usize)>,
    maps: HashMap<(usize, usize), Vec<usize>>,
}

impl ContextPoset {
    pub fn new(contexts: Vec<Context>, labels: Vec<String>, tol: f64) -> Self {
        let mut inclusion = Vec::new();
        let mut maps = HashMap::new();
        for (sup, c) in contexts.iter().enumerate() {
            for (sub, s) in contexts.iter().enumerate() {
                if let Some(m) = c.restriction_map(s, tol) {
                    inclusion.push((sub, sup));
                    maps.insert((sub, sup), m);
                }
            }
        }
        ContextPoset { contexts, labels, inclusion, maps }
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn includes(&self, sub: usize, sup: usize) -> bool {
        self.maps.contains_key(&(sub, sup))
    }

    pub fn restriction(&self, sub: usize, sup: usize) -> Option<&[usize]> {
        self.maps.get(&(sub, sup)).map(Vec::as_slice)
    }

    /// Reflexive, transitive, and antisymmetric up to equal partitions.
    pub fn is_partial_order(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| self.includes(i, i))
            && self.inclusion.iter().all(|&(a, b)| {
                a == b || !self.includes(b, a) || self.contexts[a].len() == self.contexts[b].len()
            })
            && self.inclusion.iter().all(|&(a, b)| {
                (0..n).filter(|&c| self.includes(b, c)).all(|c| {
                    self.includes(a, c)
                        && (0..self.contexts[c].len())
                            .all(|k| self.maps[&(a, c)][k] == self.maps[&(a, b)][self.maps[&(b, c)][k]])
                })
            })
    }

    /// Every restriction edge respected by a choice of blocks.
    pub fn is_section(&self, choice: &[usize]) -> bool {
        choice.len() == self.len()
            && choice.iter().zip(&self.contexts).all(|(&k, c)| k < c.len())
            && self.maps.iter().all(|(&(sub, sup), m)| m[choice[sup]] == choice[sub])
    }
}

#[derive(Debug, Clone)]
pub struct SectionSearch {
    pub section: Option<Vec<usize>>,
    pub explored: u64,
}

struct Csp<'a> {
    edges: Vec<(usize, usize, &'a [usize])>,
    touching: Vec<Vec<usize>>,
}

impl Csp<'_> {
    fn propagate(&self, dom: &mut [u64], mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; dom.len()];
        for &q in &queue {
            queued[q] = true;
        }
        while let Some(x) = queue.pop() {
            queued[x] = false;
            for &e in &self.touching[x] {
                let (sub, sup, map) = self.edges[e];
                let image = map.iter().enumerate().filter(|&(b, _)| dom[sup] >> b & 1 == 1).fold(0u64, |m, (_, &s)| m | 1 << s);
                let pre = map.iter().enumerate().filter(|&(_, &s)| dom[sub] >> s & 1 == 1).fold(0u64, |m, (b, _)| m | 1 << b);
                for (v, mask) in [(sub, image), (sup, pre)] {
                    let nd = dom[v] & mask;
                    if nd != dom[v] {
                        if nd == 0 {
                            return false;
                        }
                        dom[v] = nd;
                        if !queued[v] {
                            queued[v] = true;
                            queue.push(v);
                        }
                    }
                }
            }
        }
        true
    }

    /// Remove every value whose assignment alone propagates to a wipeout.
    fn probe(&self, dom: &mut [u64]) -> bool {
        loop {
            let mut changed = false;
            for x in 0..dom.len() {
                if dom[x].count_ones() < 2 {
                    continue;
                }
                for b in 0..64 {
                    if dom[x] >> b & 1 == 0 {
                        continue;
                    }
                    let mut trial = dom.to_vec();
                    trial[x] = 1 << b;
                    if !self.propagate(&mut trial, vec![x]) {
                        dom[x] &= !(1 << b);
                        if dom[x] == 0 || !self.propagate(dom, vec![x]) {
                            return false;
                        }
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn search(&self, dom: &mut [u64], explored: &mut u64) -> Option<Vec<usize>> {
        *explored += 1;
        if !self.probe(dom) {
            return None;
        }
        let Some(x) = (0..dom.len()).find(|&i| dom[i].count_ones() > 1) else {
            return Some(dom.iter().map(|m| m.trailing_zeros() as usize).collect());
        };
        for b in 0..64 {
            if dom[x] >> b & 1 == 0 {
                continue;
            }
            let mut next = dom.to_vec();
            next[x] = 1 << b;
            if self.propagate(&mut next, vec![x]) {
                if let Some(s) = self.search(&mut next, explored) {
                    return Some(s);
                }
            }
        }
        None
    }
}

/// First global section: contexts are branched in declared order, blocks in
/// ascending order, with restriction propagation and failed-value probing at
/// every node.
pub fn global_section_search(poset: &ContextPoset) -> SectionSearch {
    assert!(poset.contexts.iter().all(|c| c.len() <= 64), "at most 64 blocks per context");
    let edges: Vec<(usize, usize, &[usize])> = poset
        .inclusion
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| (a, b, poset.maps[&(a, b)].as_slice()))
        .collect();
    let mut touching = vec![Vec::new(); poset.len()];
    for (e, &(a, b, _)) in edges.iter().enumerate() {
        touching[a].push(e);
        touching[b].push(e);
    }
    let csp = Csp { edges, touching };
    let mut dom: Vec<u64> = poset.contexts.iter().map(|c| if c.len() == 64 { u64::MAX } else { (1u64 << c.len()) - 1 }).collect();
    let mut explored = 0;
    let all: Vec<usize> = (0..poset.len()).collect();
    let section = if csp.propagate(&mut dom, all) { csp.search(&mut dom, &mut explored) } else { None };
    SectionSearch { section, explored }
}

/// The poset induced by a ray structure: one context per maximal orthogonal
/// set, per orthogonal pair, per ray, and the trivial context.
#[derive(Debug, Clone)]
pub struct RayPoset {
    pub poset: ContextPoset,
    /// context index of each ray (structure order)
    pub ray_context: Vec<usize>,
    pub pair_context: Vec<usize>,
    pub maximal_context: Vec<usize>,
}

fn ray_projector(g: &GreechieStructure, i: usize) -> Operator {
    let v = StateVector::from_real(&g.rays[i].coords).normalized();
    Operator::outer(&v, &v)
}

pub fn ray_poset(g: &GreechieStructure, pol: &TolerancePolicy) -> Result<RayPoset, PresheafError> {
    let mut contexts = Vec::new();
    let mut labels = Vec::new();
    let id = |i: usize| g.rays[i].id;
    let mut maximal_context = Vec::new();
    for c in &g.contexts {
        let gens: Vec<Operator> = c.iter().map(|&i| ray_projector(g, i)).collect();
        maximal_context.push(contexts.len());
        contexts.push(generate_context(&gens, pol)?);
        labels.push(format!("context {}", c.iter().map(|&i| id(i).to_string()).collect::<Vec<_>>().join(",")));
    }
    let mut pair_context = Vec::new();
    for &(a, b) in &g.edges {
        pair_context.push(contexts.len());
        contexts.push(generate_context(&[ray_projector(g, a), ray_projector(g, b)], pol)?);
        labels.push(format!("pair {},{}", id(a), id(b)));
    }
    let mut ray_context = Vec::new();
    for i in 0..g.len() {
        ray_context.push(contexts.len());
        contexts.push(generate_context(&[ray_projector(g, i)], pol)?);
        labels.push(format!("ray {}", id(i)));
    }
    contexts.push(Context::trivial(g.d));
    labels.push("trivial".into());
    Ok(RayPoset { poset: ContextPoset::new(contexts, labels, pol.eq_tol.max(1e-9)), ray_context, pair_context, maximal_context })
}

impl RayPoset {
    fn block_of_value(&self, ctx: usize, ray_proj: &Operator, value: f64, tol: f64) -> Option<usize> {
        let c = &self.poset.contexts[ctx];
        (0..c.len()).find(|&k| c.value_on(k, ray_proj, tol).is_some_and(|v| (v - value).abs() <= tol))
    }

    /// Section induced by a coloring: each context takes the block on which
    /// every ray projector it contains has its colored value. Only rays whose
    /// own context lies below count; a foreign ray can still act as a scalar
    /// on some block (a ray in the span of an orthogonal pair annihilates the
    /// pair's complement) without belonging to the context.
    pub fn section_from_coloring(&self, g: &GreechieStructure, coloring: &Coloring, tol: f64) -> Option<Vec<usize>> {
        let projs: Vec<Operator> = (0..g.len()).map(|i| ray_projector(g, i)).collect();
        (0..self.poset.len())
            .map(|ci| {
                let c = &self.poset.contexts[ci];
                let members: Vec<usize> = (0..g.len()).filter(|&i| self.poset.includes(self.ray_context[i], ci)).collect();
                (0..c.len()).find(|&k| {
                    members.iter().all(|&i| c.value_on(k, &projs[i], tol).is_some_and(|v| (v - coloring.values[i] as f64).abs() <= tol))
                })
            })
            .collect()
    }

    /// Coloring read off a section: v(r) = λ(P_r) in the ray's own context.
    pub fn coloring_from_section(&self, g: &GreechieStructure, section: &[usize], tol: f64) -> Coloring {
        let values = (0..g.len())
            .map(|i| {
                let k = self.block_of_value(self.ray_context[i], &ray_projector(g, i), 1.0, tol);
                u8::from(k == Some(section[self.ray_context[i]]))
            })
            .collect();
        Coloring { values }
    }
}

/// Section verdict, coloring verdict and, when a coloring exists, the
/// coloring → section → coloring round trip.
pub fn valuation_section_roundtrip(g: &GreechieStructure, pol: &TolerancePolicy) -> Result<CheckReport, PresheafError> {
    let tol = 1e-8;
    let rp = ray_poset(g, pol)?;
    let mut rep = CheckReport::new();
    let found = color_search(g, &BTreeMap::new()).expect("no pins").coloring;
    let search = global_section_search(&rp.poset);
    rep.info("contexts in the poset", rp.poset.len());
    rep.info("section search nodes", search.explored as usize);
    rep.info("section found", search.section.is_some());
    rep.equal("section exists iff coloring exists", search.section.is_some(), found.is_some());
    if let Some(s) = &search.section {
        rep.flag("found section is consistent", rp.poset.is_section(s));
        let c = rp.coloring_from_section(g, s, tol);
        rep.flag("coloring read from the found section is valid", c.is_valid(g));
    }
    if let Some(c) = &found {
        match rp.section_from_coloring(g, c, tol) {
            Some(s) => {
                rep.flag("section built from the coloring is consistent", rp.poset.is_section(&s));
                rep.flag("round trip returns the coloring", rp.coloring_from_section(g, &s, tol) == *c);
            }
            None => rep.flag("section built from the coloring is consistent", false),
        }
    }
    Ok(rep)
}

/// Random context: a random eigenbasis with a degenerate spectrum and two
/// generators diagonal in it.
pub fn random_context(rng: &mut TestRng, pol: &TolerancePolicy) -> Result<Context, PresheafError> {
    let d = rng.random_range(2..=5);
    let u = random_unitary(rng, d);
    let levels = rng.random_range(1..=d);
    let mut spec_a = Vec::with_capacity(d);
    let mut spec_b = Vec::with_capacity(d);
    for _ in 0..d {
        spec_a.push(rng.random_range(0..levels) as f64 - 1.0);
        spec_b.push(rng.random_range(0..2) as f64 * 0.5);
    }
    let conj = |s: &[f64]| -> Operator {
        let m = u.try_mul(&Operator::diag(s)).and_then(|m| m.try_mul(&u.adjoint())).expect("square");
        m.hermitian_part()
    };
    generate_context(&[conj(&spec_a), conj(&spec_b)], pol)
}

/// Worst |λ(A²) − λ(A)²| and |λ(AB) − λ(A)λ(B)| over every character of
/// `count` random contexts.
pub fn character_calculus(count: usize, rng: &mut TestRng, pol: &TolerancePolicy) -> Result<(f64, f64), PresheafError> {
    let (mut square, mut product) = (0.0f64, 0.0f64);
    let tol = 1e-8;
    for _ in 0..count {
        let ctx = random_context(rng, pol)?;
        let a = &ctx.generators[0];
        let b = &ctx.generators[1];
        let a2 = a.try_mul(a)?;
        let ab = a.try_mul(b)?;
        for chi in characters(&ctx) {
            let la = chi.evaluate(a, tol).ok_or(PresheafError::NotIncluded)?;
            let lb = chi.evaluate(b, tol).ok_or(PresheafError::NotIncluded)?;
            let la2 = chi.evaluate(&a2, tol).ok_or(PresheafError::NotIncluded)?;
            let lab = chi.evaluate(&ab, tol).ok_or(PresheafError::NotIncluded)?;
            square = square.max((la2 - la * la).abs());
            product = product.max((lab - la * lb).abs());
        }
    }
    Ok((square, product))
}

/// Eigenvalue of `a` on each block, `None` where it is not a scalar.
pub fn block_eigenvalues(ctx: &Context, a: &Operator, tol: f64) -> Vec<Option<f64>> {
    (0..ctx.len()).map(|k| ctx.value_on(k, a, tol)).collect()
}

/// Rays at angles k·π/(2n), k < 2n, in the plane; contexts are the
/// orthogonal pairs.
pub fn dim2_grid(n: usize) -> GreechieStructure {
    let rays: Vec<Ray> = (0..2 * n)
        .map(|k| {
            let t = k as f64 * std::f64::consts::FRAC_PI_2 / n as f64;
            Ray::from_f64(k as u32 + 1, &[t.cos(), t.sin()])
        })
        .collect();
    derive_structure(&rays, 2, ORTHO_TOL)
}

/// The 18 rays of nine bases in dimension 4, each ray in exactly two bases.
pub fn eighteen_ray_set() -> GreechieStructure {
    const V: [[i8; 4]; 18] = [
        [0, 0, 0, 1], [0, 0, 1, 0], [1, 1, 0, 0], [1, -1, 0, 0], [0, 1, 0, 0], [1, 0, 1, 0],
        [1, 0, -1, 0], [1, -1, 1, -1], [1, -1, -1, 1], [0, 0, 1, 1], [1, 1, 1, 1], [0, 1, 0, -1],
        [1, 0, 0, 1], [1, 0, 0, -1], [0, 1, -1, 0], [1, 1, -1, 1], [1, 1, 1, -1], [-1, 1, 1, 1],
    ];
    let rays: Vec<Ray> = V
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let n = (v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>()).sqrt();
            Ray::from_f64(k as u32 + 1, &v.map(|x| x as f64 / n))
        })
        .collect();
    derive_structure(&rays, 4, ORTHO_TOL)
}

/// Ray families compared against the coloring search: the lone triad, two
/// triads sharing a ray, the plane grid, the bug, the 18-ray set and the
/// 117-ray set.
pub fn ray_families() -> Result<Vec<(String, GreechieStructure)>, crate::kslab::RayFileError> {
    let s = 0.5f64.sqrt();
    let lone = [Ray::from_f64(1, &[1.0, 0.0, 0.0]), Ray::from_f64(2, &[0.0, 1.0, 0.0]), Ray::from_f64(3, &[0.0, 0.0, 1.0])];
    let mut shared = lone.to_vec();
    shared.push(Ray::from_f64(4, &[0.0, s, s]));
    shared.push(Ray::from_f64(5, &[0.0, s, -s]));
    let bug = parse_ray_text(BUG_TEXT)?;
    let full = parse_ray_text(KS117_TEXT)?;
    Ok(vec![
        ("lone triad".into(), derive_structure(&lone, 3, ORTHO_TOL)),
        ("two triads sharing a ray".into(), derive_structure(&shared, 3, ORTHO_TOL)),
        ("plane grid".into(), dim2_grid(6)),
        ("bug".into(), derive_structure(&bug, 3, ORTHO_TOL)),
        ("18 rays in dimension 4".into(), eighteen_ray_set()),
        ("117 rays".into(), derive_structure(&full, 3, ORTHO_TOL)),
    ])
}

pub fn presheaf_checks(seed: u64, pol: &TolerancePolicy) -> Result<CheckReport, PresheafError> {
    let mut rep = CheckReport::new();
    let families = ray_families().map_err(|e| PresheafError::Data(e.to_string()))?;
    for (name, g) in &families {
        let sub = valuation_section_roundtrip(g, pol)?;
        rep.extend(name, sub);
    }
    rep.info("ray families", families.len());
    let mut rng = seeded(seed);
    let (square, product) = character_calculus(100, &mut rng, pol)?;
    rep.residual("λ(A²) − λ(A)² on 100 random contexts", square, 1e-10);
    rep.residual("λ(AB) − λ(A)λ(B) on 100 random contexts", product, 1e-10);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::tensor_product;

    fn pol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn trivial_and_pauli_contexts() {
        let one = generate_context(&[Operator::identity(3)], &pol()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(characters(&one)[0].evaluate(&Operator::identity(3).scale_re(2.5), 1e-12), Some(2.5));

        let z = generate_context(&[Operator::pauli_z()], &pol()).unwrap();
        let mut vals: Vec<f64> = characters(&z).iter().map(|c| c.evaluate(&Operator::pauli_z(), 1e-12).unwrap()).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-1.0, 1.0]);

        let zi = tensor_product(&Operator::pauli_z(), &Operator::identity(2));
        let iz = tensor_product(&Operator::identity(2), &Operator::pauli_z());
        let both = generate_context(&[zi.clone(), iz], &pol()).unwrap();
        assert_eq!(both.len(), 4);
        assert!(both.blocks.iter().all(|b| b.rank() == 1));
        assert!(both.partition_defect() < 1e-12);

        // block coarsening: each of the four blocks lies in one σz⊗1 block
        let coarse = generate_context(std::slice::from_ref(&zi), &pol()).unwrap();
        let map = both.restriction_map(&coarse, 1e-9).unwrap();
        for (k, &m) in map.iter().enumerate() {
            let chi = Character { context: &both, block: k };
            let sub = restrict_character(&chi, &coarse, 1e-9).unwrap();
            assert_eq!(sub.block, m);
            assert_eq!(chi.evaluate(&zi, 1e-12), sub.evaluate(&zi, 1e-12));
        }
        assert!(matches!(
            restrict_character(&Character { context: &coarse, block: 0 }, &both, 1e-9),
            Err(PresheafError::NotIncluded)
        ));
    }

    #[test]
    fn degenerate_generator() {
        let ctx = generate_context(&[Operator::diag(&[1.0, 1.0, 2.0])], &pol()).unwrap();
        assert_eq!(ctx.len(), 2);
        let mut vals: Vec<f64> = block_eigenvalues(&ctx, &Operator::diag(&[1.0, 1.0, 2.0]), 1e-12).into_iter().flatten().collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![1.0, 2.0]);

        let near = generate_context(&[Operator::diag(&[1.0, 1.0 + 1e-8, 2.0])], &pol()).unwrap();
        assert_eq!(near.len(), 2);
        assert_eq!(near.warnings.len(), 1);
    }

    #[test]
    fn not_commuting() {
        let err = generate_context(&[Operator::pauli_x(), Operator::pauli_z()], &pol()).unwrap_err();
        assert!(matches!(err, PresheafError::NotCommuting(0, 1, n) if (n - 8f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn trivial_context_is_initial() {
        let mut rng = seeded(5);
        for _ in 0..10 {
            let ctx = random_context(&mut rng, &pol()).unwrap();
            let t = Context::trivial(ctx.d);
            for chi in characters(&ctx) {
                assert_eq!(restrict_character(&chi, &t, 1e-9).unwrap().block, 0);
            }
        }
    }

    #[test]
    fn restriction_is_functorial() {
        let zi = tensor_product(&Operator::pauli_z(), &Operator::identity(2));
        let iz = tensor_product(&Operator::identity(2), &Operator::pauli_z());
        let fine = generate_context(&[zi.clone(), iz.clone()], &pol()).unwrap();
        let mid = generate_context(std::slice::from_ref(&zi), &pol()).unwrap();
        let top = Context::trivial(4);
        let poset = ContextPoset::new(vec![fine.clone(), mid.clone(), top.clone()], vec!["f".into(), "m".into(), "t".into()], 1e-9);
        assert!(poset.is_partial_order());
        for chi in characters(&fine) {
            let two = restrict_character(&restrict_character(&chi, &mid, 1e-9).unwrap(), &top, 1e-9).unwrap();
            assert_eq!(two.block, restrict_character(&chi, &top, 1e-9).unwrap().block);
        }
    }

    #[test]
    fn functional_calculus() {
        let mut rng = seeded(11);
        let (sq, prod) = character_calculus(100, &mut rng, &pol()).unwrap();
        assert!(sq < 1e-10 && prod < 1e-10, "{sq} {prod}");
        let ctx = random_context(&mut rng, &pol()).unwrap();
        for chi in characters(&ctx) {
            let r = functional_calculus_residual(&chi, &ctx.generators[0], &[0.5, -1.0, 2.0, 0.25], 1e-8).unwrap();
            assert!(r < 1e-9);
        }
    }

    #[test]
    fn single_context_sections() {
        let ctx = generate_context(&[Operator::diag(&[0.0, 1.0, 2.0])], &pol()).unwrap();
        let poset = ContextPoset::new(vec![ctx], vec!["c".into()], 1e-9);
        let s = global_section_search(&poset);
        assert_eq!(s.section, Some(vec![0]));
    }

    fn triad() -> GreechieStructure {
        let rays = vec![Ray::from_f64(1, &[1.0, 0.0, 0.0]), Ray::from_f64(2, &[0.0, 1.0, 0.0]), Ray::from_f64(3, &[0.0, 0.0, 1.0])];
        derive_structure(&rays, 3, ORTHO_TOL)
    }

    #[test]
    fn triad_roundtrip() {
        let g = triad();
        let rep = valuation_section_roundtrip(&g, &pol()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        // every valid coloring of a lone triad gives a valid section
        let rp = ray_poset(&g, &pol()).unwrap();
        for one in 0..3 {
            let mut values = vec![0u8; 3];
            values[one] = 1;
            let c = Coloring { values };
            let s = rp.section_from_coloring(&g, &c, 1e-8).unwrap();
            assert!(rp.poset.is_section(&s));
            assert_eq!(rp.coloring_from_section(&g, &s, 1e-8), c);
        }
    }

    #[test]
    fn orthogonal_pair_forbids_two_ones() {
        // an orthogonal pair outside any maximal context
        let rays = vec![Ray::from_f64(1, &[1.0, 0.0, 0.0]), Ray::from_f64(2, &[0.0, 1.0, 0.0])];
        let g = derive_structure(&rays, 3, ORTHO_TOL);
        assert!(g.contexts.is_empty());
        let rp = ray_poset(&g, &pol()).unwrap();
        assert_eq!(rp.pair_context.len(), 1);
        let bad = Coloring { values: vec![1, 1] };
        assert!(!bad.is_valid(&g));
        assert!(rp.section_from_coloring(&g, &bad, 1e-8).is_none());
        assert!(valuation_section_roundtrip(&g, &pol()).unwrap().passed());
    }

    #[test]
    fn families_agree_with_colorings() {
        let fams = ray_families().unwrap();
        let expect_section = [true, true, true, true, false, false];
        for ((name, g), want) in fams.iter().zip(expect_section) {
            let rep = valuation_section_roundtrip(g, &pol()).unwrap();
            assert!(rep.passed(), "{name}: {:?}", rep.failures().collect::<Vec<_>>());
            let got = global_section_search(&ray_poset(g, &pol()).unwrap().poset).section.is_some();
            assert_eq!(got, want, "{name}");
        }
        let e = &fams[4].1;
        assert_eq!((e.len(), e.contexts.len()), (18, 9));
        assert_eq!(fams[2].1.contexts.len(), 6);
    }

    #[test]
    fn ray_in_span_of_a_pair_imposes_nothing() {
        // 78 lies in the plane of the orthogonal pair 110, 111 without being
        // orthogonal to either, so it annihilates that pair's complement block
        let all = crate::kslab::parse_ray_text(crate::kslab::KS117_TEXT).unwrap();
        let pick: Vec<Ray> = all.into_iter().filter(|r| [74, 76, 78, 110, 111].contains(&r.id)).collect();
        let g = derive_structure(&pick, 3, ORTHO_TOL);
        let rep = valuation_section_roundtrip(&g, &pol()).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    }
}
