//! Kochen-Specker machinery: exact ray ingestion, orthogonality structure,
//! exhaustive two-valued coloring, prime filters, frame-function fitting and
//! the two-valued measure that exists in dimension two.

pub mod coloring;
pub mod gleason;
pub mod radical;
pub mod rayfile;
pub mod structure;

pub use coloring::{color_search, color_search_ordered, enumerate_colorings, Coloring, ColoringError, SearchOutcome};
pub use gleason::{dim2_two_valued_measure, gleason_checks, gleason_fit, random_dim2_grid, FrameSample, GleasonFit};
pub use radical::{parse_radical, Fixed, RadicalError, RadicalExpr};
pub use rayfile::{load_rays, parse_ray_text, Ray, RayFileError};
pub use structure::{derive_structure, GreechieStructure, ORTHO_TOL};

use crate::numkernel::{StateVector, TolerancePolicy};
use crate::qlattice::{join, leq, meet, Projector};
use crate::report::CheckReport;
use std::collections::BTreeMap;

/// The shipped 117-ray file.
pub const KS117_TEXT: &str = include_str!("../../data/ks117.rays");
/// The shipped eight-ray bug file.
pub const BUG_TEXT: &str = include_str!("../../data/bug.rays");

pub const BUG_START: u32 = 1;
pub const BUG_END: u32 = 8;

fn ray_vector(r: &Ray) -> StateVector {
    StateVector::from_real(&r.coords)
}

/// The finite lattice fragment generated by the rays of a structure:
/// ray projectors, the planes spanned by two rays of a context, and 1.
#[derive(Debug, Clone)]
pub struct LatticeFragment {
    pub elements: Vec<(String, Projector)>,
    /// value of the two-valued homomorphism on each element
    pub values: Vec<u8>,
}

pub fn lattice_fragment(c: &Coloring, g: &GreechieStructure) -> LatticeFragment {
    let d = g.d;
    let mut elements = Vec::new();
    let mut values = Vec::new();
    for (i, r) in g.rays.iter().enumerate() {
        elements.push((format!("ray {}", r.id), Projector::ray(&ray_vector(r))));
        values.push(c.values[i]);
    }
    for ctx in &g.contexts {
        for a in 0..ctx.len() {
            for b in (a + 1)..ctx.len() {
                let (u, v) = (ctx[a], ctx[b]);
                let name = format!("plane {}+{}", g.rays[u].id, g.rays[v].id);
                if elements.iter().any(|(n, _)| *n == name) {
                    continue;
                }
                let p = Projector::from_orthonormal(vec![ray_vector(&g.rays[u]).normalized(), ray_vector(&g.rays[v]).normalized()], d);
                elements.push((name, p));
                values.push(c.values[u] + c.values[v]);
            }
        }
    }
    elements.push(("one".into(), Projector::identity(d)));
    values.push(1);
    LatticeFragment { elements, values }
}

/// The value-1 set of a coloring must be a prime filter on the fragment:
/// upward closed, closed under meets (never reaching 0), prime on joins.
/// Meets and joins are taken only for commuting pairs, the ones that live in a
/// common Boolean block; across blocks a coloring is not a homomorphism.
pub fn coloring_to_prime_filter(c: &Coloring, g: &GreechieStructure, pol: &TolerancePolicy) -> CheckReport {
    let mut rep = CheckReport::new();
    let frag = lattice_fragment(c, g);
    let els = &frag.elements;
    let n = els.len();
    let in_f: Vec<bool> = frag.values.iter().map(|&v| v == 1).collect();
    let find = |p: &Projector| els.iter().position(|(_, q)| q.approx_eq(p, 1e-9));

    rep.flag("homomorphism is two-valued", frag.values.iter().all(|&v| v <= 1));

    let mut upward = 0usize;
    let mut meet_fail = 0usize;
    let mut prime_fail = 0usize;
    for i in 0..n {
        for j in 0..n {
            if in_f[i] && !in_f[j] && leq(&els[i].1, &els[j].1, pol) {
                upward += 1;
            }
            if j <= i {
                continue;
            }
            let (a, b) = (els[i].1.op(), els[j].1.op());
            if (a * b).max_diff(&(b * a)) > pol.eq_tol {
                continue;
            }
            if in_f[i] && in_f[j] {
                let m = meet(&els[i].1, &els[j].1, pol).expect("equal dimensions");
                if m.rank() == 0 {
                    meet_fail += 1;
                } else if let Some(k) = find(&m) {
                    if !in_f[k] {
                        meet_fail += 1;
                    }
                }
            }
            let jn = join(&els[i].1, &els[j].1, pol).expect("equal dimensions");
            if let Some(k) = find(&jn) {
                if in_f[k] && !in_f[i] && !in_f[j] {
                    prime_fail += 1;
                }
            }
        }
    }
    rep.equal("upward closure violations", upward, 0usize);
    rep.equal("meet closure violations", meet_fail, 0usize);
    rep.equal("primeness violations", prime_fail, 0usize);
    rep.info("fragment size", n);
    rep
}

/// Structure and report for the forcing property of the "bug": with its first
/// node valued 1, every completed coloring values its last node 0.
#[derive(Debug, Clone)]
pub struct BugCheck {
    pub route: &'static str,
    pub completions: usize,
    pub forced_zero: bool,
}

pub fn bug_forcing(g: &GreechieStructure) -> Result<BugCheck, ColoringError> {
    let all = enumerate_colorings(g, &BTreeMap::from([(BUG_START, 1)]), 1 << 20)?;
    let forced_zero = !all.is_empty() && all.iter().all(|c| c.value_of(g, BUG_END) == Some(0));
    Ok(BugCheck { route: "bug ray file", completions: all.len(), forced_zero })
}

/// Use the bug rays when they validate; otherwise the induced subgraph of the full set.
pub fn bug_structure(bug: Option<&[Ray]>, full: &[Ray]) -> (GreechieStructure, &'static str) {
    if let Some(rays) = bug {
        let g = derive_structure(rays, 3, ORTHO_TOL);
        if g.report.non_unit.is_empty() && g.len() == rays.len() {
            return (g, "bug ray file");
        }
    }
    let ids: Vec<u32> = (BUG_START..=BUG_END).collect();
    let sub: Vec<Ray> = full.iter().filter(|r| ids.contains(&r.id)).cloned().collect();
    (derive_structure(&sub, 3, ORTHO_TOL), "induced subgraph of the full ray set")
}

/// Summary checks for a ray set: validation, structure statistics and colorability.
pub fn validate_rays(rays: &[Ray], d: usize) -> (GreechieStructure, CheckReport) {
    let g = derive_structure(rays, d, ORTHO_TOL);
    let mut rep = CheckReport::new();
    rep.info("rays read", rays.len());
    rep.info("rays after sign identification", g.len());
    rep.info("orthogonal pairs", g.edges.len());
    rep.info("contexts", g.contexts.len());
    rep.equal("non-unit rays", g.report.non_unit.len(), 0usize);
    rep.equal("oversized cliques", g.report.oversized.len(), 0usize);
    if !g.report.suspicious.is_empty() {
        rep.warn("suspicious inner products", g.report.suspicious.len());
    }
    for (id, defect) in &g.report.non_unit {
        rep.warn(format!("ray {id} norm defect"), *defect);
    }
    (g, rep)
}
