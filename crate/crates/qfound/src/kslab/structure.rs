//! Orthogonality graphs and their maximal orthogonal contexts.

use super::rayfile::Ray;
use std::collections::BTreeSet;

/// Default orthogonality threshold after extended-precision evaluation.
pub const ORTHO_TOL: f64 = 1e-9;
/// Inner products between `ORTHO_TOL` and this bound are reported as suspicious.
pub const SUSPICIOUS_BOUND: f64 = 1e-4;
/// Allowed norm defect before a ray is flagged as a transcription error.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct StructureReport {
    /// Ray ids whose norm differs from 1.
    pub non_unit: Vec<(u32, f64)>,
    /// (kept id, dropped id) for rays identified up to sign.
    pub merged: Vec<(u32, u32)>,
    /// Pairs with an inner product in the suspicious band.
    pub suspicious: Vec<(u32, u32, f64)>,
    /// Cliques larger than the dimension (an inconsistency).
    pub oversized: Vec<Vec<u32>>,
    pub isolated: Vec<u32>,
}

/// Rays (one per sign class), orthogonality edges and contexts of size `d`.
#[derive(Debug, Clone)]
pub struct GreechieStructure {
    pub d: usize,
    pub rays: Vec<Ray>,
    pub edges: Vec<(usize, usize)>,
    pub adjacency: Vec<Vec<usize>>,
    pub contexts: Vec<Vec<usize>>,
    pub report: StructureReport,
}

impl GreechieStructure {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.rays.iter().position(|r| r.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.rays.iter().map(|r| r.id).collect()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Contexts as sorted id lists.
    pub fn context_ids(&self) -> Vec<Vec<u32>> {
        self.contexts.iter().map(|c| c.iter().map(|&i| self.rays[i].id).collect()).collect()
    }

    /// Sub-structure induced by the given ray ids (edges and contexts recomputed).
    pub fn induced(&self, ids: &[u32], ortho_tol: f64) -> GreechieStructure {
        let rays: Vec<Ray> = self.rays.iter().filter(|r| ids.contains(&r.id)).cloned().collect();
        derive_structure(&rays, self.d, ortho_tol)
    }
}

/// Build the orthogonality graph, identify ±v, and collect maximal cliques of size `d`.
pub fn derive_structure(rays: &[Ray], d: usize, ortho_tol: f64) -> GreechieStructure {
    let mut report = StructureReport::default();
    for r in rays {
        let defect = r.norm_defect();
        if defect > NORM_TOL {
            report.non_unit.push((r.id, defect));
        }
    }

    let mut kept: Vec<Ray> = Vec::new();
    'outer: for r in rays {
        for k in &kept {
            let ip = k.dot(r).abs();
            let nn = (k.exact_dot(k).to_f64() * r.exact_dot(r).to_f64()).sqrt();
            if nn > 0.0 && ip >= nn * (1.0 - ortho_tol) {
                report.merged.push((k.id, r.id));
                continue 'outer;
            }
        }
        kept.push(r.clone());
    }

    let n = kept.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let ip = kept[i].dot(&kept[j]).abs();
            if ip <= ortho_tol {
                edges.push((i, j));
                adjacency[i].push(j);
                adjacency[j].push(i);
            } else if ip < SUSPICIOUS_BOUND {
                report.suspicious.push((kept[i].id, kept[j].id, ip));
            }
        }
    }
    for (i, a) in adjacency.iter().enumerate() {
        if a.is_empty() {
            report.isolated.push(kept[i].id);
        }
    }

    let mut contexts = Vec::new();
    for clique in maximal_cliques(&adjacency) {
        if clique.len() == d {
            contexts.push(clique);
        } else if clique.len() > d {
            report.oversized.push(clique.iter().map(|&i| kept[i].id).collect());
        }
    }
    contexts.sort();

    GreechieStructure { d, rays: kept, edges, adjacency, contexts, report }
}

/// Bron–Kerbosch with Tomita pivoting; each clique is returned sorted.
pub fn maximal_cliques(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let nbrs: Vec<BTreeSet<usize>> = adjacency.iter().map(|a| a.iter().copied().collect()).collect();
    let mut out = Vec::new();
    let p: BTreeSet<usize> = (0..adjacency.len()).collect();
    bron_kerbosch(&nbrs, &mut Vec::new(), p, BTreeSet::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out
}

fn bron_kerbosch(
    nbrs: &[BTreeSet<usize>],
    r: &mut Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let pivot = *p.union(&x).max_by_key(|&&u| nbrs[u].intersection(&p).count()).unwrap();
    let candidates: Vec<usize> = p.difference(&nbrs[pivot]).copied().collect();
    for v in candidates {
        r.push(v);
        let np = p.intersection(&nbrs[v]).copied().collect();
        let nx = x.intersection(&nbrs[v]).copied().collect();
        bron_kerbosch(nbrs, r, np, nx, out);
        r.pop();
        p.remove(&v);
        x.insert(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn rays(v: &[&[f64]]) -> Vec<Ray> {
        v.iter().enumerate().map(|(i, c)| Ray::from_f64(i as u32 + 1, c)).collect()
    }

    #[test]
    fn standard_basis() {
        let g = derive_structure(&rays(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]), 3, ORTHO_TOL);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.contexts, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn basis_plus_diagonal() {
        let s = FRAC_1_SQRT_2;
        let (d1, d2) = ([s, s, 0.0], [s, -s, 0.0]);
        let base: Vec<&[f64]> = vec![&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &d1];
        let g = derive_structure(&rays(&base), 3, ORTHO_TOL);
        assert_eq!(g.edges.len(), 4);
        assert_eq!(g.contexts.len(), 1);
        let mut with_partner = base.clone();
        with_partner.push(&d2);
        let g = derive_structure(&rays(&with_partner), 3, ORTHO_TOL);
        assert_eq!(g.context_ids(), vec![vec![1, 2, 3], vec![3, 4, 5]]);
    }

    #[test]
    fn sign_duplicates_merge() {
        let g = derive_structure(&rays(&[&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]), 3, ORTHO_TOL);
        assert_eq!(g.len(), 2);
        assert_eq!(g.report.merged, vec![(1, 2)]);
        assert!(g.contexts.is_empty());
    }

    #[test]
    fn flags_non_unit_and_suspicious() {
        let g = derive_structure(&rays(&[&[1.0, 0.0, 0.0], &[1e-6, 1.0, 0.0], &[0.0, 0.0, 2.0]]), 3, ORTHO_TOL);
        assert_eq!(g.report.non_unit, vec![(3, 3.0)]);
        assert_eq!(g.report.suspicious.len(), 1);
    }

    #[test]
    fn cliques_of_k4() {
        let adj = vec![vec![1, 2, 3], vec![0, 2, 3], vec![0, 1, 3], vec![0, 1, 2], vec![]];
        let mut c = maximal_cliques(&adj);
        c.sort();
        assert_eq!(c, vec![vec![0, 1, 2, 3], vec![4]]);
    }
}
