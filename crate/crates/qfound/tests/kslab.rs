use qfound::kslab::coloring::Coloring;
use qfound::kslab::*;
use qfound::numkernel::random::seeded;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn full() -> Vec<Ray> {
    load_rays(data("ks117.rays")).unwrap()
}

#[test]
fn full_set_validates() {
    let rays = full();
    assert_eq!(rays.len(), 117);
    let (g, rep) = validate_rays(&rays, 3);
    assert!(rep.passed(), "{rep:?}");
    assert!(g.report.non_unit.is_empty());
    assert!(g.report.suspicious.is_empty());
    assert_eq!(g.len(), 117);
}

/// The set is generated from eight base rays by rotations of π/10 about z and
/// by cyclic permutation of coordinates; rebuild it that way and compare.
#[test]
fn coordinates_match_rotation_construction() {
    let rays = full();
    let coords = |id: u32| rays.iter().find(|r| r.id == id).unwrap().coords.clone();
    let (c, s) = ((PI / 10.0).cos(), (PI / 10.0).sin());
    let mut truth: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for k in 1..=8u32 {
        let mut v = coords(k);
        for j in 0..5u32 {
            let idx = k + 8 * j;
            if idx <= 39 {
                truth.insert(idx, v.clone());
            }
            v = vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
        }
    }
    for k in 1..=39u32 {
        let v = truth[&k].clone();
        let w = vec![v[2], v[0], v[1]];
        let u = vec![w[2], w[0], w[1]];
        truth.insert(k + 39, w);
        truth.insert(k + 78, u);
    }
    for (id, want) in truth {
        let got = coords(id);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-12, "ray {id} component {i}: {} vs {}", got[i], want[i]);
        }
    }
}

/// Independent O(n³) triangle enumeration over the raw inner products.
#[test]
fn contexts_match_brute_force_triangles() {
    let rays = full();
    let g = derive_structure(&rays, 3, ORTHO_TOL);
    let n = rays.len();
    let dot = |a: &Ray, b: &Ray| a.coords.iter().zip(&b.coords).map(|(x, y)| x * y).sum::<f64>().abs();
    let orth: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i != j && dot(&rays[i], &rays[j]) < 1e-9).collect()).collect();
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| orth[i][j]).count();
    let mut triads = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if orth[i][j] && orth[i][k] && orth[j][k] {
                    triads.push(vec![rays[i].id, rays[j].id, rays[k].id]);
                }
            }
        }
    }
    assert_eq!(g.edges.len(), edges);
    let mut ctx = g.context_ids();
    ctx.sort();
    assert_eq!(ctx, triads);
}

#[test]
fn full_set_is_uncolorable() {
    let g = derive_structure(&full(), 3, ORTHO_TOL);
    let out = color_search(&g, &BTreeMap::new()).unwrap();
    assert!(out.coloring.is_none());
    assert!(out.explored > 0);
}

#[test]
fn shuffled_order_same_verdict() {
    let g = derive_structure(&full(), 3, ORTHO_TOL);
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.shuffle(&mut seeded(42));
    let out = color_search_ordered(&g, &BTreeMap::new(), &order).unwrap();
    assert!(out.coloring.is_none());
}

#[test]
fn sign_flips_leave_structure_unchanged() {
    let rays = full();
    let flipped: Vec<Ray> = rays.iter().map(|r| if r.id % 3 == 0 { r.negated() } else { r.clone() }).collect();
    let a = derive_structure(&rays, 3, ORTHO_TOL);
    let b = derive_structure(&flipped, 3, ORTHO_TOL);
    assert_eq!(a.edges, b.edges);
    assert_eq!(a.contexts, b.contexts);
}

#[test]
fn bug_forces_last_node() {
    let bug = load_rays(data("bug.rays")).unwrap();
    let (g, route) = bug_structure(Some(&bug), &full());
    assert_eq!(route, "bug ray file");
    assert_eq!(g.len(), 8);
    assert_eq!(g.contexts.len(), 2);
    let chk = bug_forcing(&g).unwrap();
    assert!(chk.forced_zero);
    assert!(chk.completions >= 1);
    // pinning both ends to 1 leaves nothing
    match color_search(&g, &BTreeMap::from([(BUG_START, 1), (BUG_END, 1)])) {
        Ok(out) => assert!(out.coloring.is_none()),
        Err(ColoringError::InconsistentPins(_)) => {}
    }
}

#[test]
fn bug_colorings_are_prime_filters() {
    let pol = qfound::numkernel::TolerancePolicy::default();
    let bug = load_rays(data("bug.rays")).unwrap();
    let g = derive_structure(&bug, 3, ORTHO_TOL);
    let all: Vec<Coloring> = enumerate_colorings(&g, &BTreeMap::new(), 1000).unwrap();
    assert!(!all.is_empty());
    for c in &all {
        assert!(c.is_valid(&g));
        assert!(coloring_to_prime_filter(c, &g, &pol).passed());
    }
}
