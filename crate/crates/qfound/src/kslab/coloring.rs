//! Two-valued colorings of a Greechie structure: one ray valued 1 per context,
//! never two orthogonal rays valued 1.

use super::structure::GreechieStructure;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColoringError {
    #[error("pins are inconsistent: {0}")]
    InconsistentPins(String),
}

/// Values per structure node, in the structure's ray order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub values: Vec<u8>,
}

impl Coloring {
    pub fn value_of(&self, g: &GreechieStructure, id: u32) -> Option<u8> {
        g.index_of(id).map(|i| self.values[i])
    }

    /// Lookup by ray id.
    pub fn by_id(&self, g: &GreechieStructure) -> BTreeMap<u32, u8> {
        g.rays.iter().zip(&self.values).map(|(r, &v)| (r.id, v)).collect()
    }

    /// Exactly one 1 per context and no orthogonal pair valued (1, 1).
    pub fn is_valid(&self, g: &GreechieStructure) -> bool {
        self.values.len() == g.len()
            && self.values.iter().all(|&v| v <= 1)
            && g.contexts.iter().all(|c| c.iter().filter(|&&i| self.values[i] == 1).count() == 1)
            && g.edges.iter().all(|&(a, b)| !(self.values[a] == 1 && self.values[b] == 1))
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub coloring: Option<Coloring>,
    /// Decision nodes visited.
    pub explored: u64,
}

struct Solver<'a> {
    g: &'a GreechieStructure,
    ctx_of: Vec<Vec<usize>>,
    values: Vec<Option<u8>>,
    trail: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(g: &'a GreechieStructure) -> Self {
        let mut ctx_of = vec![Vec::new(); g.len()];
        for (ci, c) in g.contexts.iter().enumerate() {
            for &i in c {
                ctx_of[i].push(ci);
            }
        }
        Solver { g, ctx_of, values: vec![None; g.len()], trail: Vec::new() }
    }

    /// Assign and propagate; false on conflict (assignments stay on the trail).
    fn assign(&mut self, node: usize, val: u8) -> bool {
        let mut queue = vec![(node, val)];
        while let Some((n, v)) = queue.pop() {
            match self.values[n] {
                Some(cur) if cur == v => continue,
                Some(_) => return false,
                None => {}
            }
            self.values[n] = Some(v);
            self.trail.push(n);
            if v == 1 {
                for &m in &self.g.adjacency[n] {
                    match self.values[m] {
                        Some(1) => return false,
                        Some(_) => {}
                        None => queue.push((m, 0)),
                    }
                }
            } else {
                for &ci in &self.ctx_of[n] {
                    let c = &self.g.contexts[ci];
                    let mut open = None;
                    let mut n_open = 0;
                    let mut has_one = false;
                    for &m in c {
                        match self.values[m] {
                            None => {
                                n_open += 1;
                                open = Some(m);
                            }
                            Some(1) => has_one = true,
                            Some(_) => {}
                        }
                    }
                    if has_one {
                        continue;
                    }
                    match n_open {
                        0 => return false,
                        1 => queue.push((open.unwrap(), 1)),
                        _ => {}
                    }
                }
            }
        }
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let n = self.trail.pop().unwrap();
            self.values[n] = None;
        }
    }

    fn coloring(&self) -> Coloring {
        Coloring { values: self.values.iter().map(|v| v.unwrap_or(0)).collect() }
    }

    /// Failed-literal probing: any value whose propagation conflicts is
    /// excluded, forcing the other. Returns false if a node admits neither.
    fn probe(&mut self, order: &[usize]) -> bool {
        loop {
            let mut changed = false;
            for &node in order {
                if self.values[node].is_some() {
                    continue;
                }
                for val in [1u8, 0u8] {
                    let mark = self.trail.len();
                    let ok = self.assign(node, val);
                    self.undo_to(mark);
                    if !ok {
                        if !self.assign(node, 1 - val) {
                            return false;
                        }
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Depth-first search in `order`; `visit` returns true to stop.
    fn search(&mut self, order: &[usize], explored: &mut u64, visit: &mut dyn FnMut(Coloring) -> bool) -> bool {
        let mark = self.trail.len();
        if !self.probe(order) {
            self.undo_to(mark);
            return false;
        }
        let found = self.branch(order, explored, visit);
        self.undo_to(mark);
        found
    }

    fn branch(&mut self, order: &[usize], explored: &mut u64, visit: &mut dyn FnMut(Coloring) -> bool) -> bool {
        let next = order.iter().copied().find(|&i| self.values[i].is_none());
        let Some(node) = next else {
            return visit(self.coloring());
        };
        for val in [0u8, 1u8] {
            *explored += 1;
            let mark = self.trail.len();
            if self.assign(node, val) && self.search(order, explored, visit) {
                return true;
            }
            self.undo_to(mark);
        }
        false
    }
}

fn pinned_solver<'a>(g: &'a GreechieStructure, pins: &BTreeMap<u32, u8>) -> Result<Solver<'a>, ColoringError> {
    let mut s = Solver::new(g);
    for (&id, &v) in pins {
        let idx = g.index_of(id).ok_or_else(|| ColoringError::InconsistentPins(format!("unknown ray id {id}")))?;
        if v > 1 {
            return Err(ColoringError::InconsistentPins(format!("ray {id} pinned to {v}")));
        }
        if !s.assign(idx, v) {
            return Err(ColoringError::InconsistentPins(format!("pin {id}={v} conflicts with the context rule")));
        }
    }
    Ok(s)
}

/// First coloring in ascending id order (value 0 tried before 1).
///
/// Each search node runs unit propagation (a 1 zeroes its neighbours, a context
/// with one open ray left and no 1 forces it to 1) followed by failed-literal
/// probing.
pub fn color_search(g: &GreechieStructure, pins: &BTreeMap<u32, u8>) -> Result<SearchOutcome, ColoringError> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by_key(|&i| g.rays[i].id);
    color_search_ordered(g, pins, &order)
}

/// Same search with an explicit variable order.
pub fn color_search_ordered(
    g: &GreechieStructure,
    pins: &BTreeMap<u32, u8>,
    order: &[usize],
) -> Result<SearchOutcome, ColoringError> {
    let mut s = pinned_solver(g, pins)?;
    let mut explored = 0;
    let mut found = None;
    s.search(order, &mut explored, &mut |c| {
        found = Some(c);
        true
    });
    Ok(SearchOutcome { coloring: found, explored })
}

/// Every coloring extending the pins (stops after `limit`).
pub fn enumerate_colorings(
    g: &GreechieStructure,
    pins: &BTreeMap<u32, u8>,
    limit: usize,
) -> Result<Vec<Coloring>, ColoringError> {
    let mut s = pinned_solver(g, pins)?;
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by_key(|&i| g.rays[i].id);
    let mut out = Vec::new();
    let mut explored = 0;
    s.search(&order, &mut explored, &mut |c| {
        out.push(c);
        out.len() >= limit
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::rayfile::Ray;
    use super::super::structure::{derive_structure, ORTHO_TOL};
    use super::*;

    fn triad() -> GreechieStructure {
        let rays: Vec<Ray> =
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate().map(|(i, c)| Ray::from_f64(i as u32 + 1, c)).collect();
        derive_structure(&rays, 3, ORTHO_TOL)
    }

    #[test]
    fn triad_has_three_colorings() {
        let g = triad();
        let all = enumerate_colorings(&g, &BTreeMap::new(), 100).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|c| c.is_valid(&g)));
        let first = color_search(&g, &BTreeMap::new()).unwrap().coloring.unwrap();
        assert_eq!(first.values, vec![0, 0, 1]);
    }

    #[test]
    fn pins() {
        let g = triad();
        let c = color_search(&g, &BTreeMap::from([(1, 1)])).unwrap().coloring.unwrap();
        assert_eq!(c.values, vec![1, 0, 0]);
        assert!(matches!(color_search(&g, &BTreeMap::from([(1, 1), (2, 1)])), Err(ColoringError::InconsistentPins(_))));
        assert!(matches!(color_search(&g, &BTreeMap::from([(1, 0), (2, 0), (3, 0)])), Err(ColoringError::InconsistentPins(_))));
        assert!(matches!(color_search(&g, &BTreeMap::from([(9, 1)])), Err(ColoringError::InconsistentPins(_))));
    }

    #[test]
    fn deterministic() {
        let g = triad();
        let a = color_search(&g, &BTreeMap::new()).unwrap();
        let b = color_search(&g, &BTreeMap::new()).unwrap();
        assert_eq!(a.coloring, b.coloring);
        assert_eq!(a.explored, b.explored);
    }
}
