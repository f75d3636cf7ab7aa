//! Text form of a fiduciary apparatus.
//!
//! ```text
//! # comment
//! l 1
//! epsilon 0.4
//! N 5
//! dim_h1 2
//! block_dim 4
//! mu <index> <value>
//! label <γ> <μ> <k>
//! op <M|L1> <row> <col> <re> <im>
//! vec <name> <index> <re> <im>
//! ```
//!
//! Vector names are `phi.γ`, `psi`, `xi`, `X.γ` and `eta.γ`. Only nonzero
//! entries are listed; omitted entries are zero.

use super::FiduciaryApparatus;
use crate::numkernel::{Operator, StateVector, C64};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing field {0}")]
    Missing(&'static str),
}

fn put_vec(out: &mut String, name: &str, v: &StateVector) {
    for (i, z) in v.amplitudes().iter().enumerate() {
        if z.re != 0.0 || z.im != 0.0 {
            let _ = writeln!(out, "vec {name} {i} {:.17e} {:.17e}", z.re, z.im);
        }
    }
}

fn put_op(out: &mut String, name: &str, a: &Operator) {
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            let z = a[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let _ = writeln!(out, "op {name} {i} {j} {:.17e} {:.17e}", z.re, z.im);
            }
        }
    }
}

pub fn write_manifest(app: &FiduciaryApparatus) -> String {
    let mut out = String::from("# fiduciary apparatus\n");
    let _ = writeln!(out, "l {}", app.l);
    let _ = writeln!(out, "epsilon {:.17e}", app.epsilon);
    let _ = writeln!(out, "N {}", app.n);
    let _ = writeln!(out, "dim_h1 {}", app.dim_h1());
    let _ = writeln!(out, "block_dim {}", app.block_dim);
    for (i, v) in app.mu_values.iter().enumerate() {
        let _ = writeln!(out, "mu {i} {v:.17e}");
    }
    for (g, (mu, k)) in app.labels.iter().enumerate() {
        let _ = writeln!(out, "label {g} {mu} {k}");
    }
    put_op(&mut out, "M", &app.m);
    put_op(&mut out, "L1", &app.l1);
    for (g, v) in app.phi.iter().enumerate() {
        put_vec(&mut out, &format!("phi.{g}"), v);
    }
    put_vec(&mut out, "psi", &app.psi);
    put_vec(&mut out, "xi", &app.xi);
    for (g, v) in app.x.iter().enumerate() {
        put_vec(&mut out, &format!("X.{g}"), v);
    }
    for (g, v) in app.eta.iter().enumerate() {
        put_vec(&mut out, &format!("eta.{g}"), v);
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<FiduciaryApparatus, ManifestError> {
    let mut scalars: BTreeMap<&str, &str> = BTreeMap::new();
    let mut mu: BTreeMap<usize, f64> = BTreeMap::new();
    let mut labels: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut ops: BTreeMap<String, Vec<(usize, usize, C64)>> = BTreeMap::new();
    let mut vecs: BTreeMap<String, Vec<(usize, C64)>> = BTreeMap::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| ManifestError::Syntax { line: ln + 1, msg: msg.to_string() };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("bad index {s:?}")));
        match (toks[0], toks.len()) {
            ("l" | "epsilon" | "N" | "dim_h1" | "block_dim", 2) => {
                scalars.insert(toks[0], toks[1]);
            }
            ("mu", 3) => {
                mu.insert(idx(toks[1])?, num(toks[2])?);
            }
            ("label", 4) => {
                labels.insert(idx(toks[1])?, (idx(toks[2])?, idx(toks[3])?));
            }
            ("op", 6) => {
                let z = C64::new(num(toks[4])?, num(toks[5])?);
                ops.entry(toks[1].to_string()).or_default().push((idx(toks[2])?, idx(toks[3])?, z));
            }
            ("vec", 5) => {
                let z = C64::new(num(toks[3])?, num(toks[4])?);
                vecs.entry(toks[1].to_string()).or_default().push((idx(toks[2])?, z));
            }
            _ => return Err(err("unrecognized record")),
        }
    }

    let get = |k: &'static str| scalars.get(k).copied().ok_or(ManifestError::Missing(k));
    let bad = |k: &'static str| ManifestError::Syntax { line: 0, msg: format!("field {k} is malformed") };
    let l: i64 = get("l")?.parse().map_err(|_| bad("l"))?;
    let epsilon: f64 = get("epsilon")?.parse().map_err(|_| bad("epsilon"))?;
    let n: i64 = get("N")?.parse().map_err(|_| bad("N"))?;
    let d1: usize = get("dim_h1")?.parse().map_err(|_| bad("dim_h1"))?;
    let block_dim: usize = get("block_dim")?.parse().map_err(|_| bad("block_dim"))?;
    let dim_h2 = (2 * (n + l) as usize + 1) * block_dim;

    let build_op = |name: &str| {
        let mut a = Operator::zeros(d1);
        for &(i, j, z) in ops.get(name).map(|v| v.as_slice()).unwrap_or(&[]) {
            if i < d1 && j < d1 {
                a[(i, j)] = z;
            }
        }
        a
    };
    let build_vec = |name: &str, dim: usize| {
        let mut v = StateVector::zeros(dim);
        for &(i, z) in vecs.get(name).map(|v| v.as_slice()).unwrap_or(&[]) {
            if i < dim {
                v[i] = z;
            }
        }
        v
    };
    Ok(FiduciaryApparatus {
        l,
        epsilon,
        n,
        m: build_op("M"),
        l1: build_op("L1"),
        phi: (0..d1).map(|g| build_vec(&format!("phi.{g}"), d1)).collect(),
        labels: (0..d1).map(|g| labels.get(&g).copied().unwrap_or((g, 0))).collect(),
        mu_values: mu.values().copied().collect(),
        psi: build_vec("psi", d1),
        block_dim,
        xi: build_vec("xi", dim_h2),
        x: (0..d1).map(|g| build_vec(&format!("X.{g}"), dim_h2)).collect(),
        eta: (0..d1).map(|g| build_vec(&format!("eta.{g}"), dim_h2)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::TolerancePolicy;
    use crate::waylab::{build_fiduciary, verify_fiduciary};

    #[test]
    fn roundtrip() {
        let pol = TolerancePolicy::default();
        let app = build_fiduciary(&Operator::pauli_x(), &Operator::diag(&[1.0, 0.0]), 0.4, &pol).unwrap();
        let text = write_manifest(&app);
        let back = parse_manifest(&text).unwrap();
        assert_eq!(back, app);
        assert!(verify_fiduciary(&back, &pol).passed());
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_manifest("l 1\n"), Err(ManifestError::Missing(_))));
        assert!(matches!(parse_manifest("bogus 1 2\n"), Err(ManifestError::Syntax { line: 1, .. })));
    }
}
