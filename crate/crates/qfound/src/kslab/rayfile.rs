//! Ray files: `#` comments, one ray per line as `<id>: <expr> ; <expr> ; <expr>`.

use super::radical::{parse_radical, Fixed, RadicalError, RadicalExpr};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RayFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}, component {component}: {source}")]
    Expr { line: usize, component: usize, source: RadicalError },
    #[error("cannot read ray file: {0}")]
    Io(#[from] std::io::Error),
}

/// A direction given by exact expressions and evaluated at extended precision.
#[derive(Debug, Clone)]
pub struct Ray {
    pub id: u32,
    pub source: Vec<RadicalExpr>,
    pub exact: Vec<Fixed>,
    pub coords: Vec<f64>,
}

impl Ray {
    pub fn from_exprs(id: u32, source: Vec<RadicalExpr>) -> Result<Self, (usize, RadicalError)> {
        let mut exact = Vec::with_capacity(source.len());
        for (k, e) in source.iter().enumerate() {
            exact.push(e.eval().map_err(|err| (k, err))?);
        }
        let coords = exact.iter().map(Fixed::to_f64).collect();
        Ok(Ray { id, source, exact, coords })
    }

    /// Ray from plain doubles (used for generated families).
    pub fn from_f64(id: u32, coords: &[f64]) -> Self {
        let source: Vec<RadicalExpr> = coords
            .iter()
            .map(|x| {
                let text = format!("{x:e}");
                let expr = parse_radical(&format!("{:.30}", x.abs()))
                    .map(|e| if *x < 0.0 { super::radical::Expr::Neg(Box::new(e.expr)) } else { e.expr })
                    .expect("decimal literal parses");
                RadicalExpr { text, expr }
            })
            .collect();
        let exact = source.iter().map(|e| e.eval().expect("finite literal")).collect();
        Ray { id, source, exact, coords: coords.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// |‖v‖² − 1| at extended precision, rounded to a double.
    pub fn norm_defect(&self) -> f64 {
        let mut s = Fixed::zero();
        for x in &self.exact {
            s = s.add(&x.mul(x));
        }
        s.sub(&Fixed::from_int(1)).abs().to_f64()
    }

    /// Extended-precision inner product.
    pub fn exact_dot(&self, other: &Ray) -> Fixed {
        let mut s = Fixed::zero();
        for (a, b) in self.exact.iter().zip(&other.exact) {
            s = s.add(&a.mul(b));
        }
        s
    }

    pub fn dot(&self, other: &Ray) -> f64 {
        self.exact_dot(other).to_f64()
    }

    pub fn negated(&self) -> Ray {
        Ray {
            id: self.id,
            source: self
                .source
                .iter()
                .map(|e| RadicalExpr { text: format!("-({})", e.text), expr: super::radical::Expr::Neg(Box::new(e.expr.clone())) })
                .collect(),
            exact: self.exact.iter().map(Fixed::neg).collect(),
            coords: self.coords.iter().map(|x| -x).collect(),
        }
    }
}

impl fmt::Display for Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.source.iter().map(|e| e.to_string()).collect();
        write!(f, "{}: {}", self.id, parts.join(" ; "))
    }
}

pub fn parse_ray_text(text: &str) -> Result<Vec<Ray>, RayFileError> {
    let mut rays = Vec::new();
    let mut dim = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, rest) = line
            .split_once(':')
            .ok_or_else(|| RayFileError::Format { line: line_no, message: "missing ':' after ray id".into() })?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| RayFileError::Format { line: line_no, message: format!("bad ray id '{}'", id.trim()) })?;
        if rays.iter().any(|r: &Ray| r.id == id) {
            return Err(RayFileError::Format { line: line_no, message: format!("duplicate ray id {id}") });
        }
        let mut exprs = Vec::new();
        for (k, part) in rest.split(';').enumerate() {
            exprs.push(parse_radical(part.trim()).map_err(|source| RayFileError::Expr { line: line_no, component: k, source })?);
        }
        match dim {
            None => dim = Some(exprs.len()),
            Some(d) if d != exprs.len() => {
                return Err(RayFileError::Format {
                    line: line_no,
                    message: format!("expected {d} components, found {}", exprs.len()),
                })
            }
            _ => {}
        }
        let ray = Ray::from_exprs(id, exprs).map_err(|(component, source)| RayFileError::Expr { line: line_no, component, source })?;
        rays.push(ray);
    }
    Ok(rays)
}

pub fn load_rays(path: impl AsRef<Path>) -> Result<Vec<Ray>, RayFileError> {
    parse_ray_text(&std::fs::read_to_string(path)?)
}

pub fn write_ray_text(rays: &[Ray]) -> String {
    let mut s = String::new();
    for r in rays {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_small_file() {
        let text = "# basis\n1: 1 ; 0 ; 0\n\n2: 0 ; 1/sqrt(2) ; -1/sqrt(2)\n";
        let rays = parse_ray_text(text).unwrap();
        assert_eq!(rays.len(), 2);
        assert!(rays[1].norm_defect() < 1e-70);
        assert_eq!(rays[0].dot(&rays[1]), 0.0);
    }

    #[test]
    fn format_errors() {
        assert!(matches!(parse_ray_text("1 1 ; 0 ; 0"), Err(RayFileError::Format { line: 1, .. })));
        assert!(matches!(parse_ray_text("1: 1 ; 0\n2: 1 ; 0 ; 0"), Err(RayFileError::Format { line: 2, .. })));
        assert!(matches!(parse_ray_text("1: 1 ; 0 ; sqrt(-2)"), Err(RayFileError::Expr { component: 2, .. })));
        assert!(matches!(parse_ray_text("1: 1 ; 0 ; 0\n1: 0 ; 1 ; 0"), Err(RayFileError::Format { .. })));
    }

    #[test]
    fn write_then_parse() {
        let rays = parse_ray_text("5: (1+sqrt(5))/4 ; -sqrt(2) ; 0.5").unwrap();
        let again = parse_ray_text(&write_ray_text(&rays)).unwrap();
        assert_eq!(rays[0].exact, again[0].exact);
    }
}
