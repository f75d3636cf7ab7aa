//! Check records shared by every module and the JSON report written by the CLI.

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Warn => "warn",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A reported quantity. Rationals serialize as "p/q" text.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Rational(i64, i64),
    Text(String),
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<num_rational::Ratio<i64>> for Value {
    fn from(r: num_rational::Ratio<i64>) -> Self {
        Value::Rational(*r.numer(), *r.denom())
    }
}

/// Round to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Num(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            Value::Rational(p, q) => Some(p as f64 / q as f64),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("-"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Num(x) if *x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) => write!(f, "{:e}", round15(*x)),
            Value::Num(x) => write!(f, "{}", round15(*x)),
            Value::Rational(p, q) => write!(f, "{p}/{q}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_none(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Num(x) if x.is_finite() => s.serialize_f64(round15(*x)),
            Value::Num(_) => s.serialize_none(),
            Value::Rational(p, q) => s.serialize_str(&format!("{p}/{q}")),
            Value::Text(t) => s.serialize_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Value,
    pub expected: Value,
    pub tolerance: Option<f64>,
}

impl Serialize for Check {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Check", 5)?;
        st.serialize_field("name", &self.name)?;
        st.serialize_field("status", self.status.as_str())?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("expected", &self.expected)?;
        st.serialize_field("tolerance", &self.tolerance.map(Value::Num).unwrap_or(Value::Null))?;
        st.end()
    }
}

/// An ordered list of checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Pass iff `value ≤ tol`.
    pub fn residual(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::from_bool(value <= tol),
            value: Value::Num(value),
            expected: Value::Num(0.0),
            tolerance: Some(tol),
        });
    }

    /// Pass iff |value − expected| ≤ tol.
    pub fn close(&mut self, name: impl Into<String>, value: f64, expected: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::from_bool((value - expected).abs() <= tol),
            value: Value::Num(value),
            expected: Value::Num(expected),
            tolerance: Some(tol),
        });
    }

    /// Pass iff `value ≥ min`.
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, min: f64) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::from_bool(value >= min),
            value: Value::Num(value),
            expected: Value::Num(min),
            tolerance: None,
        });
    }

    pub fn flag(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::from_bool(ok),
            value: Value::Bool(ok),
            expected: Value::Bool(true),
            tolerance: None,
        });
    }

    pub fn equal(&mut self, name: impl Into<String>, value: impl Into<Value>, expected: impl Into<Value>) {
        let (value, expected) = (value.into(), expected.into());
        self.checks.push(Check {
            name: name.into(),
            status: Status::from_bool(value == expected),
            value,
            expected,
            tolerance: None,
        });
    }

    pub fn info(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Pass,
            value: value.into(),
            expected: Value::Null,
            tolerance: None,
        });
    }

    pub fn warn(&mut self, name: impl Into<String>, value: impl Into<Value>) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Warn,
            value: value.into(),
            expected: Value::Null,
            tolerance: None,
        });
    }

    pub fn extend(&mut self, prefix: &str, other: CheckReport) {
        for mut c in other.checks {
            if !prefix.is_empty() {
                c.name = format!("{prefix}.{}", c.name);
            }
            self.checks.push(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Params<'a>(&'a [(String, Value)]);

impl Serialize for Params<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

/// Top-level report of one CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub parameters: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    pub elapsed_ms: u64,
    pub seed: Option<u64>,
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Report", 5)?;
        st.serialize_field("command", &self.command)?;
        st.serialize_field("parameters", &Params(&self.parameters))?;
        st.serialize_field("checks", &self.checks)?;
        st.serialize_field("elapsed_ms", &self.elapsed_ms)?;
        st.serialize_field("seed", &self.seed)?;
        st.end()
    }
}

impl Report {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        Report { command: command.into(), parameters: Vec::new(), checks: Vec::new(), elapsed_ms: 0, seed }
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.parameters.push((key.into(), value.into()));
    }

    pub fn absorb(&mut self, prefix: &str, checks: CheckReport) {
        for mut c in checks.checks {
            if !prefix.is_empty() {
                c.name = format!("{prefix}.{}", c.name);
            }
            self.checks.push(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_key_order() {
        let mut r = Report::new("hardy run", Some(42));
        r.param("config", "both");
        r.param("alpha", 1.0);
        let mut c = CheckReport::new();
        c.equal("p", Value::Rational(1, 16), Value::Rational(1, 16));
        r.absorb("", c);
        let j = r.to_json();
        let pos = |k: &str| j.find(k).unwrap();
        assert!(pos("\"command\"") < pos("\"parameters\""));
        assert!(pos("\"parameters\"") < pos("\"checks\""));
        assert!(pos("\"checks\"") < pos("\"elapsed_ms\""));
        assert!(pos("\"elapsed_ms\"") < pos("\"seed\""));
        assert!(pos("\"config\"") < pos("\"alpha\""));
        assert!(j.contains("\"1/16\""));
        assert!(j.lines().all(|l| !l.ends_with(' ')));
    }

    #[test]
    fn fifteen_digits() {
        assert_eq!(round15(4.0 / 11.0), 0.363636363636364);
        let j = serde_json::to_string(&Value::Num(1.0 / 3.0)).unwrap();
        assert_eq!(j, "0.333333333333333");
    }

    #[test]
    fn failing_check_fails_report() {
        let mut c = CheckReport::new();
        c.residual("r", 1e-3, 1e-9);
        assert!(!c.passed());
        c.checks[0].status = Status::Warn;
        assert!(c.passed());
    }
}
