//! Hardy's paradox with two overlapping Mach-Zehnder interferometers.
//!
//! Channels are ordered `[++, +−, −+, −−, γ]` where each sign slot names the
//! first (u or c) or second (v or d) arm of the positron and electron
//! interferometers. Every splitter acts as `(1/√2)[[1, i], [i, 1]]` on
//! (first arm, second arm); the source mode s enters through the second port,
//! so `s ↦ (v + iu)/√2`.
//!
//! Two routes: exact arithmetic in ℚ(i, √2) by mode substitution, and floating
//! 5×5 unitaries built with the numeric kernel.

use crate::numkernel::{c, tensor_product, Operator, StateVector, C64, ONE, ZERO};
use crate::report::CheckReport;
use num_rational::Ratio;
use num_traits::{One, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

pub type Q = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardyError {
    #[error("coincidence probability is defined for the configuration with both splitters; computed for {0}")]
    ConfigUnsupported(ApparatusConfig),
    #[error("probability has an irrational part")]
    Irrational,
}

/// `a + b√2` with rational a, b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Surd {
    pub a: Q,
    pub b: Q,
}

impl Surd {
    pub fn new(a: Q, b: Q) -> Self {
        Surd { a, b }
    }

    pub fn rational(a: Q) -> Self {
        Surd { a, b: Q::zero() }
    }

    pub fn zero() -> Self {
        Self::rational(Q::zero())
    }

    pub fn to_f64(self) -> f64 {
        let f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
        f(self.a) + f(self.b) * std::f64::consts::SQRT_2
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        Surd::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        Surd::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd::new(-self.a, -self.b)
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        let two = Q::from_integer(2);
        Surd::new(self.a * o.a + two * self.b * o.b, self.a * o.b + self.b * o.a)
    }
}

/// Exact complex amplitude `re + i·im` with surd parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exact {
    pub re: Surd,
    pub im: Surd,
}

impl Exact {
    pub fn zero() -> Self {
        Exact { re: Surd::zero(), im: Surd::zero() }
    }

    pub fn one() -> Self {
        Exact { re: Surd::rational(Q::one()), im: Surd::zero() }
    }

    pub fn i() -> Self {
        Exact { re: Surd::zero(), im: Surd::rational(Q::one()) }
    }

    /// `1/√2 = √2/2`
    pub fn inv_sqrt2() -> Self {
        Exact { re: Surd::new(Q::zero(), Q::new(1, 2)), im: Surd::zero() }
    }

    /// `(p + q√2) + i(r + s√2)` from integer-over-denominator parts.
    pub fn from_parts(re: (Q, Q), im: (Q, Q)) -> Self {
        Exact { re: Surd::new(re.0, re.1), im: Surd::new(im.0, im.1) }
    }

    pub fn norm_sqr(self) -> Surd {
        self.re * self.re + self.im * self.im
    }

    pub fn to_c64(self) -> C64 {
        c(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl Add for Exact {
    type Output = Exact;
    fn add(self, o: Exact) -> Exact {
        Exact { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact { re: -self.re, im: -self.im }
    }
}

impl Mul for Exact {
    type Output = Exact;
    fn mul(self, o: Exact) -> Exact {
        Exact { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApparatusConfig {
    pub bs2_plus_present: bool,
    pub bs2_minus_present: bool,
}

impl ApparatusConfig {
    pub const NEITHER: Self = ApparatusConfig { bs2_plus_present: false, bs2_minus_present: false };
    pub const PLUS_ONLY: Self = ApparatusConfig { bs2_plus_present: true, bs2_minus_present: false };
    pub const MINUS_ONLY: Self = ApparatusConfig { bs2_plus_present: false, bs2_minus_present: true };
    pub const BOTH: Self = ApparatusConfig { bs2_plus_present: true, bs2_minus_present: true };
    pub const ALL: [Self; 4] = [Self::NEITHER, Self::PLUS_ONLY, Self::MINUS_ONLY, Self::BOTH];

    pub fn name(self) -> &'static str {
        match (self.bs2_plus_present, self.bs2_minus_present) {
            (false, false) => "neither",
            (true, false) => "plus",
            (false, true) => "minus",
            (true, true) => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Exchange the roles of the two interferometers.
    pub fn mirrored(self) -> Self {
        ApparatusConfig { bs2_plus_present: self.bs2_minus_present, bs2_minus_present: self.bs2_plus_present }
    }
}

impl fmt::Display for ApparatusConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    PostBs1,
    PostAnnihilation,
    Final,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Initial, Stage::PostBs1, Stage::PostAnnihilation, Stage::Final];

    pub fn labels(self) -> [&'static str; 5] {
        match self {
            Stage::Final => ["c⁺c⁻", "c⁺d⁻", "d⁺c⁻", "d⁺d⁻", "γ"],
            _ => ["u⁺u⁻", "u⁺v⁻", "v⁺u⁻", "v⁺v⁻", "γ"],
        }
    }
}

pub const CC: usize = 0;
pub const CD: usize = 1;
pub const DC: usize = 2;
pub const DD: usize = 3;
pub const GAMMA: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct HardyAmplitudes<T> {
    pub stage: Stage,
    pub amps: [T; 5],
}

impl HardyAmplitudes<Exact> {
    pub fn total_probability(&self) -> Surd {
        self.amps.iter().fold(Surd::zero(), |s, a| s + a.norm_sqr())
    }

    pub fn to_float(&self) -> HardyAmplitudes<C64> {
        HardyAmplitudes { stage: self.stage, amps: self.amps.map(Exact::to_c64) }
    }

    pub fn probability(&self, channel: usize) -> Result<Q, HardyError> {
        let p = self.amps[channel].norm_sqr();
        if p.b.is_zero() {
            Ok(p.a)
        } else {
            Err(HardyError::Irrational)
        }
    }
}

impl HardyAmplitudes<C64> {
    pub fn total_probability(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Image of (first arm, second arm) under a splitter, as exact 2-vectors.
fn splitter_exact(present: bool) -> [[Exact; 2]; 2] {
    let h = Exact::inv_sqrt2();
    if present {
        // u ↦ (c + id)/√2, v ↦ (d + ic)/√2
        [[h, Exact::i() * h], [Exact::i() * h, h]]
    } else {
        [[Exact::one(), Exact::zero()], [Exact::zero(), Exact::one()]]
    }
}

/// Substitute each factor's modes by the splitter images and expand.
fn substitute(amps: &[Exact; 5], plus: [[Exact; 2]; 2], minus: [[Exact; 2]; 2]) -> [Exact; 5] {
    let mut out = [Exact::zero(); 5];
    out[GAMMA] = amps[GAMMA];
    for p in 0..2 {
        for m in 0..2 {
            let coeff = amps[2 * p + m];
            if coeff.is_zero() {
                continue;
            }
            for p2 in 0..2 {
                for m2 in 0..2 {
                    out[2 * p2 + m2] = out[2 * p2 + m2] + coeff * plus[p][p2] * minus[m][m2];
                }
            }
        }
    }
    out
}

/// All four stages of the exact evolution for one configuration.
pub fn run_stages(cfg: ApparatusConfig) -> Vec<HardyAmplitudes<Exact>> {
    let mut amps = [Exact::zero(); 5];
    amps[DD] = Exact::one();
    let mut stages = vec![HardyAmplitudes { stage: Stage::Initial, amps }];
    amps = substitute(&amps, splitter_exact(true), splitter_exact(true));
    stages.push(HardyAmplitudes { stage: Stage::PostBs1, amps });
    amps[GAMMA] = amps[GAMMA] + amps[CC];
    amps[CC] = Exact::zero();
    stages.push(HardyAmplitudes { stage: Stage::PostAnnihilation, amps });
    amps = substitute(&amps, splitter_exact(cfg.bs2_plus_present), splitter_exact(cfg.bs2_minus_present));
    stages.push(HardyAmplitudes { stage: Stage::Final, amps });
    stages
}

pub fn run_scenario(cfg: ApparatusConfig) -> HardyAmplitudes<Exact> {
    run_stages(cfg).pop().expect("four stages")
}

fn splitter_op(present: bool) -> Operator {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    if present {
        Operator::from_fn(2, |i, j| if i == j { c(h, 0.0) } else { c(0.0, h) })
    } else {
        Operator::identity(2)
    }
}

/// Embed a 4×4 two-particle operator into the five channels, γ fixed.
fn with_gamma(op: &Operator) -> Operator {
    Operator::from_fn(5, |i, j| match (i, j) {
        (4, 4) => ONE,
        (4, _) | (_, 4) => ZERO,
        _ => op[(i, j)],
    })
}

/// Annihilation as the unitary exchanging the u⁺u⁻ channel with γ.
pub fn annihilation_op() -> Operator {
    Operator::from_fn(5, |i, j| {
        let target = match j {
            0 => 4,
            4 => 0,
            k => k,
        };
        if i == target {
            ONE
        } else {
            ZERO
        }
    })
}

/// Floating route: the same evolution as products of 5×5 unitaries.
pub fn run_stages_float(cfg: ApparatusConfig) -> Vec<HardyAmplitudes<C64>> {
    let bs1 = with_gamma(&tensor_product(&splitter_op(true), &splitter_op(true)));
    let bs2 = with_gamma(&tensor_product(&splitter_op(cfg.bs2_plus_present), &splitter_op(cfg.bs2_minus_present)));
    let mut psi = StateVector::basis(5, DD);
    let mut out = Vec::new();
    let snap = |stage, v: &StateVector| {
        let a = v.amplitudes();
        HardyAmplitudes { stage, amps: [a[0], a[1], a[2], a[3], a[4]] }
    };
    out.push(snap(Stage::Initial, &psi));
    for (stage, op) in [(Stage::PostBs1, bs1), (Stage::PostAnnihilation, annihilation_op()), (Stage::Final, bs2)] {
        psi = op.apply(&psi).expect("five channels");
        out.push(snap(stage, &psi));
    }
    out
}

pub fn run_scenario_float(cfg: ApparatusConfig) -> HardyAmplitudes<C64> {
    run_stages_float(cfg).pop().expect("four stages")
}

/// Output amplitudes (c, d) of one interferometer with both splitters and no
/// partner: the constructive port is c.
pub fn single_interferometer() -> [Exact; 2] {
    let b = splitter_exact(true);
    let after1 = b[1];
    let mut out = [Exact::zero(); 2];
    for (k, &a) in after1.iter().enumerate() {
        for j in 0..2 {
            out[j] = out[j] + a * b[k][j];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coincidence {
    pub exact: Q,
    pub float: f64,
    /// set when the configuration is not the one with both splitters
    pub note: Option<HardyError>,
}

/// P(d⁺ ∧ d⁻), exactly and in floating point.
pub fn coincidence_probability(cfg: ApparatusConfig) -> Result<Coincidence, HardyError> {
    let exact = run_scenario(cfg).probability(DD)?;
    let float = run_scenario_float(cfg).amps[DD].norm_sqr();
    let note = (cfg != ApparatusConfig::BOTH).then_some(HardyError::ConfigUnsupported(cfg));
    Ok(Coincidence { exact, float, note })
}

/// Deterministic outcome record (C⁺(∞), C⁻(∞), D⁺(0), D⁻(0)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub c_plus: bool,
    pub c_minus: bool,
    pub d_plus: bool,
    pub d_minus: bool,
}

impl Assignment {
    pub fn from_bits(bits: u8) -> Self {
        Assignment { c_plus: bits & 8 != 0, c_minus: bits & 4 != 0, d_plus: bits & 2 != 0, d_minus: bits & 1 != 0 }
    }

    /// No joint c-detection without splitters, and each d-click with its
    /// splitter implies the partner's c-click without the partner's splitter.
    pub fn satisfies_constraints(&self) -> bool {
        !(self.c_plus && self.c_minus) && (!self.d_plus || self.c_minus) && (!self.d_minus || self.c_plus)
    }
}

#[derive(Debug, Clone)]
pub struct LhvOutcome {
    pub feasible: Vec<Assignment>,
    pub contradiction: bool,
}

pub fn lhv_search() -> LhvOutcome {
    let feasible: Vec<Assignment> = (0..16u8).map(Assignment::from_bits).filter(Assignment::satisfies_constraints).collect();
    let contradiction = !feasible.iter().any(|a| a.d_plus && a.d_minus);
    LhvOutcome { feasible, contradiction }
}

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Final amplitudes written out by hand for each configuration.
pub fn reference_amplitudes(cfg: ApparatusConfig) -> [Exact; 5] {
    let z = q(0, 1);
    let re = |a: Q, b: Q| Exact::from_parts((a, b), (z, z));
    let im = |a: Q, b: Q| Exact::from_parts((z, z), (a, b));
    let zero = Exact::zero();
    match (cfg.bs2_plus_present, cfg.bs2_minus_present) {
        // ½(−γ + i c⁺d⁻ + i d⁺c⁻ + d⁺d⁻)
        (false, false) => [zero, im(q(1, 2), z), im(q(1, 2), z), re(q(1, 2), z), re(q(-1, 2), z)],
        // (1/2√2)(−√2γ + 2i c⁺d⁻ + i d⁺c⁻ − c⁺c⁻)
        (true, false) => [re(z, q(-1, 4)), im(z, q(1, 2)), im(z, q(1, 4)), zero, re(q(-1, 2), z)],
        (false, true) => [re(z, q(-1, 4)), im(z, q(1, 4)), im(z, q(1, 2)), zero, re(q(-1, 2), z)],
        // ¼(−2γ + i d⁺c⁻ + i c⁺d⁻ − 3c⁺c⁻ − d⁺d⁻)
        (true, true) => [re(q(-3, 4), z), im(q(1, 4), z), im(q(1, 4), z), re(q(-1, 4), z), re(q(-1, 2), z)],
    }
}

/// Every check of the module for the CLI and the acceptance runner.
pub fn hardy_checks(tol: f64) -> CheckReport {
    let mut rep = CheckReport::new();
    rep.info("gamma convention", "single channel carrying the full transferred amplitude");
    for cfg in ApparatusConfig::ALL {
        let exact = run_stages(cfg);
        let float = run_stages_float(cfg);
        let mut worst_norm = 0.0f64;
        let mut exact_norm = true;
        let mut worst_route = 0.0f64;
        for (e, f) in exact.iter().zip(&float) {
            exact_norm &= e.total_probability() == Surd::rational(Q::one());
            worst_norm = worst_norm.max((f.total_probability() - 1.0).abs());
            worst_route = worst_route.max(e.to_float().max_diff(f));
        }
        rep.flag(format!("{cfg}: exact normalization at every stage"), exact_norm);
        rep.residual(format!("{cfg}: floating normalization at every stage"), worst_norm, tol);
        rep.residual(format!("{cfg}: exact vs floating amplitudes"), worst_route, tol);
        let matches = exact.last().unwrap().amps == reference_amplitudes(cfg);
        rep.flag(format!("{cfg}: final amplitudes match the reference display"), matches);
    }
    let neither = run_scenario(ApparatusConfig::NEITHER);
    rep.flag("neither: no c⁺c⁻ term", neither.amps[CC].is_zero());
    match coincidence_probability(ApparatusConfig::BOTH) {
        Ok(co) => {
            rep.equal("both: exact P(d⁺d⁻)", co.exact, q(1, 16));
            rep.close("both: floating P(d⁺d⁻)", co.float, 1.0 / 16.0, tol);
        }
        Err(e) => rep.flag(format!("both: exact P(d⁺d⁻) ({e})"), false),
    }
    let mirror = run_scenario(ApparatusConfig::PLUS_ONLY);
    let other = run_scenario(ApparatusConfig::MINUS_ONLY);
    let swapped = [mirror.amps[CC], mirror.amps[DC], mirror.amps[CD], mirror.amps[DD], mirror.amps[GAMMA]];
    rep.flag("plus-only and minus-only are mirror images", swapped == other.amps);
    let single = single_interferometer();
    rep.flag("single interferometer: all amplitude at c", single[0] == Exact::i() && single[1].is_zero());
    let lhv = lhv_search();
    rep.info("local assignments satisfying the constraints", lhv.feasible.len());
    rep.flag("no local assignment has D⁺D⁻ = 1", lhv.contradiction);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surd_arithmetic() {
        let r2 = Surd::new(q(0, 1), q(1, 1));
        assert_eq!(r2 * r2, Surd::rational(q(2, 1)));
        let h = Exact::inv_sqrt2();
        assert_eq!((h * h).re, Surd::rational(q(1, 2)));
        assert_eq!(Exact::i() * Exact::i(), -Exact::one());
    }

    #[test]
    fn post_bs1_state() {
        // ½(−u⁺u⁻ + i u⁺v⁻ + i v⁺u⁻ + v⁺v⁻)
        let s = &run_stages(ApparatusConfig::BOTH)[1];
        let half = Exact::from_parts((q(1, 2), q(0, 1)), (q(0, 1), q(0, 1)));
        assert_eq!(s.amps[CC], -half);
        assert_eq!(s.amps[CD], Exact::i() * half);
        assert_eq!(s.amps[DC], Exact::i() * half);
        assert_eq!(s.amps[DD], half);
        assert!(s.amps[GAMMA].is_zero());
    }

    #[test]
    fn all_configs_match_reference() {
        for cfg in ApparatusConfig::ALL {
            assert_eq!(run_scenario(cfg).amps, reference_amplitudes(cfg), "{cfg}");
        }
    }

    #[test]
    fn coincidence_is_one_sixteenth() {
        let co = coincidence_probability(ApparatusConfig::BOTH).unwrap();
        assert_eq!(co.exact, q(1, 16));
        assert!((co.float - 0.0625).abs() < 1e-12);
        assert!(co.note.is_none());
        let other = coincidence_probability(ApparatusConfig::NEITHER).unwrap();
        assert_eq!(other.exact, q(1, 4));
        assert!(matches!(other.note, Some(HardyError::ConfigUnsupported(_))));
    }

    #[test]
    fn neither_has_no_joint_c() {
        assert_eq!(run_scenario(ApparatusConfig::NEITHER).probability(CC).unwrap(), q(0, 1));
    }

    #[test]
    fn single_interferometer_is_dark_at_d() {
        let [cc, dd] = single_interferometer();
        assert_eq!(cc, Exact::i());
        assert!(dd.is_zero());
    }

    #[test]
    fn lhv_examples() {
        let out = lhv_search();
        assert!(out.feasible.contains(&Assignment::from_bits(0)));
        assert!(!Assignment::from_bits(15).satisfies_constraints());
        assert!(out.contradiction);
    }

    #[test]
    fn checks_pass() {
        let rep = hardy_checks(1e-12);
        assert!(rep.passed(), "{rep:?}");
    }
}
