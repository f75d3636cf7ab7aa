//! Nested-radical expressions: parsing, printing and extended-precision evaluation.
//!
//! Values are fixed-point integers scaled by 10^80, which leaves well over 30
//! significant digits after the cancellations that occur in the ray tables.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

const FRAC_DIGITS: u32 = 80;

fn scale() -> &'static BigInt {
    static S: OnceLock<BigInt> = OnceLock::new();
    S.get_or_init(|| BigInt::from(10u32).pow(FRAC_DIGITS))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadicalError {
    #[error("syntax error at position {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Fixed-point real with 80 fractional decimal digits.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Fixed(BigInt);

impl Fixed {
    pub fn from_int(n: i64) -> Self {
        Fixed(BigInt::from(n) * scale())
    }

    /// Exact parse of a decimal literal such as "12" or "0.125".
    pub fn from_decimal(text: &str) -> Option<Self> {
        let (int, frac) = match text.split_once('.') {
            Some((a, b)) => (a, b),
            None => (text, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > FRAC_DIGITS as usize {
            return None;
        }
        let digits: BigInt = format!("{}{}", if int.is_empty() { "0" } else { int }, frac).parse().ok()?;
        let pad = BigInt::from(10u32).pow(FRAC_DIGITS - frac.len() as u32);
        Some(Fixed(digits * pad))
    }

    pub fn zero() -> Self {
        Fixed(BigInt::zero())
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 - &o.0)
    }

    pub fn neg(&self) -> Fixed {
        Fixed(-&self.0)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed(round_div(&(&self.0 * &o.0), scale()))
    }

    pub fn div(&self, o: &Fixed) -> Result<Fixed, RadicalError> {
        if o.0.is_zero() {
            return Err(RadicalError::DomainError("division by zero".into()));
        }
        Ok(Fixed(round_div(&(&self.0 * scale()), &o.0)))
    }

    pub fn sqrt(&self) -> Result<Fixed, RadicalError> {
        if self.0.is_negative() {
            return Err(RadicalError::DomainError(format!("sqrt of negative value {}", self.to_f64())));
        }
        Ok(Fixed((&self.0 * scale()).sqrt()))
    }

    pub fn abs(&self) -> Fixed {
        Fixed(self.0.abs())
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Decimal text with `digits` fractional digits (truncated).
    pub fn to_decimal(&self, digits: u32) -> String {
        let digits = digits.min(FRAC_DIGITS);
        let cut = BigInt::from(10u32).pow(FRAC_DIGITS - digits);
        let v = &self.0 / cut;
        let neg = v.sign() == Sign::Minus;
        let s = v.abs().to_string();
        let s = format!("{:0>width$}", s, width = digits as usize + 1);
        let (a, b) = s.split_at(s.len() - digits as usize);
        format!("{}{}.{}", if neg { "-" } else { "" }, a, b)
    }

    /// Correctly rounded to the nearest double (via a 40-digit decimal).
    pub fn to_f64(&self) -> f64 {
        self.to_decimal(40).parse().unwrap_or(f64::NAN)
    }

    /// |self| ≤ 10^(−k)
    pub fn is_below_exp10(&self, k: u32) -> bool {
        self.0.abs() <= BigInt::from(10u32).pow(FRAC_DIGITS.saturating_sub(k))
    }
}

fn round_div(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_mod_floor(d);
    if (r * 2u32).abs() >= d.abs() {
        if d.is_negative() {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Decimal literal, kept as written.
    Num(String),
    Neg(Box<Expr>),
    Sqrt(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self) -> Result<Fixed, RadicalError> {
        Ok(match self {
            Expr::Num(s) => Fixed::from_decimal(s).ok_or_else(|| RadicalError::DomainError(format!("bad literal {s}")))?,
            Expr::Neg(a) => a.eval()?.neg(),
            Expr::Sqrt(a) => a.eval()?.sqrt()?,
            Expr::Add(a, b) => a.eval()?.add(&b.eval()?),
            Expr::Sub(a, b) => a.eval()?.sub(&b.eval()?),
            Expr::Mul(a, b) => a.eval()?.mul(&b.eval()?),
            Expr::Div(a, b) => a.eval()?.div(&b.eval()?)?,
        })
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Num(..) | Expr::Sqrt(..) => 4,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
        if child.prec() < min_prec {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(s) => f.write_str(s),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.write_child(f, a, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.write_child(f, a, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                self.write_child(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.write_child(f, a, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                self.write_child(f, b, 3)
            }
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct RadicalExpr {
    pub text: String,
    pub expr: Expr,
}

impl RadicalExpr {
    pub fn eval(&self) -> Result<Fixed, RadicalError> {
        self.expr.eval()
    }
}

impl fmt::Display for RadicalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Sqrt,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, RadicalError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        let tok = match ch {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' | '−' => Tok::Minus,
            '*' | '×' | '·' => Tok::Star,
            '/' | '÷' => Tok::Slash,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '√' => Tok::Sqrt,
            c if c.is_ascii_digit() || c == '.' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    s.push(chars[i].1);
                    i += 1;
                }
                if s.matches('.').count() > 1 || s == "." {
                    return Err(RadicalError::SyntaxError { position: pos, message: format!("malformed number '{s}'") });
                }
                out.push((pos, Tok::Num(s)));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while i < chars.len() && chars[i].1.is_ascii_alphabetic() {
                    s.push(chars[i].1);
                    i += 1;
                }
                if s != "sqrt" {
                    return Err(RadicalError::SyntaxError { position: pos, message: format!("unknown identifier '{s}'") });
                }
                out.push((pos, Tok::Sqrt));
                continue;
            }
            c => {
                return Err(RadicalError::SyntaxError { position: pos, message: format!("unexpected character '{c}'") })
            }
        };
        out.push((pos, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, message: &str) -> Result<T, RadicalError> {
        Err(RadicalError::SyntaxError { position: self.pos(), message: message.into() })
    }

    fn sum(&mut self) -> Result<Expr, RadicalError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, RadicalError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                // implicit multiplication: 2(…), 2sqrt(…), (…)(…)
                Some(Tok::LParen) | Some(Tok::Sqrt) | Some(Tok::Num(_)) => {
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, RadicalError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.at += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.at += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, RadicalError> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                self.at += 1;
                Ok(Expr::Num(s))
            }
            Some(Tok::Sqrt) => {
                self.at += 1;
                Ok(Expr::Sqrt(Box::new(self.atom()?)))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.sum()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.at += 1;
                Ok(e)
            }
            Some(_) => self.err("expected a number, 'sqrt' or '('"),
            None => self.err("unexpected end of expression"),
        }
    }
}

pub fn parse_radical(text: &str) -> Result<RadicalExpr, RadicalError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(RadicalError::SyntaxError { position: 0, message: "empty expression".into() });
    }
    let mut p = Parser { toks, at: 0, end: text.len() };
    let expr = p.sum()?;
    if p.at != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(RadicalExpr { text: text.to_string(), expr })
}
