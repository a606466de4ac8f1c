//! Polynomial expressions for the prescribed mean curvature.
//!
//! Grammar (recursive descent, `^` binds tightest and takes a
//! non-negative integer exponent):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary ('*' unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' integer)?
//! atom    := number | variable | '(' sum ')'
//! ```
//!
//! Variables are `t` (same as `nu3`), `nu1`, `nu2`, `nu3`.

use std::fmt;
use std::sync::Arc;

use pmc_core::gaussfield::{AxialFn, SphereFn, SphereGradFn};
use pmc_core::PrescribedH;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Component `0..3` of the unit normal.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.msg, self.pos)
    }
}

impl std::error::Error for ParseError {}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a non-negative integer exponent");
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        match digits.parse::<u32>() {
            Ok(n) => Ok(Expr::Pow(Box::new(base), n)),
            Err(_) => Err(ParseError { pos: start, msg: "exponent too large".into() }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                match &self.src[start..self.pos] {
                    b"t" | b"nu3" => Ok(Expr::Var(2)),
                    b"nu1" => Ok(Expr::Var(0)),
                    b"nu2" => Ok(Expr::Var(1)),
                    other => Err(ParseError {
                        pos: start,
                        msg: format!("unknown variable {:?}", String::from_utf8_lossy(other)),
                    }),
                }
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if exp_start == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse().map(Expr::Num).map_err(|_| ParseError { pos: start, msg: format!("bad number {text:?}") })
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.sum()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, nu: [f64; 3]) -> f64 {
        self.eval_grad(nu).0
    }

    /// Value and gradient with respect to `(nu1, nu2, nu3)`.
    pub fn eval_grad(&self, nu: [f64; 3]) -> (f64, [f64; 3]) {
        match self {
            Expr::Num(c) => (*c, [0.0; 3]),
            Expr::Var(k) => {
                let mut d = [0.0; 3];
                d[*k] = 1.0;
                (nu[*k], d)
            }
            Expr::Neg(a) => {
                let (v, d) = a.eval_grad(nu);
                (-v, d.map(|x| -x))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (va, da) = a.eval_grad(nu);
                let (vb, db) = b.eval_grad(nu);
                let s = if matches!(self, Expr::Add(..)) { 1.0 } else { -1.0 };
                (va + s * vb, std::array::from_fn(|k| da[k] + s * db[k]))
            }
            Expr::Mul(a, b) => {
                let (va, da) = a.eval_grad(nu);
                let (vb, db) = b.eval_grad(nu);
                (va * vb, std::array::from_fn(|k| da[k] * vb + va * db[k]))
            }
            Expr::Pow(a, n) => {
                let (v, d) = a.eval_grad(nu);
                if *n == 0 {
                    return (1.0, [0.0; 3]);
                }
                let dn = *n as f64 * v.powi(*n as i32 - 1);
                (v.powi(*n as i32), d.map(|x| x * dn))
            }
        }
    }

    /// Whether `nu1` or `nu2` occurs.
    pub fn is_axial(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(k) => *k == 2,
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_axial(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.is_axial() && b.is_axial(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            Expr::Add(a, b) => Some(a.constant_value()? + b.constant_value()?),
            Expr::Sub(a, b) => Some(a.constant_value()? - b.constant_value()?),
            Expr::Mul(a, b) => Some(a.constant_value()? * b.constant_value()?),
            Expr::Pow(a, n) => a.constant_value().map(|v| v.powi(*n as i32)),
        }
    }
}

/// Parses `src` into a prescribed mean curvature with closed-form
/// derivatives. Constant expressions give [`PrescribedH::constant`];
/// expressions in `t` alone are axial.
pub fn prescribed_h(src: &str) -> Result<PrescribedH, ParseError> {
    let e = parse(src)?;
    if let Some(c) = e.constant_value() {
        return Ok(PrescribedH::constant(c));
    }
    let e = Arc::new(e);
    let desc = src.trim().to_string();
    if e.is_axial() {
        let (ev, ed) = (e.clone(), e);
        let h: AxialFn = Arc::new(move |t| ev.eval([0.0, 0.0, t]));
        let dh: AxialFn = Arc::new(move |t| ed.eval_grad([0.0, 0.0, t]).1[2]);
        return Ok(PrescribedH::axial(desc, h, Some(dh)));
    }
    let (ev, eg) = (e.clone(), e);
    let value: SphereFn = Arc::new(move |nu| ev.eval(nu));
    let grad: SphereGradFn = Arc::new(move |nu| eg.eval_grad(nu).1);
    Ok(PrescribedH::new(desc, value, Some(grad)))
}
