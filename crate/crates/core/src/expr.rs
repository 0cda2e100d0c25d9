//! A small arithmetic expression language used for kernel profiles,
//! nonlinearities and initial data.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')' | '|' expr '|'
//! ```
//!
//! Names: `t`, `x` (= `x1`), `x2`, `z` (= `z1`), `z2`, `r` (= |z|), `u`, `pi`, `e`.
//! Functions: `sin cos tan exp ln sqrt abs tanh cosh sinh` (one argument) and
//! `min max` (two or more).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

const MAX_STACK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    T,
    X1,
    X2,
    Z1,
    Z2,
    R,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum F1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
    Cosh,
    Sinh,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Load(Var),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Call(F1),
    Min,
    Max,
}

/// Evaluation environment. Unused fields may be left at zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    pub t: f64,
    pub x: [f64; 2],
    pub z: [f64; 2],
    pub u: f64,
}

impl Env {
    pub fn u(u: f64) -> Self {
        Env { u, ..Default::default() }
    }

    pub fn txz(t: f64, x: &[f64], z: &[f64]) -> Self {
        let mut e = Env { t, ..Default::default() };
        for (i, v) in x.iter().take(2).enumerate() {
            e.x[i] = *v;
        }
        for (i, v) in z.iter().take(2).enumerate() {
            e.z[i] = *v;
        }
        e
    }
}

/// A compiled expression. Serialises as its source string.
#[derive(Clone)]
pub struct Expr {
    src: String,
    code: Vec<Op>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.src)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let toks = lex(src)?;
        let mut p = Parser { toks, pos: 0, code: Vec::new() };
        p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr { pos: p.toks[p.pos].1, msg: "unexpected trailing input".into() });
        }
        let code = p.code;
        check_depth(&code)?;
        Ok(Expr { src: src.to_string(), code })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// True if the expression reads any of `x`, `x1`, `x2`.
    pub fn uses_x(&self) -> bool {
        self.code.iter().any(|o| matches!(o, Op::Load(Var::X1) | Op::Load(Var::X2)))
    }

    pub fn uses_t(&self) -> bool {
        self.code.iter().any(|o| matches!(o, Op::Load(Var::T)))
    }

    pub fn eval(&self, env: &Env) -> f64 {
        let mut st = [0.0f64; MAX_STACK];
        let mut sp = 0usize;
        for op in &self.code {
            match *op {
                Op::Const(c) => {
                    st[sp] = c;
                    sp += 1;
                }
                Op::Load(v) => {
                    st[sp] = match v {
                        Var::T => env.t,
                        Var::X1 => env.x[0],
                        Var::X2 => env.x[1],
                        Var::Z1 => env.z[0],
                        Var::Z2 => env.z[1],
                        Var::R => env.z[0].hypot(env.z[1]),
                        Var::U => env.u,
                    };
                    sp += 1;
                }
                Op::Neg => st[sp - 1] = -st[sp - 1],
                Op::Call(f) => {
                    let a = st[sp - 1];
                    st[sp - 1] = match f {
                        F1::Sin => a.sin(),
                        F1::Cos => a.cos(),
                        F1::Tan => a.tan(),
                        F1::Exp => a.exp(),
                        F1::Ln => a.ln(),
                        F1::Sqrt => a.sqrt(),
                        F1::Abs => a.abs(),
                        F1::Tanh => a.tanh(),
                        F1::Cosh => a.cosh(),
                        F1::Sinh => a.sinh(),
                    };
                }
                _ => {
                    let b = st[sp - 1];
                    let a = st[sp - 2];
                    sp -= 1;
                    st[sp - 1] = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        Op::Pow => pow(a, b),
                        Op::Min => a.min(b),
                        Op::Max => a.max(b),
                        _ => unreachable!(),
                    };
                }
            }
        }
        st[0]
    }

    pub fn eval_u(&self, u: f64) -> f64 {
        self.eval(&Env::u(u))
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b == b.trunc() && b.abs() < 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn check_depth(code: &[Op]) -> Result<()> {
    let mut d: isize = 0;
    let mut max = 0;
    for op in code {
        d += match op {
            Op::Const(_) | Op::Load(_) => 1,
            Op::Neg | Op::Call(_) => 0,
            _ => -1,
        };
        max = max.max(d);
    }
    if max as usize > MAX_STACK {
        return Err(Error::Expr { pos: 0, msg: format!("expression nests deeper than {MAX_STACK}") });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let b: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == '.') {
                i += 1;
            }
            if i < b.len() && (b[i] == 'e' || b[i] == 'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == '+' || b[j] == '-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = b[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Expr { pos: start, msg: format!("bad number `{s}`") })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == '_') {
                i += 1;
            }
            out.push((Tok::Name(b[start..i].iter().collect()), start));
        } else if "+-*/^(),|".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else if c == '·' || c == '×' {
            out.push((Tok::Sym('*'), i));
            i += 1;
        } else if c == '−' {
            out.push((Tok::Sym('-'), i));
            i += 1;
        } else {
            return Err(Error::Expr { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    code: Vec<Op>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or_else(|| self.toks.last().map(|t| t.1 + 1).unwrap_or(0))
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr { pos: self.here(), msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<()> {
        self.term()?;
        loop {
            if self.eat('+') {
                self.term()?;
                self.code.push(Op::Add);
            } else if self.eat('-') {
                self.term()?;
                self.code.push(Op::Sub);
            } else {
                return Ok(());
            }
        }
    }

    fn term(&mut self) -> Result<()> {
        self.unary()?;
        loop {
            if self.eat('*') {
                self.unary()?;
                self.code.push(Op::Mul);
            } else if self.eat('/') {
                self.unary()?;
                self.code.push(Op::Div);
            } else {
                return Ok(());
            }
        }
    }

    fn unary(&mut self) -> Result<()> {
        if self.eat('-') {
            self.unary()?;
            self.code.push(Op::Neg);
            Ok(())
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<()> {
        self.atom()?;
        if self.eat('^') {
            self.unary()?;
            self.code.push(Op::Pow);
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<()> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => self.code.push(Op::Const(v)),
            Tok::Sym('(') => {
                self.expr()?;
                self.expect(')')?;
            }
            Tok::Sym('|') => {
                self.expr()?;
                self.expect('|')?;
                self.code.push(Op::Call(F1::Abs));
            }
            Tok::Name(name) => {
                if self.peek() == Some(&Tok::Sym('(')) {
                    self.pos += 1;
                    return self.call(&name);
                }
                let op = match name.as_str() {
                    "t" => Op::Load(Var::T),
                    "x" | "x1" => Op::Load(Var::X1),
                    "x2" => Op::Load(Var::X2),
                    "z" | "z1" => Op::Load(Var::Z1),
                    "z2" => Op::Load(Var::Z2),
                    "r" => Op::Load(Var::R),
                    "u" => Op::Load(Var::U),
                    "pi" => Op::Const(std::f64::consts::PI),
                    "e" => Op::Const(std::f64::consts::E),
                    _ => {
                        self.pos -= 1;
                        return self.err(format!("unknown name `{name}`"));
                    }
                };
                self.code.push(op);
            }
            Tok::Sym(c) => {
                self.pos -= 1;
                return self.err(format!("unexpected `{c}`"));
            }
        }
        Ok(())
    }

    fn call(&mut self, name: &str) -> Result<()> {
        let f1 = match name {
            "sin" => Some(F1::Sin),
            "cos" => Some(F1::Cos),
            "tan" => Some(F1::Tan),
            "exp" => Some(F1::Exp),
            "ln" | "log" => Some(F1::Ln),
            "sqrt" => Some(F1::Sqrt),
            "abs" => Some(F1::Abs),
            "tanh" => Some(F1::Tanh),
            "cosh" => Some(F1::Cosh),
            "sinh" => Some(F1::Sinh),
            _ => None,
        };
        if let Some(f) = f1 {
            self.expr()?;
            self.expect(')')?;
            self.code.push(Op::Call(f));
            return Ok(());
        }
        let op = match name {
            "min" => Op::Min,
            "max" => Op::Max,
            _ => return self.err(format!("unknown function `{name}`")),
        };
        self.expr()?;
        let mut n = 1;
        while self.eat(',') {
            self.expr()?;
            self.code.push(op);
            n += 1;
        }
        self.expect(')')?;
        if n < 2 {
            return self.err(format!("`{name}` needs at least two arguments"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(&Env::default())
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("2 ^ -1"), 0.5);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
    }

    #[test]
    fn functions_and_bars() {
        assert_eq!(ev("|1 - 3|"), 2.0);
        assert_eq!(ev("||1 - 3| - 5|"), 3.0);
        assert_eq!(ev("max(1, 4, 2)"), 4.0);
        assert_eq!(ev("min(3, -1)"), -1.0);
        assert!((ev("cos(pi)") + 1.0).abs() < 1e-15);
        assert!((ev("exp(1) - e")).abs() < 1e-15);
        assert_eq!(ev("1.5e2"), 150.0);
    }

    #[test]
    fn variables() {
        let e = Expr::parse("1 + 0.4*cos(x + z/2)*cos(r)").unwrap();
        let env = Env::txz(0.0, &[0.3], &[1.1]);
        let v = e.eval(&env);
        assert!((v - (1.0 + 0.4 * (0.3f64 + 0.55).cos() * 1.1f64.cos())).abs() < 1e-15);
        assert!(e.uses_x());
        assert!(!e.uses_t());
        let r = Expr::parse("r").unwrap();
        assert_eq!(r.eval(&Env::txz(0.0, &[0.0, 0.0], &[3.0, 4.0])), 5.0);
    }

    #[test]
    fn errors_carry_position() {
        match Expr::parse("1 + foo") {
            Err(Error::Expr { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("max(1)").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let e = Expr::parse("u^2/2").unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "\"u^2/2\"");
        let back: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(back.eval_u(3.0), 4.5);
    }
}
