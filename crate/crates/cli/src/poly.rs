//! Text syntax for polynomial operators.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' integer)?
//! atom  := number | number 'i' | 'i' | op | param | func '(' expr ')' | '(' expr ')'
//! op    := 'a'j | 'ad'j | 'q'j | 'p'j | 'n'j | 'id' | 'a' | 'ad' | 'b' | 'bd'
//! ```
//!
//! `a`/`ad` without an index act on mode 0 and `b`/`bd` on mode 1. `q` and `p`
//! are the quadratures `(a + ad)/sqrt 2` and `(a - ad)/(i sqrt 2)`, `n` is `ad*a`.
//! Products keep the written order; nothing is normal-ordered. Division and the
//! functions `sin`, `cos`, `exp`, `sqrt` only accept scalar operands, and `pi`
//! and named parameters are real scalars. The output of
//! [`certilind::PolyOperator`]'s `Display` is valid input.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use certilind::{PolyOperator, C64};

use crate::expr::{Cursor, Tok};

pub fn parse_poly(text: &str, modes: usize, params: &BTreeMap<String, f64>) -> Result<PolyOperator> {
    let mut p = PolyParser { cur: Cursor::new(text)?, modes, params };
    let e = p.expr()?;
    p.cur.finish()?;
    Ok(e)
}

/// The coefficient of a polynomial with no operator letters.
fn as_scalar(p: &PolyOperator) -> Option<C64> {
    match p.terms() {
        [] => Some(C64::new(0.0, 0.0)),
        [(c, w)] if w.is_empty() => Some(*c),
        _ => None,
    }
}

/// Reads `a3`, `ad0`, ... into (kind, mode).
fn operator_token(name: &str) -> Option<(&'static str, Option<usize>)> {
    for kind in ["ad", "a", "q", "p", "n"] {
        if let Some(rest) = name.strip_prefix(kind) {
            if rest.is_empty() {
                return (kind == "a" || kind == "ad").then_some((if kind == "a" { "a" } else { "ad" }, Some(0)));
            }
            if rest.chars().all(|c| c.is_ascii_digit()) && (rest == "0" || !rest.starts_with('0')) {
                let kind = match kind {
                    "ad" => "ad",
                    "a" => "a",
                    "q" => "q",
                    "p" => "p",
                    _ => "n",
                };
                return Some((kind, rest.parse().ok()));
            }
        }
    }
    match name {
        "b" => Some(("a", Some(1))),
        "bd" => Some(("ad", Some(1))),
        _ => None,
    }
}

struct PolyParser<'a> {
    cur: Cursor,
    modes: usize,
    params: &'a BTreeMap<String, f64>,
}

impl PolyParser<'_> {
    fn scalar(&self, c: C64) -> PolyOperator {
        PolyOperator::scalar(self.modes, c)
    }

    fn expr(&mut self) -> Result<PolyOperator> {
        let mut lhs = self.term()?;
        loop {
            if self.cur.eat('+') {
                lhs = &lhs + &self.term()?;
            } else if self.cur.eat('-') {
                lhs = &lhs - &self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<PolyOperator> {
        let mut lhs = self.unary()?;
        loop {
            if self.cur.eat('*') {
                lhs = &lhs * &self.unary()?;
            } else if self.cur.peek() == Some(&Tok::Sym('/')) {
                let col = self.cur.col();
                self.cur.next();
                let rhs = self.unary()?;
                let d = as_scalar(&rhs).ok_or_else(|| anyhow!("division by an operator at column {col}"))?;
                if d == C64::new(0.0, 0.0) {
                    bail!("division by zero at column {col}");
                }
                lhs = &lhs * (C64::new(1.0, 0.0) / d);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<PolyOperator> {
        if self.cur.eat('-') {
            return Ok(-&self.unary()?);
        }
        if self.cur.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if !self.cur.eat('^') {
            return Ok(base);
        }
        let col = self.cur.col();
        let n = match self.cur.next().map(|s| s.tok) {
            Some(Tok::Num { value, imag: false }) if value.fract() == 0.0 && (0.0..=64.0).contains(&value) => value as usize,
            Some(tok) => bail!("exponent '{tok}' at column {col} must be an integer between 0 and 64"),
            None => bail!("missing exponent at end of input"),
        };
        let mut out = PolyOperator::identity(self.modes);
        for _ in 0..n {
            out = &out * &base;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<PolyOperator> {
        let col = self.cur.col();
        match self.cur.peek().cloned() {
            Some(Tok::Num { value, imag }) => {
                self.cur.next();
                Ok(self.scalar(if imag { C64::new(0.0, value) } else { C64::new(value, 0.0) }))
            }
            Some(Tok::Sym('(')) => {
                self.cur.next();
                let e = self.expr()?;
                self.cur.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.cur.next();
                self.named(&name, col)
            }
            _ => Err(self.cur.unexpected("expected a number, operator or '('")),
        }
    }

    fn named(&mut self, name: &str, col: usize) -> Result<PolyOperator> {
        let m = self.modes;
        match name {
            "id" => return Ok(PolyOperator::identity(m)),
            "i" => return Ok(self.scalar(C64::new(0.0, 1.0))),
            "pi" => return Ok(self.scalar(C64::new(std::f64::consts::PI, 0.0))),
            "sin" | "cos" | "exp" | "sqrt" => {
                self.cur.expect('(')?;
                let arg = self.expr()?;
                self.cur.expect(')')?;
                let x = as_scalar(&arg)
                    .filter(|c| c.im == 0.0)
                    .ok_or_else(|| anyhow!("'{name}' at column {col} needs a real scalar argument"))?
                    .re;
                let v = match name {
                    "sin" => x.sin(),
                    "cos" => x.cos(),
                    "exp" => x.exp(),
                    _ => x.sqrt(),
                };
                return Ok(self.scalar(C64::new(v, 0.0)));
            }
            _ => {}
        }
        if let Some(v) = self.params.get(name) {
            return Ok(self.scalar(C64::new(*v, 0.0)));
        }
        let (kind, mode) = operator_token(name).ok_or_else(|| anyhow!("unknown token '{name}' at column {col}"))?;
        let j = mode.ok_or_else(|| anyhow!("mode index in '{name}' at column {col} is too large"))?;
        if j >= m {
            bail!("token '{name}' at column {col} refers to mode {j}, but the model has {m} mode(s)");
        }
        Ok(match kind {
            "a" => PolyOperator::a(m, j),
            "ad" => PolyOperator::ad(m, j),
            "q" => PolyOperator::q(m, j),
            "p" => PolyOperator::p(m, j),
            _ => PolyOperator::number(m, j),
        })
    }
}
