//! Tokens shared by the model-file grammars and the scalar coefficient language.
//!
//! Scalar expressions (coefficients, parameter values, numeric fields) use
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 't' | 'pi' | param | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | exp | sqrt | step
//! ```
//!
//! `step(x)` is 1 for `x >= 0` and 0 otherwise, so piecewise-constant tables are
//! written as sums such as `1.5 - 1.5*step(t - 2)`.

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Real literal; `imag` marks a trailing `i` as in `0.5i`.
    Num { value: f64, imag: bool },
    Ident(String),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num { value, imag } => write!(f, "{value}{}", if *imag { "i" } else { "" }),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(c) => write!(f, "{c}"),
        }
    }
}

/// Token with its 1-based column in the source text.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub col: usize,
}

pub(crate) fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let value: f64 = s.parse().map_err(|_| anyhow!("malformed number '{s}' at column {col}"))?;
            let imag = chars.get(i) == Some(&'i') && !chars.get(i + 1).is_some_and(|d| d.is_alphanumeric() || *d == '_');
            if imag {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Num { value, imag }, col });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), col });
        } else if "+-*/^(),".contains(c) {
            out.push(Spanned { tok: Tok::Sym(c), col });
            i += 1;
        } else {
            bail!("unexpected character '{c}' at column {col}");
        }
    }
    Ok(out)
}

/// Cursor over a token list.
pub(crate) struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    end_col: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self> {
        Ok(Cursor { toks: lex(text)?, pos: 0, end_col: text.chars().count() + 1 })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    pub fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |s| s.col)
    }

    pub fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    pub fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected '{c}'")))
        }
    }

    pub fn unexpected(&self, what: &str) -> anyhow::Error {
        match self.toks.get(self.pos) {
            Some(s) => anyhow!("{what}, found '{}' at column {}", s.tok, s.col),
            None => anyhow!("{what}, found end of input"),
        }
    }

    pub fn finish(&self) -> Result<()> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(s) => bail!("unexpected token '{}' at column {}", s.tok, s.col),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Step,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "step" => Func::Step,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
            Func::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    T,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::T => t,
            Node::Neg(a) => -a.eval(t),
            Node::Bin(op, a, b) => {
                let (x, y) = (a.eval(t), b.eval(t));
                match op {
                    '+' => x + y,
                    '-' => x - y,
                    '*' => x * y,
                    '/' => x / y,
                    _ => x.powf(y),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(t)),
        }
    }

    fn uses_t(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::T => true,
            Node::Neg(a) | Node::Call(_, a) => a.uses_t(),
            Node::Bin(_, a, b) => a.uses_t() || b.uses_t(),
        }
    }
}

/// Compiled real expression, optionally depending on time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    text: String,
    root: Node,
}

impl ScalarExpr {
    /// Parses `text`; parameter names are replaced by their values, and `t` is
    /// accepted only when `allow_t` is set.
    pub fn parse(text: &str, params: &BTreeMap<String, f64>, allow_t: bool) -> Result<Self> {
        let mut p = Parser { cur: Cursor::new(text)?, params, allow_t };
        let root = p.expr()?;
        p.cur.finish()?;
        Ok(ScalarExpr { text: text.to_string(), root })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.root.eval(t)
    }

    pub fn is_constant(&self) -> bool {
        !self.root.uses_t()
    }
}

/// Evaluates a time-independent expression.
pub fn eval_constant(text: &str, params: &BTreeMap<String, f64>) -> Result<f64> {
    let e = ScalarExpr::parse(text, params, false)?;
    let v = e.eval(0.0);
    if !v.is_finite() {
        bail!("expression '{text}' is not finite");
    }
    Ok(v)
}

struct Parser<'a> {
    cur: Cursor,
    params: &'a BTreeMap<String, f64>,
    allow_t: bool,
}

impl Parser<'_> {
    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.cur.peek() {
                Some(Tok::Sym(c @ ('+' | '-'))) => *c,
                _ => return Ok(lhs),
            };
            self.cur.next();
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur.peek() {
                Some(Tok::Sym(c @ ('*' | '/'))) => *c,
                _ => return Ok(lhs),
            };
            self.cur.next();
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.cur.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.cur.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.cur.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let col = self.cur.col();
        match self.cur.peek().cloned() {
            Some(Tok::Num { imag: true, .. }) => {
                bail!("imaginary literal at column {col} is not allowed in a real expression")
            }
            Some(Tok::Num { value, .. }) => {
                self.cur.next();
                Ok(Node::Num(value))
            }
            Some(Tok::Sym('(')) => {
                self.cur.next();
                let e = self.expr()?;
                self.cur.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.cur.next();
                if let Some(f) = Func::lookup(&name) {
                    self.cur.expect('(')?;
                    let arg = self.expr()?;
                    self.cur.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if name == "t" {
                    if !self.allow_t {
                        bail!("'t' at column {col} is not allowed here (time-independent expression)");
                    }
                    return Ok(Node::T);
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                match self.params.get(&name) {
                    Some(v) => Ok(Node::Num(*v)),
                    None => bail!("unknown name '{name}' at column {col}"),
                }
            }
            _ => Err(self.cur.unexpected("expected a number, name or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn precedence_and_functions() {
        let p: BTreeMap<String, f64> = [("alpha".to_string(), 1.5)].into();
        let e = ScalarExpr::parse("-alpha^2 + 2*sin(t)/4", &p, true).unwrap();
        let t = 0.3f64;
        assert!((e.eval(t) - (-2.25 + 0.5 * t.sin())).abs() < 1e-15);
        assert!(!e.is_constant());
        assert_eq!(eval_constant("2*sqrt(pi)", &none()).unwrap(), 2.0 * std::f64::consts::PI.sqrt());
        assert_eq!(eval_constant("2^3^2", &none()).unwrap(), 512.0);
    }

    #[test]
    fn step_builds_piecewise_tables() {
        let e = ScalarExpr::parse("1.5 - 1.5*step(t - 2)", &none(), true).unwrap();
        assert_eq!(e.eval(1.999), 1.5);
        assert_eq!(e.eval(2.0), 0.0);
    }

    #[test]
    fn errors_name_the_token() {
        let err = ScalarExpr::parse("1 + beta", &none(), true).unwrap_err().to_string();
        assert!(err.contains("'beta'"), "{err}");
        let err = eval_constant("sin(t)", &none()).unwrap_err().to_string();
        assert!(err.contains("'t'"), "{err}");
        assert!(ScalarExpr::parse("1 +", &none(), true).is_err());
        assert!(ScalarExpr::parse("(1", &none(), true).is_err());
        assert!(ScalarExpr::parse("1 $ 2", &none(), true).is_err());
    }

    #[test]
    fn lexer_reads_exponents_and_imaginary_suffix() {
        let toks: Vec<Tok> = lex("1.5e-3 2i 3e").unwrap().into_iter().map(|s| s.tok).collect();
        assert_eq!(toks[0], Tok::Num { value: 1.5e-3, imag: false });
        assert_eq!(toks[1], Tok::Num { value: 2.0, imag: true });
        assert_eq!(toks[2], Tok::Num { value: 3.0, imag: false });
        assert_eq!(toks[3], Tok::Ident("e".into()));
    }
}
