//! A small arithmetic language for user-declared coefficient fields,
//! operators and right-hand sides.
//!
//! Variables: `x`, `y` (point coordinates), `r` (Euclidean norm of the point),
//! `s` (the unknown), `xi` (gradient magnitude), plus any named parameter
//! bound at compile time. Functions: `lg`/`ln` (natural log), `exp`, `pow`,
//! `abs`, `sqrt`, `max`, `min`, `pos` (positive part). Operators: `+ - * / ^`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Values bound to the free variables at evaluation time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Vars {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub xi: f64,
}

impl Vars {
    pub fn new(point: [f64; 2], s: f64, xi: f64) -> Self {
        Vars { x: point[0], y: point[1], s, xi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    R,
    S,
    Xi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Ln,
    Exp,
    Pow,
    Abs,
    Sqrt,
    Max,
    Min,
    Pos,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "lg" | "ln" => (Func::Ln, 1),
            "exp" => (Func::Exp, 1),
            "pow" => (Func::Pow, 2),
            "abs" => (Func::Abs, 1),
            "sqrt" => (Func::Sqrt, 1),
            "max" => (Func::Max, 2),
            "min" => (Func::Min, 2),
            "pos" => (Func::Pos, 1),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, v: &Vars) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(Var::X) => v.x,
            Node::Var(Var::Y) => v.y,
            Node::Var(Var::R) => v.x.hypot(v.y),
            Node::Var(Var::S) => v.s,
            Node::Var(Var::Xi) => v.xi,
            Node::Neg(a) => -a.eval(v),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(v), b.eval(v));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Node::Call(f, args) => {
                let a = args[0].eval(v);
                match f {
                    Func::Ln => a.ln(),
                    Func::Exp => a.exp(),
                    Func::Pow => a.powf(args[1].eval(v)),
                    Func::Abs => a.abs(),
                    Func::Sqrt => a.sqrt(),
                    Func::Max => a.max(args[1].eval(v)),
                    Func::Min => a.min(args[1].eval(v)),
                    Func::Pos => a.max(0.0),
                }
            }
        }
    }

    fn uses(&self, var: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == var || (var != Var::R && *w == Var::R && matches!(var, Var::X | Var::Y)),
            Node::Neg(a) => a.uses(var),
            Node::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Node::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }
}

/// A compiled expression. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.root == other.root
    }
}

impl Expr {
    /// Parses `source`, substituting the named parameters as constants.
    pub fn parse(source: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, params };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!("unexpected `{}` at offset {}", p.tokens[p.pos].1, p.tokens[p.pos].0)));
        }
        Ok(Expr { source: source.to_string(), root: Arc::new(root) })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, v: &Vars) -> f64 {
        self.root.eval(v)
    }

    /// Whether the value can depend on the unknown `s`.
    pub fn uses_s(&self) -> bool {
        self.root.uses(Var::S)
    }

    /// Whether the value can depend on the gradient magnitude.
    pub fn uses_xi(&self) -> bool {
        self.root.uses(Var::Xi)
    }

    /// Whether the value can depend on the point.
    pub fn uses_x(&self) -> bool {
        self.root.uses(Var::X) || self.root.uses(Var::Y)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(c) => write!(f, "{c}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Sym(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Expr(format!("bad number `{text}` at offset {start}")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}` at offset {i}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or_else(|| self.tokens.last().map_or(0, |t| t.0 + 1), |t| t.0)
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
            Err(Error::Expr(format!("expected `{c}` at offset {}", self.offset())))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c)) if *c == '+' || *c == '-' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c)) if *c == '*' || *c == '/' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let at = self.offset();
        let tok = self.tokens.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        match tok {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::Sym('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::Sym('(')) {
                    self.pos += 1;
                    let (f, arity) = Func::lookup(&name).ok_or_else(|| Error::Expr(format!("unknown function `{name}` at offset {at}")))?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Expr(format!("`{name}` takes {arity} argument(s), got {} at offset {at}", args.len())));
                    }
                    return Ok(Node::Call(f, args));
                }
                Ok(match name.as_str() {
                    "x" => Node::Var(Var::X),
                    "y" => Node::Var(Var::Y),
                    "r" => Node::Var(Var::R),
                    "s" => Node::Var(Var::S),
                    "xi" => Node::Var(Var::Xi),
                    "pi" => Node::Num(std::f64::consts::PI),
                    _ => match self.params.get(&name) {
                        Some(v) => Node::Num(*v),
                        None => return Err(Error::Expr(format!("unknown identifier `{name}` at offset {at}"))),
                    },
                })
            }
            Some(t) => Err(Error::Expr(format!("unexpected `{t}` at offset {at}"))),
            None => Err(Error::Expr(format!("unexpected end of input at offset {at}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, v: Vars) -> f64 {
        Expr::parse(src, &BTreeMap::new()).unwrap().eval(&v)
    }

    #[test]
    fn precedence_and_associativity() {
        let v = Vars::default();
        assert_eq!(eval("1 + 2 * 3", v), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", v), 512.0);
        assert_eq!(eval("-2 ^ 2", v), -4.0);
        assert_eq!(eval("(1 + 2) * 3 - 4 / 2", v), 7.0);
        assert_eq!(eval("2 * -3", v), -6.0);
        assert_eq!(eval("1.5e2 + .5", v), 150.5);
    }

    #[test]
    fn variables_functions_and_params() {
        let mut params = BTreeMap::new();
        params.insert("p".to_string(), 3.0);
        let e = Expr::parse("pow(xi, p - 2) * lg(1 + xi) + max(s, 0) + r", &params).unwrap();
        let v = Vars::new([3.0, 4.0], -1.0, 2.0);
        let want = 2.0 * 3f64.ln() + 0.0 + 5.0;
        assert!((e.eval(&v) - want).abs() < 1e-15);
        assert!(e.uses_xi() && e.uses_s() && e.uses_x());
        assert_eq!(eval("pos(-3) + abs(-2) + sqrt(9) + min(1, 2) + exp(0)", v), 7.0);
    }

    #[test]
    fn errors_name_the_offset() {
        let p = BTreeMap::new();
        assert!(matches!(Expr::parse("1 +", &p), Err(Error::Expr(_))));
        assert!(matches!(Expr::parse("foo(1)", &p), Err(Error::Expr(m)) if m.contains("foo")));
        assert!(matches!(Expr::parse("q * 2", &p), Err(Error::Expr(m)) if m.contains("`q`")));
        assert!(matches!(Expr::parse("pow(1)", &p), Err(Error::Expr(_))));
        assert!(matches!(Expr::parse("1 $ 2", &p), Err(Error::Expr(_))));
        assert!(matches!(Expr::parse("(1", &p), Err(Error::Expr(_))));
    }
}
