//! A small arithmetic language for exponent fields and profiles.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] number)?
//! atom   := number | 'x' | 'y' | 'r' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! func   := 'min' | 'max' | 'abs'
//! ```
//!
//! `r` is the Euclidean distance to a centre fixed when the expression is
//! bound to a [`Formula`].

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{distance, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Pow(Box<Expr>, f64),
}

/// Variable bindings used during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Vars {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Expr {
    pub fn eval(&self, v: &Vars) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => v.x,
            Expr::Var(Var::Y) => v.y,
            Expr::Var(Var::R) => v.r,
            Expr::Neg(e) => -e.eval(v),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(v), b.eval(v));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(Func::Abs, args) => args[0].eval(v).abs(),
            Expr::Call(Func::Min, args) => args
                .iter()
                .map(|a| a.eval(v))
                .fold(f64::INFINITY, f64::min),
            Expr::Call(Func::Max, args) => args
                .iter()
                .map(|a| a.eval(v))
                .fold(f64::NEG_INFINITY, f64::max),
            Expr::Pow(base, e) => pow(base.eval(v), *e),
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == var,
            Expr::Neg(e) | Expr::Pow(e, _) => e.uses(var),
            Expr::Binary(_, a, b) => a.uses(var) || b.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }

    /// Smallest absolute value taken by any divisor in the tree at `v`.
    pub fn min_abs_divisor(&self, v: &Vars) -> f64 {
        match self {
            Expr::Const(_) | Expr::Var(_) => f64::INFINITY,
            Expr::Neg(e) => e.min_abs_divisor(v),
            Expr::Pow(e, k) => {
                let inner = e.min_abs_divisor(v);
                if *k < 0.0 {
                    inner.min(e.eval(v).abs())
                } else {
                    inner
                }
            }
            Expr::Binary(op, a, b) => {
                let m = a.min_abs_divisor(v).min(b.min_abs_divisor(v));
                if *op == BinOp::Div {
                    m.min(b.eval(v).abs())
                } else {
                    m
                }
            }
            Expr::Call(_, args) => args
                .iter()
                .map(|a| a.min_abs_divisor(v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn pow(base: f64, e: f64) -> f64 {
    if e == 2.0 {
        base * base
    } else if e.fract() == 0.0 && e.abs() <= 64.0 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

fn fmt_number(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // Debug prints the shortest round-tripping form
    write!(f, "{c:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(*c, f),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::R) => f.write_str("r"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Pow(base, e) => {
                write!(f, "({base} ^ ")?;
                fmt_number(*e, f)?;
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if b.is_ascii_digit() || b == b'.' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(value), start));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        if "+-*/^(),".contains(b as char) {
            self.pos += 1;
            return Ok((Tok::Sym(b as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next()?;
        Ok(Parser { lexer, tok, offset })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.tok == Tok::Sym(c) {
            self.bump()
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Sym('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump()?;
        let negative = if self.tok == Tok::Sym('-') {
            self.bump()?;
            true
        } else {
            false
        };
        match self.tok {
            Tok::Num(e) => {
                self.bump()?;
                Ok(Expr::Pow(Box::new(base), if negative { -e } else { e }))
            }
            _ => self.error("exponent must be a numeric constant"),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(c) => {
                self.bump()?;
                Ok(Expr::Const(c))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let offset = self.offset;
                self.bump()?;
                let func = match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    "r" => return Ok(Expr::Var(Var::R)),
                    "min" => Func::Min,
                    "max" => Func::Max,
                    "abs" => Func::Abs,
                    _ => return Err(ParseError::UnknownIdentifier { name, offset }),
                };
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.tok == Tok::Sym(',') {
                    self.bump()?;
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                let arity_ok = match func {
                    Func::Abs => args.len() == 1,
                    Func::Min | Func::Max => args.len() >= 2,
                };
                if !arity_ok {
                    return Err(ParseError::Syntax {
                        offset,
                        message: format!("wrong number of arguments to `{}`", func.name()),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Sym(c) => self.error(format!("unexpected `{c}`")),
        }
    }
}

/// Parses an expression; the whole input must be consumed.
pub fn parse_exponent(source: &str) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser::new(source)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}

type FieldFn = dyn Fn(Point) -> f64 + Send + Sync;

/// A scalar function of position: either a parsed expression bound to a
/// centre, or an arbitrary closure supplied through the library API.
#[derive(Clone)]
pub struct Formula {
    label: String,
    expr: Option<Expr>,
    center: Point,
    func: Arc<FieldFn>,
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Formula").field("label", &self.label).finish()
    }
}

impl Formula {
    pub fn parse(source: &str, center: Point) -> Result<Self, ParseError> {
        let expr = parse_exponent(source)?;
        Ok(Self::from_expr(expr, center))
    }

    pub fn from_expr(expr: Expr, center: Point) -> Self {
        let label = expr.to_string();
        let e = expr.clone();
        Formula {
            label,
            expr: Some(expr),
            center,
            func: Arc::new(move |x: Point| {
                e.eval(&Vars {
                    x: x[0],
                    y: x[1],
                    r: distance(x, center),
                })
            }),
        }
    }

    pub fn constant(c: f64) -> Self {
        Formula {
            label: format!("{c:?}"),
            expr: Some(Expr::Const(c)),
            center: [0.0, 0.0],
            func: Arc::new(move |_| c),
        }
    }

    pub fn from_fn(label: impl Into<String>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Formula {
            label: label.into(),
            expr: None,
            center: [0.0, 0.0],
            func: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    pub fn eval(&self, x: Point) -> f64 {
        (self.func)(x)
    }

    /// Smallest `|divisor|` met while evaluating at `x` (`∞` for closures).
    pub fn divisor_margin(&self, x: Point) -> f64 {
        match &self.expr {
            Some(e) => e.min_abs_divisor(&Vars {
                x: x[0],
                y: x[1],
                r: distance(x, self.center),
            }),
            None => f64::INFINITY,
        }
    }

    /// `x ↦ self(center + scale·x)`.
    pub fn rescaled(&self, center: Point, scale: f64) -> Formula {
        let f = Arc::clone(&self.func);
        Formula::from_fn(
            format!("{}∘({scale:?}·x + {center:?})", self.label),
            move |x| f([center[0] + scale * x[0], center[1] + scale * x[1]]),
        )
    }

    /// `x ↦ self(x) + shift`.
    pub fn shifted(&self, shift: f64) -> Formula {
        let f = Arc::clone(&self.func);
        Formula::from_fn(format!("{} + {shift:?}", self.label), move |x| f(x) + shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(e: &Expr, x: f64, y: f64, r: f64) -> f64 {
        e.eval(&Vars { x, y, r })
    }

    #[test]
    fn constant() {
        assert_eq!(parse_exponent("2").unwrap(), Expr::Const(2.0));
    }

    #[test]
    fn affine() {
        let e = parse_exponent("2 + 0.5*x").unwrap();
        assert_eq!(at(&e, 1.0, 0.0, 0.0), 2.5);
    }

    #[test]
    fn piecewise_with_radius() {
        let f = Formula::parse("max(1.2, 3 - r)", [0.0, 0.0]).unwrap();
        assert_eq!(f.eval([0.0, 0.0]), 3.0);
        assert_eq!(f.eval([1.8, 0.0]), 1.2);
        assert_eq!(f.eval([0.0, 2.5]), 1.2);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_exponent("1 + 2 * 3 - 4 / 2").unwrap();
        assert_eq!(at(&e, 0.0, 0.0, 0.0), 5.0);
        let e = parse_exponent("-x^2").unwrap();
        assert_eq!(at(&e, 3.0, 0.0, 0.0), -9.0);
        let e = parse_exponent("(1 + x)^-1").unwrap();
        assert_eq!(at(&e, 1.0, 0.0, 0.0), 0.5);
        let e = parse_exponent("abs(x - y) * 2e-1").unwrap();
        assert!((at(&e, 1.0, 3.0, 0.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_exponent("2 + * x") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse_exponent("2 + sin(x)") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "sin");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_exponent("").is_err());
        assert!(parse_exponent("(1 + x").is_err());
        assert!(parse_exponent("x ^ y").is_err());
        assert!(parse_exponent("max(1)").is_err());
        assert!(parse_exponent("2 $").is_err());
    }

    #[test]
    fn divisor_scan() {
        let e = parse_exponent("1 / (x - 0.5)").unwrap();
        let v = Vars { x: 0.5, y: 0.0, r: 0.0 };
        assert_eq!(e.min_abs_divisor(&v), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0.0f64..1e3).prop_map(Expr::Const),
                Just(Expr::Var(Var::X)),
                Just(Expr::Var(Var::Y)),
                Just(Expr::Var(Var::R)),
            ];
            leaf.prop_recursive(5, 48, 3, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (
                        prop_oneof![
                            Just(BinOp::Add),
                            Just(BinOp::Sub),
                            Just(BinOp::Mul),
                            Just(BinOp::Div)
                        ],
                        inner.clone(),
                        inner.clone()
                    )
                        .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
                    inner.clone().prop_map(|e| Expr::Call(Func::Abs, vec![e])),
                    proptest::collection::vec(inner.clone(), 2..4)
                        .prop_map(|v| Expr::Call(Func::Max, v)),
                    proptest::collection::vec(inner.clone(), 2..4)
                        .prop_map(|v| Expr::Call(Func::Min, v)),
                    (inner, -4.0f64..4.0).prop_map(|(e, k)| Expr::Pow(Box::new(e), k)),
                ]
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn print_parse_round_trip(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse_exponent(&printed).unwrap();
                prop_assert_eq!(&reparsed, &e);
                prop_assert_eq!(reparsed.to_string(), printed);
            }
        }
    }
}
