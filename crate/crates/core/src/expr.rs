//! Scalar-field expressions `F(x, y)` over chart coordinates.
//!
//! Grammar:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | factor
//! factor   := base ('^' rational)?
//! base     := number | ident | func '(' expr ')' | '(' expr ')'
//! rational := ['-'] int ['/' int] | '(' ['-'] int ['/' int] ')'
//! func     := sqrt | exp | log | sin | cos
//! ident    := [xy][0-9]+          (1-based, index <= dimension)
//! ```
//!
//! Exponents are constant rationals; a variable power has to be spelled
//! `exp(q*log(b))`.

use std::fmt;

use thiserror::Error;

use crate::scalar::{DomainError, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at byte {offset} out of range for dimension {dimension}")]
    VariableOutOfRange {
        name: String,
        offset: usize,
        dimension: usize,
    },
    #[error("assignment has length {got}, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Position coordinate, 0-based internally.
    X(usize),
    /// Direction coordinate, 0-based internally.
    Y(usize),
}

impl Var {
    /// Slot in the `(x1..xn, y1..yn)` assignment vector.
    pub fn slot(self, dimension: usize) -> usize {
        match self {
            Var::X(i) => i,
            Var::Y(i) => dimension + i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Reduced rational exponent, `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational {
            num: s * num / g.max(1),
            den: s * den / g.max(1),
        })
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.num < 0, self.den == 1) {
            (false, true) => write!(f, "{}", self.num),
            (true, true) => write!(f, "({})", self.num),
            _ => write!(f, "({}/{})", self.num, self.den),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
}

impl Expr {
    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 0,
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) | Expr::Func(_, a) | Expr::Pow(a, _) => a.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn eval<S: Scalar>(&self, vars: &[S], dimension: usize) -> Result<S, DomainError> {
        Ok(match self {
            Expr::Const(c) => vars[0].constant_like(*c),
            Expr::Var(v) => vars[v.slot(dimension)].clone(),
            Expr::Neg(a) => a.eval(vars, dimension)?.neg(),
            Expr::Func(func, a) => {
                let a = a.eval(vars, dimension)?;
                match func {
                    Func::Sqrt => a.sqrt()?,
                    Func::Exp => a.exp(),
                    Func::Log => a.ln()?,
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.eval(vars, dimension)?;
                let b = b.eval(vars, dimension)?;
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b)?,
                }
            }
            Expr::Pow(a, r) => {
                let a = a.eval(vars, dimension)?;
                if r.is_integer() {
                    a.powi(r.num)?
                } else {
                    a.pow_rational(r.num, r.den)?
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    /// Prints text that re-parses to a structurally equal tree (for trees
    /// with non-negative constants, which is all the parser produces).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Y(i)) => write!(f, "y{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, a.precedence() < 3)
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, " * "),
                    BinOp::Div => (2, " / "),
                };
                wrap(f, a, a.precedence() < p || a.precedence() == 3)?;
                write!(f, "{sym}")?;
                wrap(f, b, b.precedence() <= p || b.precedence() == 3)
            }
            Expr::Pow(a, r) => {
                wrap(f, a, a.precedence() < 5)?;
                write!(f, "^{r}")
            }
        }
    }
}

/// A parsed expression together with the dimension it was checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    dimension: usize,
    root: Expr,
}

impl Expression {
    pub fn parse(source: &str, dimension: usize) -> Result<Expression, ExprError> {
        if dimension == 0 {
            return Err(ExprError::Syntax {
                offset: 0,
                message: "dimension must be positive".into(),
            });
        }
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            dimension,
            end: source.len(),
        };
        let root = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(ExprError::Syntax {
                offset: t.offset,
                message: format!("unexpected {}", t.kind.describe()),
            });
        }
        Ok(Expression { dimension, root })
    }

    /// Wraps an already built tree; fails if a variable exceeds `dimension`.
    pub fn from_tree(root: Expr, dimension: usize) -> Result<Expression, ExprError> {
        let mut bad = None;
        root.visit_vars(&mut |v| {
            let i = match v {
                Var::X(i) | Var::Y(i) => i,
            };
            if i >= dimension && bad.is_none() {
                bad = Some(v);
            }
        });
        if let Some(v) = bad {
            let name = Expr::Var(v).to_string();
            return Err(ExprError::VariableOutOfRange {
                name,
                offset: 0,
                dimension,
            });
        }
        Ok(Expression { dimension, root })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Distinct variables, in order of first appearance.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.root.visit_vars(&mut |v| {
            if !out.contains(&v) {
                out.push(v)
            }
        });
        out
    }

    /// True when no `x` variable occurs.
    pub fn is_position_independent(&self) -> bool {
        self.variables().iter().all(|v| matches!(v, Var::Y(_)))
    }

    /// Evaluates at an assignment ordered `(x1..xn, y1..yn)`.
    pub fn evaluate(&self, assignment: &[f64]) -> Result<f64, ExprError> {
        self.evaluate_with(assignment)
    }

    /// Evaluates over any [`Scalar`] type.
    pub fn evaluate_with<S: Scalar>(&self, assignment: &[S]) -> Result<S, ExprError> {
        if assignment.len() != 2 * self.dimension {
            return Err(ExprError::Arity {
                expected: 2 * self.dimension,
                got: assignment.len(),
            });
        }
        Ok(self.root.eval(assignment, self.dimension)?)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64, bool),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v, _) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Caret => "`^`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(TokenKind::Plus),
            b'-' => Some(TokenKind::Minus),
            b'*' => Some(TokenKind::Star),
            b'/' => Some(TokenKind::Slash),
            b'^' => Some(TokenKind::Caret),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            _ => None,
        };
        if let Some(kind) = single {
            out.push(Token {
                kind,
                offset: start,
            });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut integral = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                integral = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Number(v, integral),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(ExprError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ExprError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {}", kind.describe())))
        }
    }

    fn unexpected(&self, what: &str) -> ExprError {
        let found = self
            .peek()
            .map_or("end of input".to_string(), |t| t.kind.describe());
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("{what}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(&TokenKind::Plus) {
                BinOp::Add
            } else if self.eat(&TokenKind::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(&TokenKind::Star) {
                BinOp::Mul
            } else if self.eat(&TokenKind::Slash) {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.base()?;
        if self.eat(&TokenKind::Caret) {
            let r = self.rational()?;
            return Ok(Expr::Pow(Box::new(base), r));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, ExprError> {
        match self.peek().map(|t| t.kind.clone()) {
            Some(TokenKind::Number(v, true)) if v.abs() < 1e15 => {
                self.pos += 1;
                Ok(v as i64)
            }
            _ => Err(self.unexpected("exponent must be a constant rational")),
        }
    }

    fn rational(&mut self) -> Result<Rational, ExprError> {
        let paren = self.eat(&TokenKind::LParen);
        let start = self.offset();
        let sign = if self.eat(&TokenKind::Minus) { -1 } else { 1 };
        let num = self.integer()?;
        let den = if self.eat(&TokenKind::Slash) {
            self.integer()?
        } else {
            1
        };
        if paren {
            self.expect(TokenKind::RParen)?;
        }
        Rational::new(sign * num, den).ok_or(ExprError::Syntax {
            offset: start,
            message: "zero denominator in exponent".into(),
        })
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("expected operand"));
        };
        match tok.kind {
            TokenKind::Number(v, _) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(TokenKind::LParen)?;
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                self.variable(&name, tok.offset).map(Expr::Var)
            }
            _ => Err(self.unexpected("expected operand")),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Var, ExprError> {
        let unknown = || ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset,
        };
        let (head, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if index == 0 || index > self.dimension {
            return Err(ExprError::VariableOutOfRange {
                name: name.to_string(),
                offset,
                dimension: self.dimension,
            });
        }
        match head {
            "x" => Ok(Var::X(index - 1)),
            "y" => Ok(Var::Y(index - 1)),
            _ => Err(unknown()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_euclidean_norm() {
        let e = Expression::parse("sqrt(y1^2 + y2^2)", 2).unwrap();
        assert_eq!(e.variables().len(), 2);
        assert_eq!(e.depth(), 3);
    }

    #[test]
    fn parses_half_plane_metric() {
        let e = Expression::parse("sqrt(y1^2+y2^2)/x2", 2).unwrap();
        assert_eq!(e.variables(), vec![Var::Y(0), Var::Y(1), Var::X(1)]);
        assert!(!e.is_position_independent());
    }

    #[test]
    fn unknown_identifier() {
        let err = Expression::parse("sqrt(z1)", 2).unwrap_err();
        assert_eq!(
            err,
            ExprError::UnknownIdentifier {
                name: "z1".into(),
                offset: 5
            }
        );
        assert!(matches!(
            Expression::parse("tan(y1)", 2),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn out_of_range_and_syntax_errors() {
        assert!(matches!(
            Expression::parse("y3", 2),
            Err(ExprError::VariableOutOfRange { offset: 0, .. })
        ));
        assert!(matches!(
            Expression::parse("x0 + y1", 2),
            Err(ExprError::VariableOutOfRange { .. })
        ));
        match Expression::parse("y1 + * y2", 2) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Expression::parse("(y1", 2),
            Err(ExprError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            Expression::parse("y1^y2", 2),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(
            Expression::parse("y1^0.5", 2),
            Err(ExprError::Syntax { .. })
        ));
    }

    #[test]
    fn rational_exponents() {
        let e = Expression::parse("y1^(1/2) + y2^-1 + y1^(-3/2)", 1).err();
        assert!(e.is_some(), "y2 exceeds dimension 1");
        let e = Expression::parse("y1^(2/4) + y1^-1 + y1^(-3/2)", 1).unwrap();
        let v = e.evaluate(&[0.0, 4.0]).unwrap();
        assert!((v - (2.0 + 0.25 + 0.125)).abs() < 1e-15);
        assert!(e.to_string().contains("^(1/2)"));
    }

    #[test]
    fn evaluates_examples() {
        let e = Expression::parse("sqrt(y1^2+y2^2)", 2).unwrap();
        assert_eq!(e.evaluate(&[0.0, 0.0, 3.0, 4.0]).unwrap(), 5.0);
        let h = Expression::parse("sqrt(y1^2+y2^2)/x2", 2).unwrap();
        assert_eq!(h.evaluate(&[0.0, 2.0, 0.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn domain_errors() {
        let e = Expression::parse("log(y1)", 1).unwrap();
        assert!(matches!(
            e.evaluate(&[0.0, -1.0]),
            Err(ExprError::Domain(DomainError::LogNonPositive(_)))
        ));
        let e = Expression::parse("sqrt(y1)", 1).unwrap();
        assert!(matches!(
            e.evaluate(&[0.0, -1.0]),
            Err(ExprError::Domain(DomainError::SqrtNegative(_)))
        ));
        let e = Expression::parse("1/x1", 1).unwrap();
        assert!(matches!(
            e.evaluate(&[0.0, 1.0]),
            Err(ExprError::Domain(DomainError::DivisionByZero))
        ));
        assert!(matches!(
            e.evaluate(&[1.0]),
            Err(ExprError::Arity { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = Expression::parse("-y1^2", 1).unwrap();
        assert_eq!(e.evaluate(&[0.0, 3.0]).unwrap(), -9.0);
        let e = Expression::parse("2 - -y1 * 3", 1).unwrap();
        assert_eq!(e.evaluate(&[0.0, 1.0]).unwrap(), 5.0);
    }

    #[test]
    fn printing_respects_associativity() {
        for src in [
            "y1 - (y2 - x1)",
            "y1 / (y2 * x1)",
            "(y1 - y2) - x1",
            "-(y1 + y2)^2",
            "(-y1)^2",
            "y1 * -y2",
            "1e-7 * y1 + 2.5e10",
            "exp((1/3) * log(y1^2 + y2^2))",
        ] {
            let a = Expression::parse(src, 2).unwrap();
            let b = Expression::parse(&a.to_string(), 2).unwrap();
            assert_eq!(a, b, "{src} printed as {a}");
        }
    }
}
