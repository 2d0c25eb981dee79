//! Human-readable infix export with light algebraic simplification, and the
//! matching parser.
//!
//! Printing keeps the tree structure: parentheses are only dropped where the
//! grammar below re-creates the same nesting, so `parse_infix(to_infix(t))`
//! evaluates bit-for-bit like `simplify(t)` when constants are printed at
//! full precision.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary ('*' unary)*
//! unary := '-' unary | primary
//! primary := number | 'x' digits | ('cos' | 'plog') '(' expr ')' | '(' expr ')'
//! ```
//! A leading `-` on a number literal yields a negative constant; on anything
//! else it yields `0 - operand`.

use super::{Op, Symbol, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Var(usize),
    Const(f64),
    Un(Op, Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    fn from_prefix(nodes: &[Symbol], at: &mut usize) -> Expr {
        let s = nodes[*at];
        *at += 1;
        match s {
            Symbol::Var(j) => Expr::Var(j),
            Symbol::Const(c) => Expr::Const(c),
            Symbol::Op(op) if op.arity() == 1 => Expr::Un(op, Box::new(Expr::from_prefix(nodes, at))),
            Symbol::Op(op) => {
                let l = Expr::from_prefix(nodes, at);
                let r = Expr::from_prefix(nodes, at);
                Expr::Bin(op, Box::new(l), Box::new(r))
            }
        }
    }

    fn to_prefix(&self, out: &mut Vec<Symbol>) {
        match self {
            Expr::Var(j) => out.push(Symbol::Var(*j)),
            Expr::Const(c) => out.push(Symbol::Const(*c)),
            Expr::Un(op, a) => {
                out.push(Symbol::Op(*op));
                a.to_prefix(out);
            }
            Expr::Bin(op, l, r) => {
                out.push(Symbol::Op(*op));
                l.to_prefix(out);
                r.to_prefix(out);
            }
        }
    }

    fn is_const(&self, v: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == v)
    }

    fn simplified(self) -> Expr {
        match self {
            Expr::Un(op, a) => match a.simplified() {
                Expr::Const(c) => Expr::Const(op.apply1(c)),
                a => Expr::Un(op, Box::new(a)),
            },
            Expr::Bin(op, l, r) => {
                let l = l.simplified();
                let r = r.simplified();
                if let (Expr::Const(a), Expr::Const(b)) = (&l, &r) {
                    return Expr::Const(op.apply2(*a, *b));
                }
                match op {
                    Op::Add if r.is_const(0.0) => l,
                    Op::Add if l.is_const(0.0) => r,
                    Op::Sub if r.is_const(0.0) => l,
                    Op::Sub if l == r => Expr::Const(0.0),
                    Op::Mul if l.is_const(0.0) || r.is_const(0.0) => Expr::Const(0.0),
                    Op::Mul if r.is_const(1.0) => l,
                    Op::Mul if l.is_const(1.0) => r,
                    _ => Expr::Bin(op, Box::new(l), Box::new(r)),
                }
            }
            leaf => leaf,
        }
    }

    /// `0 - a`, printed as `-a`.
    fn negated_operand(&self) -> Option<&Expr> {
        match self {
            Expr::Bin(Op::Sub, l, r) if l.is_const(0.0) => Some(r),
            _ => None,
        }
    }

    /// 1: additive or prefix minus, 2: product, 3: atom.
    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => 1,
            Expr::Var(_) | Expr::Const(_) | Expr::Un(..) => 3,
            Expr::Bin(Op::Mul, ..) => 2,
            Expr::Bin(..) => 1,
        }
    }

    fn write(&self, out: &mut String, names: Option<&[String]>, precision: Option<usize>) {
        let wrap = |e: &Expr, paren: bool, out: &mut String| {
            if paren {
                out.push('(');
                e.write(out, names, precision);
                out.push(')');
            } else {
                e.write(out, names, precision);
            }
        };
        match self {
            Expr::Var(j) => match names.and_then(|n| n.get(*j)) {
                Some(name) => out.push_str(name),
                None => out.push_str(&format!("x{j}")),
            },
            Expr::Const(c) => out.push_str(&format_constant(*c, precision)),
            Expr::Un(op, a) => {
                out.push_str(match op {
                    Op::Cos => "cos",
                    _ => "plog",
                });
                wrap(a, true, out);
            }
            e if e.negated_operand().is_some() => {
                let a = e.negated_operand().unwrap();
                out.push('-');
                wrap(a, a.precedence() <= 2, out);
            }
            Expr::Bin(op, l, r) => {
                let (sym, left_paren, right_paren) = match op {
                    Op::Add => (" + ", false, r.precedence() <= 1),
                    Op::Sub => (" - ", false, r.precedence() <= 1),
                    _ => (" * ", l.precedence() <= 1, r.precedence() <= 2),
                };
                wrap(l, left_paren, out);
                out.push_str(sym);
                wrap(r, right_paren, out);
            }
        }
    }
}

fn format_constant(c: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{c:.p$}"),
        None => format!("{c}"),
    }
}

/// Semantics-preserving cleanup: constant subtrees folded, `+0`, `-0`, `·1`
/// dropped, `·0` and `a - a` replaced by 0.
pub fn simplify(t: &Tree) -> Tree {
    let mut at = 0;
    let e = Expr::from_prefix(&t.nodes, &mut at).simplified();
    let mut nodes = Vec::with_capacity(t.nodes.len());
    e.to_prefix(&mut nodes);
    Tree {
        nodes,
        input_arity: t.input_arity,
    }
}

/// Infix text of the simplified tree. Variables print as `x<j>` unless
/// `feature_names` is given (named output is for display only and need not
/// re-parse). `constant_precision = None` prints constants exactly.
pub fn to_infix(t: &Tree, feature_names: Option<&[String]>, constant_precision: Option<usize>) -> String {
    let mut at = 0;
    let e = Expr::from_prefix(&t.nodes, &mut at).simplified();
    let mut out = String::new();
    e.write(&mut out, feature_names, constant_precision);
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Func(Op),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: String| Error::Parse { offset, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Token::Plus)),
            b'-' => out.push((start, Token::Minus)),
            b'*' => out.push((start, Token::Star)),
            b'(' => out.push((start, Token::LParen)),
            b')' => out.push((start, Token::RParen)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &s[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| err(start, format!("bad number '{text}'")))?;
                out.push((start, Token::Num(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &s[start..i];
                let tok = match word {
                    "cos" => Token::Func(Op::Cos),
                    "plog" => Token::Func(Op::Plog),
                    w if w.len() > 1 && w.starts_with('x') && w[1..].bytes().all(|b| b.is_ascii_digit()) => {
                        Token::Var(w[1..].parse().map_err(|_| err(start, format!("bad variable '{w}'")))?)
                    }
                    w => return Err(err(start, format!("unknown identifier '{w}'"))),
                };
                out.push((start, tok));
                continue;
            }
            other => return Err(err(start, format!("unexpected character '{}'", other as char))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    input_arity: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => Op::Add,
                Some(Token::Minus) => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(Op::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            if let Some(Token::Num(v)) = self.peek() {
                let v = *v;
                self.pos += 1;
                return Ok(Expr::Const(-v));
            }
            let inner = self.unary()?;
            return Ok(Expr::Bin(Op::Sub, Box::new(Expr::Const(0.0)), Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.fail("unexpected end of expression"),
        };
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Var(j) if j < self.input_arity => Ok(Expr::Var(j)),
            Token::Var(j) => {
                self.pos -= 1;
                self.fail(format!("variable x{j} outside input arity {}", self.input_arity))
            }
            Token::Func(op) => {
                if self.peek() != Some(&Token::LParen) {
                    return self.fail("expected '(' after function name");
                }
                self.pos += 1;
                let inner = self.expr()?;
                self.close()?;
                Ok(Expr::Un(op, Box::new(inner)))
            }
            Token::LParen => {
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            _ => {
                self.pos -= 1;
                self.fail("expected a number, variable, function or '('")
            }
        }
    }

    fn close(&mut self) -> Result<()> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail("expected ')'")
        }
    }
}

/// Parse text produced by [`to_infix`] (variables as `x<j>`).
pub fn parse_infix(s: &str, input_arity: usize) -> Result<Tree> {
    let mut p = Parser {
        tokens: tokenize(s)?,
        pos: 0,
        end: s.len(),
        input_arity,
    };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return p.fail("trailing input");
    }
    let mut nodes = Vec::new();
    e.to_prefix(&mut nodes);
    Tree::new(nodes, input_arity)
}
