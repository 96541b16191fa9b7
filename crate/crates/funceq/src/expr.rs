//! A small expression language for the given functions h, f, g.
//!
//! Grammar (EBNF):
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" integer)?
//! atom    := number | "x" | ident "(" expr ")" | "(" expr ")"
//! ident   := "sin" | "cos" | "exp" | "log" | "sqrt" | "tanh"
//! number  := decimal literal, optionally with exponent ("1", "2.5", "1e-3")
//! ```
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`. The single free
//! variable is `x`; there is no implicit multiplication. Derivatives of any
//! order come from propagating truncated-Taylor arithmetic through the AST,
//! not from symbolic differentiation.

use crate::jets::{Jet, JetError};
use crate::real::Real;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {kind}")]
    Domain { subexpr: String, kind: String },
    #[error("non-finite input")]
    NonFiniteInput,
}

/// AST node. Constants are stored in f64 and converted to the evaluation
/// scalar on use.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Constant(f64),
    Variable,
    Add(Box<ExprNode>, Box<ExprNode>),
    Sub(Box<ExprNode>, Box<ExprNode>),
    Mul(Box<ExprNode>, Box<ExprNode>),
    Div(Box<ExprNode>, Box<ExprNode>),
    Neg(Box<ExprNode>),
    PowInt(Box<ExprNode>, u32),
    Sin(Box<ExprNode>),
    Cos(Box<ExprNode>),
    Exp(Box<ExprNode>),
    Log(Box<ExprNode>),
    Sqrt(Box<ExprNode>),
    Tanh(Box<ExprNode>),
}

/// A parsed, immutable function of the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFunction {
    root: ExprNode,
    source_text: String,
}

impl ParsedFunction {
    pub fn root(&self) -> &ExprNode {
        &self.root
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn eval<T: Real>(&self, x: T) -> Result<T, EvalError> {
        if !x.is_finite() {
            return Err(EvalError::NonFiniteInput);
        }
        eval_node(&self.root, x)
    }

    /// Jet of the function at `x` through `order`, by truncated-Taylor
    /// propagation through the AST.
    pub fn eval_jet<T: Real>(&self, x: T, order: usize) -> Result<Jet<T>, EvalError> {
        if !x.is_finite() {
            return Err(EvalError::NonFiniteInput);
        }
        eval_jet_node(&self.root, &Jet::variable(x, order))
    }
}

impl fmt::Display for ParsedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

pub fn parse(text: &str) -> Result<ParsedFunction, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, end: text.len() };
    let root = p.expr()?;
    if p.pos < p.tokens.len() {
        let (offset, _) = p.peek_raw();
        return Err(ParseError::Syntax {
            offset,
            message: "unexpected trailing input".into(),
        });
    }
    Ok(ParsedFunction {
        root,
        source_text: text.to_string(),
    })
}

fn eval_node<T: Real>(node: &ExprNode, x: T) -> Result<T, EvalError> {
    use ExprNode::*;
    Ok(match node {
        Constant(c) => T::of(*c),
        Variable => x,
        Add(a, b) => eval_node(a, x)? + eval_node(b, x)?,
        Sub(a, b) => eval_node(a, x)? - eval_node(b, x)?,
        Mul(a, b) => eval_node(a, x)? * eval_node(b, x)?,
        Div(a, b) => {
            let d = eval_node(b, x)?;
            if d == T::zero() {
                return Err(domain(node, "division by zero"));
            }
            eval_node(a, x)? / d
        }
        Neg(a) => -eval_node(a, x)?,
        PowInt(a, e) => eval_node(a, x)?.powi(*e as i32),
        Sin(a) => eval_node(a, x)?.sin(),
        Cos(a) => eval_node(a, x)?.cos(),
        Exp(a) => eval_node(a, x)?.exp(),
        Log(a) => {
            let v = eval_node(a, x)?;
            if v <= T::zero() {
                return Err(domain(node, "log of non-positive value"));
            }
            v.ln()
        }
        Sqrt(a) => {
            let v = eval_node(a, x)?;
            if v < T::zero() {
                return Err(domain(node, "square root of negative value"));
            }
            v.sqrt()
        }
        Tanh(a) => eval_node(a, x)?.tanh(),
    })
}

fn eval_jet_node<T: Real>(node: &ExprNode, x: &Jet<T>) -> Result<Jet<T>, EvalError> {
    use ExprNode::*;
    let lift = |r: Result<Jet<T>, JetError>| -> Result<Jet<T>, EvalError> {
        r.map_err(|e| domain(node, &e.to_string()))
    };
    Ok(match node {
        Constant(c) => Jet::constant(x.base_point(), T::of(*c), x.order()),
        Variable => x.clone(),
        Add(a, b) => lift(eval_jet_node(a, x)?.add(&eval_jet_node(b, x)?))?,
        Sub(a, b) => lift(eval_jet_node(a, x)?.sub(&eval_jet_node(b, x)?))?,
        Mul(a, b) => lift(eval_jet_node(a, x)?.mul(&eval_jet_node(b, x)?))?,
        Div(a, b) => lift(eval_jet_node(a, x)?.div(&eval_jet_node(b, x)?))?,
        Neg(a) => eval_jet_node(a, x)?.neg(),
        PowInt(a, e) => eval_jet_node(a, x)?.powi(*e),
        Sin(a) => eval_jet_node(a, x)?.sin(),
        Cos(a) => eval_jet_node(a, x)?.cos(),
        Exp(a) => eval_jet_node(a, x)?.exp(),
        Log(a) => lift(eval_jet_node(a, x)?.ln())?,
        Sqrt(a) => lift(eval_jet_node(a, x)?.sqrt())?,
        Tanh(a) => eval_jet_node(a, x)?.tanh(),
    })
}

fn domain(node: &ExprNode, kind: &str) -> EvalError {
    EvalError::Domain {
        subexpr: node.to_string(),
        kind: kind.to_string(),
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ExprNode::*;
        match self {
            // negative literals need parens so "-2^2" does not re-parse
            // as -(2^2)
            Constant(c) if *c < 0.0 => write!(f, "({})", c),
            Constant(c) => write!(f, "{}", c),
            Variable => write!(f, "x"),
            Add(a, b) => write!(f, "({} + {})", a, b),
            Sub(a, b) => write!(f, "({} - {})", a, b),
            Mul(a, b) => write!(f, "({} * {})", a, b),
            Div(a, b) => write!(f, "({} / {})", a, b),
            Neg(a) => write!(f, "(-{})", a),
            PowInt(a, e) => write!(f, "({}^{})", a, e),
            Sin(a) => write!(f, "sin({})", a),
            Cos(a) => write!(f, "cos({})", a),
            Exp(a) => write!(f, "exp({})", a),
            Log(a) => write!(f, "log({})", a),
            Sqrt(a) => write!(f, "sqrt({})", a),
            Tanh(a) => write!(f, "tanh({})", a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => { out.push((i, Tok::Plus)); i += 1; }
            '-' => { out.push((i, Tok::Minus)); i += 1; }
            '*' => { out.push((i, Tok::Star)); i += 1; }
            '/' => { out.push((i, Tok::Slash)); i += 1; }
            '^' => { out.push((i, Tok::Caret)); i += 1; }
            '(' => { out.push((i, Tok::LParen)); i += 1; }
            ')' => { out.push((i, Tok::RParen)); i += 1; }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent part
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("invalid number literal `{}`", lit),
                })?;
                out.push((start, Tok::Number(v)));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", c),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn peek_raw(&self) -> (usize, Option<&Tok>) {
        match self.tokens.get(self.pos) {
            Some((o, t)) => (*o, Some(t)),
            None => (self.end, None),
        }
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (offset, got) = self.peek_raw();
        match got {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                offset,
                message: format!("expected {}", what),
            }),
        }
    }

    fn expr(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = ExprNode::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = ExprNode::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprNode, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = ExprNode::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = ExprNode::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<ExprNode, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(ExprNode::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprNode, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let (offset, got) = self.peek_raw();
            match got {
                Some(Tok::Number(v)) if v.fract() == 0.0 && *v >= 0.0 && *v <= u32::MAX as f64 => {
                    let e = *v as u32;
                    self.pos += 1;
                    return Ok(ExprNode::PowInt(Box::new(base), e));
                }
                _ => {
                    return Err(ParseError::Syntax {
                        offset,
                        message: "exponent must be a non-negative integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprNode, ParseError> {
        let (offset, tok) = match self.bump() {
            Some(t) => t,
            None => {
                return Err(ParseError::Syntax {
                    offset: self.end,
                    message: "expected expression".into(),
                })
            }
        };
        match tok {
            Tok::Number(v) => Ok(ExprNode::Constant(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(ExprNode::Variable),
                "sin" | "cos" | "exp" | "log" | "sqrt" | "tanh" => {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(match name.as_str() {
                        "sin" => ExprNode::Sin(arg),
                        "cos" => ExprNode::Cos(arg),
                        "exp" => ExprNode::Exp(arg),
                        "log" => ExprNode::Log(arg),
                        "sqrt" => ExprNode::Sqrt(arg),
                        _ => ExprNode::Tanh(arg),
                    })
                }
                _ => Err(ParseError::UnknownIdentifier { offset, name }),
            },
            other => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected token {:?}", other),
            }),
        }
    }
}
