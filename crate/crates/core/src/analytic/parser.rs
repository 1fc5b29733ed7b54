//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary | primary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 's' | 'i' | 'pi' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Juxtaposition multiplies, so `2 pi s` reads as `2*pi*s`.

use super::{mk_add, mk_call, mk_const, mk_div, mk_mul, mk_neg, mk_pow, mk_sub, Func, Node};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected one of {expected:?}")]
    Syntax { offset: usize, found: String, expected: Vec<&'static str> },
    #[error("unclosed parenthesis opened at byte {open_offset} (input ends at byte {offset})")]
    UnclosedParen { open_offset: usize, offset: usize },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("invalid number `{text}` at byte {offset}")]
    Number { text: String, offset: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }

    fn starts_primary(&self) -> bool {
        matches!(self, Tok::Num(_) | Tok::Ident(_) | Tok::LParen)
    }
}

const OPERAND: [&str; 5] = ["number", "identifier", "(", "-", "+"];

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let ch = b[i];
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match ch {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                        j += 1;
                    }
                    if j < b.len() && b[j].is_ascii_digit() {
                        while j < b.len() && b[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Number { text: text.to_string(), offset: start })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let found = src[start..].chars().next().map(|c| format!("`{c}`")).unwrap_or_default();
                return Err(ParseError::Syntax { offset: start, found, expected: OPERAND.to_vec() });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    open: Vec<usize>,
    unknown: Option<(String, usize)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<&'static str>) -> ParseError {
        if *self.peek() == Tok::End {
            if let Some(&open_offset) = self.open.last() {
                return ParseError::UnclosedParen { open_offset, offset: self.offset() };
            }
        }
        ParseError::Syntax { offset: self.offset(), found: self.peek().describe(), expected }
    }

    fn after_operand(&self) -> Vec<&'static str> {
        let mut v = vec!["+", "-", "*", "/", "^"];
        if self.open.is_empty() {
            v.push("end of input");
        } else {
            v.push(")");
        }
        v
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = mk_add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = mk_sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = mk_mul(lhs, self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = mk_div(lhs, self.unary()?);
                }
                t if t.starts_primary() => {
                    lhs = mk_mul(lhs, self.power()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(mk_neg(self.unary()?))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.unary()?;
            return Ok(mk_pow(base, e));
        }
        Ok(base)
    }

    fn paren_body(&mut self) -> Result<Node, ParseError> {
        let (_, open) = self.bump();
        self.open.push(open);
        let inner = self.expr()?;
        if *self.peek() != Tok::RParen {
            return Err(self.error(self.after_operand()));
        }
        self.bump();
        self.open.pop();
        Ok(inner)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(mk_const(C64::new(v, 0.0)))
            }
            Tok::LParen => self.paren_body(),
            Tok::Ident(name) => {
                let (_, off) = self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.error(vec!["("]));
                    }
                    let arg = self.paren_body()?;
                    return Ok(mk_call(f, arg));
                }
                match name.as_str() {
                    "s" => Ok(Node::Var),
                    "i" => Ok(mk_const(C64::new(0.0, 1.0))),
                    "pi" => Ok(mk_const(C64::new(std::f64::consts::PI, 0.0))),
                    _ => {
                        if self.unknown.is_none() {
                            self.unknown = Some((name, off));
                        }
                        Ok(mk_const(C64::new(1.0, 0.0)))
                    }
                }
            }
            _ => Err(self.error(OPERAND.to_vec())),
        }
    }
}

pub(crate) fn parse(src: &str) -> Result<Node, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, open: Vec::new(), unknown: None };
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(p.after_operand()));
    }
    if let Some((name, offset)) = p.unknown {
        return Err(ParseError::UnknownIdentifier { name, offset });
    }
    Ok(node)
}
