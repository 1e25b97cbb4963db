use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{BinaryOp, Expr, Function, UnaryOp};
use crate::value::{parse_timestamp, Decimal, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at offset {offset}")]
pub struct ExprError {
    /// Byte offset into the expression text.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    Text(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> ExprError {
        ExprError {
            offset,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, ExprError> {
        let mut out = Vec::new();
        loop {
            let (at, tok) = self.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok((start, Tok::End));
        };
        let two = bytes.get(start..start + 2);
        let tok = match b {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'=' => Tok::Op("="),
            b'+' => Tok::Op("+"),
            b'-' => Tok::Op("-"),
            b'*' => Tok::Op("*"),
            b'/' => Tok::Op("/"),
            b'%' => Tok::Op("%"),
            b'!' if two == Some(b"!=") => Tok::Op("!="),
            b'<' if two == Some(b"<>") => Tok::Op("!="),
            b'<' if two == Some(b"<=") => Tok::Op("<="),
            b'>' if two == Some(b">=") => Tok::Op(">="),
            b'<' => Tok::Op("<"),
            b'>' => Tok::Op(">"),
            b'\'' => return self.text(start).map(|t| (start, Tok::Text(t))),
            b'`' => {
                let rest = &self.src[start + 1..];
                let close = rest
                    .find('`')
                    .ok_or_else(|| self.err(start, "unterminated quoted identifier"))?;
                if close == 0 {
                    return Err(self.err(start, "empty quoted identifier"));
                }
                self.pos = start + 1 + close + 1;
                return Ok((start, Tok::Quoted(rest[..close].into())));
            }
            b'0'..=b'9' => {
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                if end < bytes.len() && bytes[end] == b'.' {
                    end += 1;
                    let frac = end;
                    while end < bytes.len() && bytes[end].is_ascii_digit() {
                        end += 1;
                    }
                    if end == frac {
                        return Err(self.err(start, "expected digits after decimal point"));
                    }
                }
                self.pos = end;
                return Ok((start, Tok::Number(self.src[start..end].into())));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                return Ok((start, Tok::Ident(self.src[start..end].into())));
            }
            _ => {
                let c = self.src[start..].chars().next().unwrap_or('?');
                return Err(self.err(start, format!("unexpected character `{c}`")));
            }
        };
        self.pos += match tok {
            Tok::Op(s) if s.len() == 2 => 2,
            _ => 1,
        };
        Ok((start, tok))
    }

    fn text(&mut self, start: usize) -> Result<String, ExprError> {
        let mut out = String::new();
        let mut chars = self.src[start + 1..].char_indices();
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if self.src[start + 1 + i + 1..].starts_with('\'') {
                    out.push('\'');
                    chars.next();
                } else {
                    self.pos = start + 1 + i + 1;
                    return Ok(out);
                }
            } else {
                out.push(c);
            }
        }
        Err(self.err(start, "unterminated text literal"))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

fn keyword(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn offset(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if keyword(self.peek(), kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn or(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and()?;
        while self.eat_keyword("or") {
            lhs = Expr::binary(BinaryOp::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.not()?;
        while self.eat_keyword("and") {
            lhs = Expr::binary(BinaryOp::And, lhs, self.not()?);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ExprError> {
        if self.eat_keyword("not") {
            return Ok(Expr::not(self.not()?));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.sum()?;
        if self.eat_keyword("is") {
            let negated = self.eat_keyword("not");
            if !self.eat_keyword("null") {
                return Err(self.err("expected `null` after `is`"));
            }
            return Ok(Expr::IsNull {
                expr: Box::new(lhs),
                negated,
            });
        }
        let op = match self.peek() {
            Tok::Op("=") => BinaryOp::Eq,
            Tok::Op("!=") => BinaryOp::Ne,
            Tok::Op("<") => BinaryOp::Lt,
            Tok::Op("<=") => BinaryOp::Le,
            Tok::Op(">") => BinaryOp::Gt,
            Tok::Op(">=") => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.sum()?;
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinaryOp::Add,
                Tok::Op("-") => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinaryOp::Mul,
                Tok::Op("/") => BinaryOp::Div,
                Tok::Op("%") => BinaryOp::Mod,
                t if keyword(t, "mod") => BinaryOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op("-") {
            self.bump();
            if let Tok::Number(n) = self.peek().clone() {
                let at = self.offset();
                self.bump();
                return number(&format!("-{n}"), at);
            }
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let at = self.offset();
        match self.bump() {
            Tok::Number(n) => number(&n, at),
            Tok::Text(s) => Ok(Expr::Literal(Value::Text(s))),
            Tok::Quoted(name) => Ok(Expr::Column(name)),
            Tok::LParen => {
                let e = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(word) => {
                let lower = word.to_ascii_lowercase();
                match lower.as_str() {
                    "null" => return Ok(Expr::Literal(Value::Null)),
                    "true" => return Ok(Expr::Literal(Value::Boolean(true))),
                    "false" => return Ok(Expr::Literal(Value::Boolean(false))),
                    "timestamp" => {
                        let at = self.offset();
                        return match self.bump() {
                            Tok::Text(s) => parse_timestamp(&s)
                                .map(|t| Expr::Literal(Value::Timestamp(t)))
                                .ok_or_else(|| ExprError {
                                    offset: at,
                                    message: format!("`{s}` is not an RFC 3339 timestamp"),
                                }),
                            _ => Err(ExprError {
                                offset: at,
                                message: "expected text after `timestamp`".into(),
                            }),
                        };
                    }
                    "and" | "or" | "not" | "mod" | "is" => {
                        return Err(ExprError {
                            offset: at,
                            message: format!("unexpected keyword `{word}`"),
                        })
                    }
                    _ => {}
                }
                if *self.peek() == Tok::LParen {
                    let func = Function::from_name(&word).ok_or_else(|| ExprError {
                        offset: at,
                        message: format!("unknown function `{word}`"),
                    })?;
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.or()?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    return Ok(Expr::Call(func, args));
                }
                Ok(Expr::Column(word))
            }
            Tok::End => Err(ExprError {
                offset: at,
                message: "unexpected end of expression".into(),
            }),
            _ => Err(ExprError {
                offset: at,
                message: "expected an operand".into(),
            }),
        }
    }
}

fn number(text: &str, at: usize) -> Result<Expr, ExprError> {
    let v = if text.contains('.') {
        text.parse::<Decimal>()
            .map(Value::Decimal)
            .map_err(|e| format!("{e}"))
    } else {
        text.parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| format!("integer `{text}` out of range"))
    };
    v.map(Expr::Literal).map_err(|message| ExprError {
        offset: at,
        message,
    })
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let toks = Lexer { src, pos: 0 }.tokens()?;
    let mut p = Parser { toks, at: 0 };
    let e = p.or()?;
    if *p.peek() != Tok::End {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}
