//! Row predicate language used by `where` filters, `predicate` rules and
//! freshness conditions.
//!
//! ```text
//! expr     = or ;
//! or       = and { "or" and } ;
//! and      = not { "and" not } ;
//! not      = "not" not | cmp ;
//! cmp      = sum [ ( "=" | "!=" | "<>" | "<" | "<=" | ">" | ">=" ) sum
//!                | "is" [ "not" ] "null" ] ;
//! sum      = product { ( "+" | "-" ) product } ;
//! product  = unary { ( "*" | "/" | "%" | "mod" ) unary } ;
//! unary    = "-" unary | primary ;
//! primary  = literal | column | call | "(" expr ")" ;
//! call     = name "(" [ expr { "," expr } ] ")" ;
//! literal  = integer | decimal | "'" text "'" | "timestamp" "'" rfc3339 "'"
//!          | "true" | "false" | "null" ;
//! column   = identifier | "`" any "`" ;
//! ```
//!
//! Keywords and function names are case-insensitive. Evaluation uses
//! three-valued logic: any null operand yields null, and a row satisfies an
//! expression only when it evaluates to `true`.

mod bind;
mod parse;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use bind::{BindError, BoundExpr, EvalContext, Ty};
pub use parse::{parse_expr, ExprError};

use crate::value::{format_timestamp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "or",
            BinaryOp::And => "and",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Len,
    Upper,
    Lower,
    Substr,
    Abs,
    RegexMatch,
    DateDiffDays,
    AgeDays,
    InSet,
}

impl Function {
    pub const ALL: [Function; 9] = [
        Function::Len,
        Function::Upper,
        Function::Lower,
        Function::Substr,
        Function::Abs,
        Function::RegexMatch,
        Function::DateDiffDays,
        Function::AgeDays,
        Function::InSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Len => "len",
            Function::Upper => "upper",
            Function::Lower => "lower",
            Function::Substr => "substr",
            Function::Abs => "abs",
            Function::RegexMatch => "regex_match",
            Function::DateDiffDays => "date_diff_days",
            Function::AgeDays => "age_days",
            Function::InSet => "in_set",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Value),
    Column(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
    Call(Function, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnaryOp::Not, Box::new(e))
    }

    pub fn column(name: &str) -> Expr {
        Expr::Column(name.into())
    }

    /// Column names referenced anywhere in the tree, deduplicated, in first
    /// occurrence order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Column(c) => {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
            Expr::Unary(_, e) | Expr::IsNull { expr: e, .. } => e.collect_columns(out),
            Expr::Binary(_, a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_columns(out)),
        }
    }
}

const KEYWORDS: [&str; 9] = [
    "and",
    "or",
    "not",
    "mod",
    "is",
    "null",
    "true",
    "false",
    "timestamp",
];

fn is_plain_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
        && Function::from_name(s).is_none()
}

fn write_text_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        if c == '\'' {
            f.write_str("''")?;
        } else {
            write!(f, "{c}")?;
        }
    }
    f.write_str("'")
}

/// Canonical text: binary operations are fully parenthesized, so the output
/// parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => match v {
                Value::Null => f.write_str("null"),
                Value::Text(s) => write_text_literal(f, s),
                Value::Timestamp(t) => {
                    f.write_str("timestamp ")?;
                    write_text_literal(f, &format_timestamp(t))
                }
                Value::Decimal(d) => {
                    // keep decimals distinguishable from integers
                    if d.is_integral() {
                        write!(f, "{d}.0")
                    } else {
                        write!(f, "{d}")
                    }
                }
                other => write!(f, "{other}"),
            },
            Expr::Column(c) if is_plain_identifier(c) => f.write_str(c),
            Expr::Column(c) => write!(f, "`{c}`"),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "(not {e})"),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "-({e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::IsNull { expr, negated } => {
                write!(f, "({expr} is {}null)", if *negated { "not " } else { "" })
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
