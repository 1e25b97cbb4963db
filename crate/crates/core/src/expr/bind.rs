//! Type checking against an entity schema, and evaluation of bound trees.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{BinaryOp, Expr, Function, UnaryOp};
use crate::pattern::Pattern;
use crate::schema::EntitySchema;
use crate::table::RowRef;
use crate::value::{DataType, Decimal, Timestamp, Value};

/// Static type of an expression; `Null` is the type of the bare `null`
/// literal and unifies with everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Null,
    Of(DataType),
}

impl Ty {
    fn is(self, t: DataType) -> bool {
        matches!(self, Ty::Null) || self == Ty::Of(t)
    }

    fn is_numeric(self) -> bool {
        match self {
            Ty::Null => true,
            Ty::Of(t) => t.is_numeric(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Ty::Null => "null",
            Ty::Of(t) => t.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BindError(pub String);

fn bind_err<T>(msg: String) -> Result<T, BindError> {
    Err(BindError(msg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn holds(self, o: Ordering) -> bool {
        match self {
            Cmp::Eq => o == Ordering::Equal,
            Cmp::Ne => o != Ordering::Equal,
            Cmp::Lt => o == Ordering::Less,
            Cmp::Le => o != Ordering::Greater,
            Cmp::Gt => o == Ordering::Greater,
            Cmp::Ge => o != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone)]
enum Node {
    Lit(Value),
    Col(usize),
    Not(Box<Node>),
    Neg(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Cmp(Cmp, Box<Node>, Box<Node>),
    Arith(Arith, Box<Node>, Box<Node>),
    IsNull(Box<Node>, bool),
    Len(Box<Node>),
    Upper(Box<Node>),
    Lower(Box<Node>),
    Substr(Box<Node>, Box<Node>, Box<Node>),
    Abs(Box<Node>),
    Regex(Box<Node>, Pattern),
    DateDiff(Box<Node>, Box<Node>),
    Age(Box<Node>),
    InSet(Box<Node>, Vec<Value>),
}

/// Evaluation-time inputs that are not part of the row.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    /// The evaluation "now"; `age_days` measures against it.
    pub reference_time: Timestamp,
}

/// Expression resolved against one entity schema.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    node: Node,
    ty: Ty,
}

impl BoundExpr {
    /// Type-checks `expr` against `schema` and resolves column references.
    pub fn bind(expr: &Expr, schema: &EntitySchema) -> Result<BoundExpr, BindError> {
        let (node, ty) = bind(expr, schema)?;
        Ok(BoundExpr { node, ty })
    }

    /// Like [`BoundExpr::bind`], additionally requiring a boolean result.
    pub fn bind_predicate(expr: &Expr, schema: &EntitySchema) -> Result<BoundExpr, BindError> {
        let b = Self::bind(expr, schema)?;
        if !b.ty.is(DataType::Boolean) {
            return bind_err(format!("expression must be boolean, found {}", b.ty.name()));
        }
        Ok(b)
    }

    pub fn ty(&self) -> Ty {
        self.ty
    }

    pub fn eval(&self, row: RowRef<'_>, ctx: &EvalContext) -> Value {
        eval(&self.node, row, ctx)
    }

    /// True only when the expression evaluates to `true`; null and false
    /// both reject.
    pub fn test(&self, row: RowRef<'_>, ctx: &EvalContext) -> bool {
        matches!(self.eval(row, ctx), Value::Boolean(true))
    }
}

fn literal_ty(v: &Value) -> Ty {
    v.datatype().map_or(Ty::Null, Ty::Of)
}

fn bind(expr: &Expr, schema: &EntitySchema) -> Result<(Node, Ty), BindError> {
    Ok(match expr {
        Expr::Literal(v) => (Node::Lit(v.clone()), literal_ty(v)),
        Expr::Column(name) => {
            let idx = schema.column_index(name).ok_or_else(|| {
                BindError(format!(
                    "unknown column `{name}` in entity `{}`",
                    schema.name
                ))
            })?;
            (Node::Col(idx), Ty::Of(schema.columns[idx].datatype))
        }
        Expr::Unary(UnaryOp::Not, e) => {
            let (n, t) = bind(e, schema)?;
            if !t.is(DataType::Boolean) {
                return bind_err(format!("`not` needs a boolean operand, found {}", t.name()));
            }
            (Node::Not(Box::new(n)), Ty::Of(DataType::Boolean))
        }
        Expr::Unary(UnaryOp::Neg, e) => {
            let (n, t) = bind(e, schema)?;
            if !t.is_numeric() {
                return bind_err(format!(
                    "unary `-` needs a numeric operand, found {}",
                    t.name()
                ));
            }
            (Node::Neg(Box::new(n)), t)
        }
        Expr::IsNull { expr, negated } => {
            let (n, _) = bind(expr, schema)?;
            (
                Node::IsNull(Box::new(n), *negated),
                Ty::Of(DataType::Boolean),
            )
        }
        Expr::Binary(op, a, b) => {
            let (na, ta) = bind(a, schema)?;
            let (nb, tb) = bind(b, schema)?;
            bind_binary(*op, na, ta, nb, tb)?
        }
        Expr::Call(func, args) => bind_call(*func, args, schema)?,
    })
}

fn bind_binary(op: BinaryOp, na: Node, ta: Ty, nb: Node, tb: Ty) -> Result<(Node, Ty), BindError> {
    let (a, b) = (Box::new(na), Box::new(nb));
    let boolean = Ty::Of(DataType::Boolean);
    match op {
        BinaryOp::And | BinaryOp::Or => {
            if !ta.is(DataType::Boolean) || !tb.is(DataType::Boolean) {
                return bind_err(format!(
                    "`{}` needs boolean operands, found {} and {}",
                    if op == BinaryOp::And { "and" } else { "or" },
                    ta.name(),
                    tb.name()
                ));
            }
            let node = if op == BinaryOp::And {
                Node::And(a, b)
            } else {
                Node::Or(a, b)
            };
            Ok((node, boolean))
        }
        BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let comparable = match (ta, tb) {
                (Ty::Null, _) | (_, Ty::Null) => true,
                (Ty::Of(x), Ty::Of(y)) if x.is_numeric() && y.is_numeric() => true,
                (Ty::Of(DataType::Boolean), Ty::Of(DataType::Boolean)) => {
                    matches!(op, BinaryOp::Eq | BinaryOp::Ne)
                }
                (Ty::Of(x), Ty::Of(y)) => x == y,
            };
            if !comparable {
                return bind_err(format!("cannot compare {} with {}", ta.name(), tb.name()));
            }
            let cmp = match op {
                BinaryOp::Eq => Cmp::Eq,
                BinaryOp::Ne => Cmp::Ne,
                BinaryOp::Lt => Cmp::Lt,
                BinaryOp::Le => Cmp::Le,
                BinaryOp::Gt => Cmp::Gt,
                _ => Cmp::Ge,
            };
            Ok((Node::Cmp(cmp, a, b), boolean))
        }
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => {
            if !ta.is_numeric() || !tb.is_numeric() {
                return bind_err(format!(
                    "arithmetic needs numeric operands, found {} and {}",
                    ta.name(),
                    tb.name()
                ));
            }
            let arith = match op {
                BinaryOp::Add => Arith::Add,
                BinaryOp::Sub => Arith::Sub,
                BinaryOp::Mul => Arith::Mul,
                BinaryOp::Div => Arith::Div,
                _ => Arith::Mod,
            };
            let ty = match (arith, ta, tb) {
                (Arith::Div, _, _) => Ty::Of(DataType::Decimal),
                (_, Ty::Of(DataType::Integer), Ty::Of(DataType::Integer)) => {
                    Ty::Of(DataType::Integer)
                }
                (_, Ty::Null, Ty::Null) => Ty::Null,
                (_, Ty::Null, t) | (_, t, Ty::Null) => t,
                _ => Ty::Of(DataType::Decimal),
            };
            Ok((Node::Arith(arith, a, b), ty))
        }
    }
}

fn bind_call(
    func: Function,
    args: &[Expr],
    schema: &EntitySchema,
) -> Result<(Node, Ty), BindError> {
    let arity = |n: usize| -> Result<(), BindError> {
        if args.len() == n {
            Ok(())
        } else {
            bind_err(format!(
                "{}() takes {n} argument(s), got {}",
                func.name(),
                args.len()
            ))
        }
    };
    let arg = |i: usize, want: DataType| -> Result<Box<Node>, BindError> {
        let (n, t) = bind(&args[i], schema)?;
        if !t.is(want) {
            return bind_err(format!(
                "{}() argument {} must be {want}, found {}",
                func.name(),
                i + 1,
                t.name()
            ));
        }
        Ok(Box::new(n))
    };
    use DataType::*;
    Ok(match func {
        Function::Len => {
            arity(1)?;
            (Node::Len(arg(0, Text)?), Ty::Of(Integer))
        }
        Function::Upper => {
            arity(1)?;
            (Node::Upper(arg(0, Text)?), Ty::Of(Text))
        }
        Function::Lower => {
            arity(1)?;
            (Node::Lower(arg(0, Text)?), Ty::Of(Text))
        }
        Function::Substr => {
            arity(3)?;
            (
                Node::Substr(arg(0, Text)?, arg(1, Integer)?, arg(2, Integer)?),
                Ty::Of(Text),
            )
        }
        Function::Abs => {
            arity(1)?;
            let (n, t) = bind(&args[0], schema)?;
            if !t.is_numeric() {
                return bind_err(format!(
                    "abs() needs a numeric argument, found {}",
                    t.name()
                ));
            }
            (Node::Abs(Box::new(n)), t)
        }
        Function::RegexMatch => {
            arity(2)?;
            let Expr::Literal(Value::Text(src)) = &args[1] else {
                return bind_err("regex_match() pattern must be a text literal".into());
            };
            let pattern = Pattern::new(src).map_err(|e| BindError(format!("{e}")))?;
            (Node::Regex(arg(0, Text)?, pattern), Ty::Of(Boolean))
        }
        Function::DateDiffDays => {
            arity(2)?;
            (
                Node::DateDiff(arg(0, Timestamp)?, arg(1, Timestamp)?),
                Ty::Of(Integer),
            )
        }
        Function::AgeDays => {
            arity(1)?;
            (Node::Age(arg(0, Timestamp)?), Ty::Of(Integer))
        }
        Function::InSet => {
            if args.len() < 2 {
                return bind_err("in_set() needs a value and at least one member".into());
            }
            let (n, t) = bind(&args[0], schema)?;
            let mut members = Vec::with_capacity(args.len() - 1);
            for (i, a) in args[1..].iter().enumerate() {
                let Expr::Literal(v) = a else {
                    return bind_err(format!("in_set() member {} must be a literal", i + 1));
                };
                let v = match t {
                    Ty::Of(dt) => v
                        .coerce(dt)
                        .map_err(|e| BindError(format!("in_set() member {}: {e}", i + 1)))?,
                    Ty::Null => v.clone(),
                };
                members.push(v);
            }
            (Node::InSet(Box::new(n), members), Ty::Of(Boolean))
        }
    })
}

const DAY_SECONDS: i64 = 86_400;

fn whole_days(later: &Timestamp, earlier: &Timestamp) -> i64 {
    (*later - *earlier).num_seconds().div_euclid(DAY_SECONDS)
}

fn arith(op: Arith, a: Value, b: Value) -> Value {
    match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => {
            let r = match op {
                Arith::Add => x.checked_add(y),
                Arith::Sub => x.checked_sub(y),
                Arith::Mul => x.checked_mul(y),
                Arith::Mod => x.checked_rem(y),
                Arith::Div => {
                    return Decimal::from_i64(x)
                        .checked_div(Decimal::from_i64(y))
                        .map_or(Value::Null, Value::Decimal)
                }
            };
            r.map_or(Value::Null, Value::Integer)
        }
        (a, b) => {
            let (Some(x), Some(y)) = (to_decimal(&a), to_decimal(&b)) else {
                return Value::Null;
            };
            let r = match op {
                Arith::Add => x.checked_add(y),
                Arith::Sub => x.checked_sub(y),
                Arith::Mul => x.checked_mul(y),
                Arith::Div => x.checked_div(y),
                Arith::Mod => x.checked_rem(y),
            };
            r.map_or(Value::Null, Value::Decimal)
        }
    }
}

fn to_decimal(v: &Value) -> Option<Decimal> {
    match v {
        Value::Integer(i) => Some(Decimal::from_i64(*i)),
        Value::Decimal(d) => Some(*d),
        _ => None,
    }
}

fn eval(node: &Node, row: RowRef<'_>, ctx: &EvalContext) -> Value {
    let ev = |n: &Node| eval(n, row, ctx);
    match node {
        Node::Lit(v) => v.clone(),
        Node::Col(i) => row.get(*i).clone(),
        Node::Not(e) => match ev(e) {
            Value::Boolean(b) => Value::Boolean(!b),
            _ => Value::Null,
        },
        Node::Neg(e) => match ev(e) {
            Value::Integer(i) => i.checked_neg().map_or(Value::Null, Value::Integer),
            Value::Decimal(d) => Decimal::ZERO
                .checked_sub(d)
                .map_or(Value::Null, Value::Decimal),
            _ => Value::Null,
        },
        Node::And(a, b) => match ev(a) {
            Value::Boolean(false) => Value::Boolean(false),
            l => match (l, ev(b)) {
                (_, Value::Boolean(false)) => Value::Boolean(false),
                (Value::Boolean(true), Value::Boolean(true)) => Value::Boolean(true),
                _ => Value::Null,
            },
        },
        Node::Or(a, b) => match ev(a) {
            Value::Boolean(true) => Value::Boolean(true),
            l => match (l, ev(b)) {
                (_, Value::Boolean(true)) => Value::Boolean(true),
                (Value::Boolean(false), Value::Boolean(false)) => Value::Boolean(false),
                _ => Value::Null,
            },
        },
        Node::Cmp(op, a, b) => {
            let (x, y) = (ev(a), ev(b));
            x.compare(&y)
                .map_or(Value::Null, |o| Value::Boolean(op.holds(o)))
        }
        Node::Arith(op, a, b) => arith(*op, ev(a), ev(b)),
        Node::IsNull(e, negated) => Value::Boolean(ev(e).is_null() != *negated),
        Node::Len(e) => match ev(e) {
            Value::Text(s) => Value::Integer(s.chars().count() as i64),
            _ => Value::Null,
        },
        Node::Upper(e) => match ev(e) {
            Value::Text(s) => Value::Text(s.to_uppercase()),
            _ => Value::Null,
        },
        Node::Lower(e) => match ev(e) {
            Value::Text(s) => Value::Text(s.to_lowercase()),
            _ => Value::Null,
        },
        Node::Substr(s, start, len) => match (ev(s), ev(start), ev(len)) {
            (Value::Text(s), Value::Integer(start), Value::Integer(len)) => {
                // 1-based start; positions before 1 still consume length
                let first = start.max(1);
                let last = start.saturating_add(len.max(0));
                let take = (last - first).max(0) as usize;
                Value::Text(s.chars().skip((first - 1) as usize).take(take).collect())
            }
            _ => Value::Null,
        },
        Node::Abs(e) => match ev(e) {
            Value::Integer(i) => i.checked_abs().map_or(Value::Null, Value::Integer),
            Value::Decimal(d) => d.abs().map_or(Value::Null, Value::Decimal),
            _ => Value::Null,
        },
        Node::Regex(e, p) => match ev(e) {
            Value::Text(s) => Value::Boolean(p.is_full_match(&s)),
            _ => Value::Null,
        },
        Node::DateDiff(a, b) => match (ev(a), ev(b)) {
            (Value::Timestamp(x), Value::Timestamp(y)) => Value::Integer(whole_days(&x, &y)),
            _ => Value::Null,
        },
        Node::Age(e) => match ev(e) {
            Value::Timestamp(t) => Value::Integer(whole_days(&ctx.reference_time, &t)),
            _ => Value::Null,
        },
        Node::InSet(e, members) => {
            let v = ev(e);
            if v.is_null() {
                return Value::Null;
            }
            let hit = members
                .iter()
                .any(|m| v.compare(m) == Some(Ordering::Equal));
            if hit {
                Value::Boolean(true)
            } else if members.iter().any(Value::is_null) {
                Value::Null
            } else {
                Value::Boolean(false)
            }
        }
    }
}
