//! Cell values, column datatypes, exact decimals and time spans.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Timezone-normalized instant.
pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Text,
    Integer,
    Decimal,
    Boolean,
    Timestamp,
}

impl DataType {
    pub const fn name(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::Integer => "integer",
            DataType::Decimal => "decimal",
            DataType::Boolean => "boolean",
            DataType::Timestamp => "timestamp",
        }
    }

    pub const fn is_numeric(self) -> bool {
        matches!(self, DataType::Integer | DataType::Decimal)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("`{text}` is not a valid {ty}")]
    Unparseable { text: String, ty: DataType },
    #[error("decimal `{0}` has more than 12 fractional digits")]
    TooPrecise(String),
    #[error("`{0}` is out of range")]
    OutOfRange(String),
}

/// Fixed-point decimal with 12 fractional digits.
///
/// Comparisons and addition are exact; multiplication and division truncate
/// toward zero at the 12th fractional digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal(i128);

impl Decimal {
    pub const SCALE_DIGITS: u32 = 12;
    const SCALE: i128 = 1_000_000_000_000;

    pub const ZERO: Decimal = Decimal(0);

    pub const fn from_units(units: i128) -> Self {
        Decimal(units)
    }

    pub const fn units(self) -> i128 {
        self.0
    }

    pub fn from_i64(v: i64) -> Self {
        Decimal(v as i128 * Self::SCALE)
    }

    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        self.0.checked_add(rhs.0).map(Decimal)
    }

    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        self.0.checked_sub(rhs.0).map(Decimal)
    }

    pub fn checked_mul(self, rhs: Self) -> Option<Self> {
        self.0.checked_mul(rhs.0).map(|p| Decimal(p / Self::SCALE))
    }

    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        if rhs.0 == 0 {
            return None;
        }
        self.0.checked_mul(Self::SCALE).map(|n| Decimal(n / rhs.0))
    }

    pub fn checked_rem(self, rhs: Self) -> Option<Self> {
        self.0.checked_rem(rhs.0).map(Decimal)
    }

    pub fn abs(self) -> Option<Self> {
        self.0.checked_abs().map(Decimal)
    }

    pub fn is_integral(self) -> bool {
        self.0 % Self::SCALE == 0
    }

    /// Integral value, if there is no fractional part and it fits `i64`.
    pub fn to_i64_exact(self) -> Option<i64> {
        if self.0 % Self::SCALE != 0 {
            return None;
        }
        i64::try_from(self.0 / Self::SCALE).ok()
    }

    pub fn to_f64(self) -> f64 {
        let int = (self.0 / Self::SCALE) as f64;
        let frac = (self.0 % Self::SCALE) as f64 / Self::SCALE as f64;
        int + frac
    }
}

impl FromStr for Decimal {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ValueError::Unparseable {
            text: s.into(),
            ty: DataType::Decimal,
        };
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (body, None),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut units: i128 = 0;
        for b in int_part.bytes() {
            units = units
                .checked_mul(10)
                .and_then(|u| u.checked_add((b - b'0') as i128))
                .ok_or_else(|| ValueError::OutOfRange(s.into()))?;
        }
        units = units
            .checked_mul(Self::SCALE)
            .ok_or_else(|| ValueError::OutOfRange(s.into()))?;
        if let Some(frac) = frac_part {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            if frac.len() > Self::SCALE_DIGITS as usize {
                return Err(ValueError::TooPrecise(s.into()));
            }
            let mut f: i128 = 0;
            for b in frac.bytes() {
                f = f * 10 + (b - b'0') as i128;
            }
            f *= 10i128.pow(Self::SCALE_DIGITS - frac.len() as u32);
            units += f;
        }
        Ok(Decimal(if negative { -units } else { units }))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = self.0 < 0;
        let abs = self.0.unsigned_abs();
        let scale = Self::SCALE as u128;
        let int = abs / scale;
        let mut frac = abs % scale;
        if neg {
            f.write_str("-")?;
        }
        write!(f, "{int}")?;
        if frac != 0 {
            let mut digits = Self::SCALE_DIGITS as usize;
            while frac % 10 == 0 {
                frac /= 10;
                digits -= 1;
            }
            write!(f, ".{frac:0digits$}")?;
        }
        Ok(())
    }
}

/// A single cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Text(String),
    Integer(i64),
    Decimal(Decimal),
    Boolean(bool),
    Timestamp(Timestamp),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn datatype(&self) -> Option<DataType> {
        Some(match self {
            Value::Null => return None,
            Value::Text(_) => DataType::Text,
            Value::Integer(_) => DataType::Integer,
            Value::Decimal(_) => DataType::Decimal,
            Value::Boolean(_) => DataType::Boolean,
            Value::Timestamp(_) => DataType::Timestamp,
        })
    }

    /// Parses the canonical text form of a non-null value of type `ty`.
    pub fn parse_as(text: &str, ty: DataType) -> Result<Value, ValueError> {
        let bad = || ValueError::Unparseable {
            text: text.into(),
            ty,
        };
        Ok(match ty {
            DataType::Text => Value::Text(text.into()),
            DataType::Integer => Value::Integer(text.parse().map_err(|_| bad())?),
            DataType::Decimal => Value::Decimal(text.parse()?),
            DataType::Boolean => match text {
                t if t.eq_ignore_ascii_case("true") => Value::Boolean(true),
                t if t.eq_ignore_ascii_case("false") => Value::Boolean(false),
                _ => return Err(bad()),
            },
            DataType::Timestamp => Value::Timestamp(parse_timestamp(text).ok_or_else(bad)?),
        })
    }

    /// Converts a value to another datatype where the conversion is lossless.
    ///
    /// Text is parsed; integers widen to decimals; integral decimals narrow
    /// to integers. Null stays null.
    pub fn coerce(&self, ty: DataType) -> Result<Value, ValueError> {
        match (self, ty) {
            (Value::Null, _) => Ok(Value::Null),
            (v, t) if v.datatype() == Some(t) => Ok(v.clone()),
            (Value::Text(s), t) => Value::parse_as(s, t),
            (Value::Integer(i), DataType::Decimal) => Ok(Value::Decimal(Decimal::from_i64(*i))),
            (Value::Decimal(d), DataType::Integer) => d
                .to_i64_exact()
                .map(Value::Integer)
                .ok_or_else(|| ValueError::Unparseable {
                    text: d.to_string(),
                    ty,
                }),
            (v, t) => Err(ValueError::Unparseable {
                text: v.to_string(),
                ty: t,
            }),
        }
    }

    /// Ordering between comparable values; integers and decimals compare
    /// numerically. `None` for null or incomparable operands.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(b)),
            (Value::Decimal(a), Value::Decimal(b)) => Some(a.cmp(b)),
            (Value::Integer(a), Value::Decimal(b)) => Some(Decimal::from_i64(*a).cmp(b)),
            (Value::Decimal(a), Value::Integer(b)) => Some(a.cmp(&Decimal::from_i64(*b))),
            (Value::Boolean(a), Value::Boolean(b)) => Some(a.cmp(b)),
            (Value::Timestamp(a), Value::Timestamp(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Canonical text form (empty for null).
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Text(s) => f.write_str(s),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Timestamp(t) => f.write_str(&format_timestamp(t)),
        }
    }
}

/// RFC 3339 only; offsets are normalized to UTC, naive forms are rejected.
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    DateTime::parse_from_rfc3339(text)
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Non-negative whole-second duration written as `1d12h`, `30m`, `2w`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    seconds: u64,
}

impl Span {
    pub const fn from_seconds(seconds: u64) -> Self {
        Span { seconds }
    }

    pub const fn from_days(days: u64) -> Self {
        Span {
            seconds: days * 86_400,
        }
    }

    pub const fn seconds(self) -> u64 {
        self.seconds
    }

    pub fn to_chrono(self) -> chrono::TimeDelta {
        chrono::TimeDelta::seconds(self.seconds as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid duration `{0}` (expected e.g. `30d`, `1d12h`, `90m`)")]
pub struct SpanError(pub String);

impl FromStr for Span {
    type Err = SpanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SpanError(s.into());
        if s.is_empty() {
            return Err(err());
        }
        let mut total: u64 = 0;
        let mut digits = String::new();
        for c in s.chars() {
            if c.is_ascii_digit() {
                digits.push(c);
                continue;
            }
            let unit = match c {
                'w' => 604_800,
                'd' => 86_400,
                'h' => 3_600,
                'm' => 60,
                's' => 1,
                _ => return Err(err()),
            };
            let n: u64 = digits.parse().map_err(|_| err())?;
            digits.clear();
            total = n
                .checked_mul(unit)
                .and_then(|v| total.checked_add(v))
                .ok_or_else(err)?;
        }
        if !digits.is_empty() {
            return Err(err());
        }
        Ok(Span { seconds: total })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.seconds == 0 {
            return f.write_str("0s");
        }
        let mut rest = self.seconds;
        for (unit, label) in [(86_400, 'd'), (3_600, 'h'), (60, 'm'), (1, 's')] {
            if rest >= unit {
                write!(f, "{}{label}", rest / unit)?;
                rest %= unit;
            }
        }
        Ok(())
    }
}
