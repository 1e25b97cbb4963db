//! Deterministic synthetic snapshots with a planned number of violations
//! per rule, so every measure has an exact expected value.
//!
//! Each planned rule owns the cells it checks: for `n` applicable items and
//! rate `r`, exactly `round(r·n)` items are given a violating value and the
//! rest a compliant one. Unowned columns come from their generators.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::MeasureSet;
use crate::rules::{Bound, ColumnRef, DomainSource, Rule, RuleKind, RuleSet};
use crate::schema::{EntitySchema, SchemaCatalog};
use crate::table::Entity;
use crate::value::{parse_timestamp, DataType, Decimal, Timestamp, Value};

/// A JSON scalar before it is given a column type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Null(()),
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    /// Untyped value: text stays text until coerced to a column type.
    pub fn to_value(&self) -> Value {
        match self {
            Scalar::Null(()) => Value::Null,
            Scalar::Bool(b) => Value::Boolean(*b),
            Scalar::Int(i) => Value::Integer(*i),
            Scalar::Float(f) => format!("{f}")
                .parse::<Decimal>()
                .map_or_else(|_| Value::Text(format!("{f}")), Value::Decimal),
            Scalar::Text(s) => Value::Text(s.clone()),
        }
    }

    pub fn from_value(v: &Value) -> Scalar {
        match v {
            Value::Null => Scalar::Null(()),
            Value::Boolean(b) => Scalar::Bool(*b),
            Value::Integer(i) => Scalar::Int(*i),
            other => Scalar::Text(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ColumnGen {
    /// `#` digit, `A` upper-case letter, `a` lower-case letter, `\` escapes
    /// the next character; anything else is literal.
    Template {
        template: String,
    },
    Pool {
        values: Vec<Scalar>,
    },
    IntRange {
        min: i64,
        max: i64,
    },
    /// Two fractional digits.
    DecimalRange {
        min: i64,
        max: i64,
    },
    TimestampWindow {
        start: String,
        end: String,
    },
    /// `prefix` followed by `start + ordinal`, zero-padded to `width`.
    Sequence {
        #[serde(default)]
        prefix: String,
        #[serde(default)]
        start: i64,
        #[serde(default)]
        width: usize,
    },
    Boolean,
    Constant {
        value: Scalar,
    },
    /// Uniform pick among the non-null values of `entity.column`.
    Reference {
        column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationPlan {
    pub rule: String,
    pub rate: f64,
    /// Value written into violating cells, overriding the kind's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Scalar>,
    /// Predicate rules: column values of compliant rows.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub comply: BTreeMap<String, Scalar>,
    /// Predicate rules: column values of violating rows.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub violate: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Row count per entity; absent entities are empty.
    pub rows: BTreeMap<String, usize>,
    /// Keyed by `entity.column`.
    #[serde(default)]
    pub generators: BTreeMap<String, ColumnGen>,
    #[serde(default)]
    pub plan: Vec<ViolationPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub a: u64,
    pub b: u64,
}

pub type ExpectedMeasures = BTreeMap<String, Expected>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("plan references unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule}` is planned twice")]
    DuplicatePlan { rule: String },
    #[error("rule `{rule}`: violation rate {rate} is outside [0, 1]")]
    BadRate { rule: String, rate: f64 },
    #[error("column `{column}` is claimed by rules `{first}` and `{second}`")]
    ConflictingPlan {
        column: String,
        first: String,
        second: String,
    },
    #[error("rule `{rule}`: {reason}")]
    Unsupported { rule: String, reason: String },
    #[error("rule `{rule}`: {reason}")]
    Unattainable { rule: String, reason: String },
    #[error("generator for `{column}`: {message}")]
    Generator { column: String, message: String },
    #[error("entities reference each other in a cycle: {0}")]
    Cycle(String),
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// In catalog order.
    pub entities: Vec<Entity>,
    pub expected: ExpectedMeasures,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discrepancy {
    Mismatch {
        rule_id: String,
        expected: Expected,
        actual: Expected,
    },
    MissingMeasure {
        rule_id: String,
    },
    Unexpected {
        rule_id: String,
    },
}

/// Empty iff every expected count equals the measured one and both sides
/// cover the same rules.
pub fn expected_vs_actual(expected: &ExpectedMeasures, ms: &MeasureSet) -> Vec<Discrepancy> {
    let mut out = Vec::new();
    for (id, e) in expected {
        match ms.get(id) {
            None => out.push(Discrepancy::MissingMeasure {
                rule_id: id.clone(),
            }),
            Some(m) if m.a != e.a || m.b != e.b => out.push(Discrepancy::Mismatch {
                rule_id: id.clone(),
                expected: *e,
                actual: Expected { a: m.a, b: m.b },
            }),
            Some(_) => {}
        }
    }
    for id in ms.measures.keys() {
        if !expected.contains_key(id) {
            out.push(Discrepancy::Unexpected {
                rule_id: id.clone(),
            });
        }
    }
    out
}

fn mix(seed: u64, parts: &[&str]) -> u64 {
    // FNV-1a over the seed and names gives every stream its own sub-seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    for p in parts {
        p.bytes().for_each(&mut eat);
        eat(0xff);
    }
    h
}

fn rng_for(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}

/// `round(rate·n)`, halves rounding up.
pub fn violation_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 0.5) as usize
}

const DECIMAL_STEP: i128 = 10_000_000_000; // 0.01
const DAY: i64 = 86_400;

struct Plan<'a> {
    rule: &'a Rule,
    spec: &'a ViolationPlan,
    /// Violating item indexes (rows, or cells for `format_class`).
    violating: BTreeSet<usize>,
    items: usize,
}

struct Ctx<'a> {
    spec: &'a SynthSpec,
    catalog: &'a SchemaCatalog,
    reference: Timestamp,
    generators: BTreeMap<ColumnRef, &'a ColumnGen>,
    owner: BTreeMap<ColumnRef, usize>,
    plans: Vec<Plan<'a>>,
    done: BTreeMap<String, Vec<Vec<Value>>>,
}

fn unsupported<T>(rule: &Rule, reason: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::Unsupported {
        rule: rule.id.clone(),
        reason: reason.into(),
    })
}

fn unattainable<T>(rule: &Rule, reason: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::Unattainable {
        rule: rule.id.clone(),
        reason: reason.into(),
    })
}

fn owned_columns(rule: &Rule, plan: &ViolationPlan) -> Result<Vec<ColumnRef>, SynthError> {
    if rule.filter.is_some() {
        return unsupported(rule, "rules with a `where` filter cannot be planned");
    }
    let own = |c: &String| ColumnRef::new(&rule.entity, c);
    Ok(match &rule.kind {
        RuleKind::Freshness {
            condition: Some(_), ..
        } => return unsupported(rule, "freshness rules with a condition cannot be planned"),
        RuleKind::Predicate { expr } => {
            if plan.comply.is_empty() || plan.violate.is_empty() {
                return unsupported(
                    rule,
                    "predicate plans need `comply` and `violate` column values",
                );
            }
            let cols: BTreeSet<&String> = plan.comply.keys().chain(plan.violate.keys()).collect();
            if let Some(c) = expr
                .columns()
                .into_iter()
                .find(|c| !cols.iter().any(|o| o.as_str() == *c))
            {
                return unsupported(
                    rule,
                    format!("column `{c}` of the predicate has no planned value"),
                );
            }
            let nulls = plan
                .comply
                .values()
                .chain(plan.violate.values())
                .any(|s| matches!(s, Scalar::Null(())));
            if rule.skip_null && nulls {
                return unsupported(rule, "planned nulls would be skipped");
            }
            cols.into_iter().map(own).collect()
        }
        _ => rule.targets(),
    })
}

impl<'a> Ctx<'a> {
    fn schema(&self, entity: &str) -> Result<&'a EntitySchema, SynthError> {
        self.catalog
            .entity(entity)
            .ok_or_else(|| SynthError::UnknownEntity(entity.into()))
    }

    fn rows(&self, entity: &str) -> usize {
        self.spec.rows.get(entity).copied().unwrap_or(0)
    }

    fn datatype(&self, c: &ColumnRef) -> Result<(DataType, bool), SynthError> {
        let col = self
            .schema(&c.entity)?
            .column(&c.column)
            .ok_or_else(|| SynthError::UnknownColumn(c.to_string()))?;
        Ok((col.datatype, col.nullable))
    }

    fn typed(&self, rule: &Rule, s: &Scalar, ty: DataType) -> Result<Value, SynthError> {
        s.to_value()
            .coerce(ty)
            .or_else(|e| unattainable(rule, e.to_string()))
    }

    /// Non-null values already generated for `c`.
    fn pool_of(&self, c: &ColumnRef) -> Result<Vec<Value>, SynthError> {
        let schema = self.schema(&c.entity)?;
        let idx = schema
            .column_index(&c.column)
            .ok_or_else(|| SynthError::UnknownColumn(c.to_string()))?;
        let cols = self
            .done
            .get(&c.entity)
            .ok_or_else(|| SynthError::Cycle(c.to_string()))?;
        let col = cols
            .get(idx)
            .filter(|v| !v.is_empty() || self.rows(&c.entity) == 0);
        let Some(col) = col else {
            return Err(SynthError::Cycle(c.to_string()));
        };
        let mut seen = HashSet::new();
        Ok(col
            .iter()
            .filter(|v| !v.is_null() && seen.insert(*v))
            .cloned()
            .collect())
    }

    fn generate_free(
        &self,
        c: &ColumnRef,
        ty: DataType,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Value>, SynthError> {
        let gen_err = |message: String| SynthError::Generator {
            column: c.to_string(),
            message,
        };
        let parse = |text: &str| Value::parse_as(text, ty).map_err(|e| gen_err(e.to_string()));
        let default;
        let g = match self.generators.get(c) {
            Some(g) => *g,
            None => {
                default = match ty {
                    DataType::Text => ColumnGen::Template {
                        template: "aaaaaaaa".into(),
                    },
                    DataType::Integer => ColumnGen::IntRange { min: 0, max: 999 },
                    DataType::Decimal => ColumnGen::DecimalRange { min: 0, max: 999 },
                    DataType::Boolean => ColumnGen::Boolean,
                    DataType::Timestamp => ColumnGen::TimestampWindow {
                        start: String::new(),
                        end: String::new(),
                    },
                };
                &default
            }
        };
        let mut out = Vec::with_capacity(n);
        match g {
            ColumnGen::Template { template } => {
                for _ in 0..n {
                    out.push(parse(&fill_template(template, rng))?);
                }
            }
            ColumnGen::Pool { values } => {
                if values.is_empty() && n > 0 {
                    return Err(gen_err("empty pool".into()));
                }
                let typed: Vec<Value> = values
                    .iter()
                    .map(|s| s.to_value().coerce(ty).map_err(|e| gen_err(e.to_string())))
                    .collect::<Result<_, _>>()?;
                for _ in 0..n {
                    out.push(typed[rng.gen_range(0..typed.len())].clone());
                }
            }
            ColumnGen::IntRange { min, max } => {
                if min > max {
                    return Err(gen_err("min exceeds max".into()));
                }
                for _ in 0..n {
                    out.push(
                        Value::Integer(rng.gen_range(*min..=*max))
                            .coerce(ty)
                            .map_err(|e| gen_err(e.to_string()))?,
                    );
                }
            }
            ColumnGen::DecimalRange { min, max } => {
                if min > max {
                    return Err(gen_err("min exceeds max".into()));
                }
                let (lo, hi) = (i128::from(*min) * 100, i128::from(*max) * 100);
                for _ in 0..n {
                    let d = Decimal::from_units(rng.gen_range(lo..=hi) * DECIMAL_STEP);
                    out.push(
                        Value::Decimal(d)
                            .coerce(ty)
                            .map_err(|e| gen_err(e.to_string()))?,
                    );
                }
            }
            ColumnGen::TimestampWindow { start, end } => {
                let at = |s: &str, fallback: Timestamp| {
                    if s.is_empty() {
                        Ok(fallback)
                    } else {
                        parse_timestamp(s)
                            .ok_or_else(|| gen_err(format!("`{s}` is not an RFC 3339 timestamp")))
                    }
                };
                let start = at(start, self.reference - chrono::TimeDelta::days(365))?;
                let end = at(end, self.reference)?;
                if start > end {
                    return Err(gen_err("window start is after its end".into()));
                }
                let span = (end - start).num_seconds();
                for _ in 0..n {
                    let t = start + chrono::TimeDelta::seconds(rng.gen_range(0..=span));
                    out.push(
                        Value::Timestamp(t)
                            .coerce(ty)
                            .map_err(|e| gen_err(e.to_string()))?,
                    );
                }
            }
            ColumnGen::Sequence {
                prefix,
                start,
                width,
            } => {
                for i in 0..n {
                    let k = start + i as i64;
                    out.push(parse(&format!("{prefix}{k:0width$}", width = *width))?);
                }
            }
            ColumnGen::Boolean => {
                for _ in 0..n {
                    out.push(
                        Value::Boolean(rng.gen_bool(0.5))
                            .coerce(ty)
                            .map_err(|e| gen_err(e.to_string()))?,
                    );
                }
            }
            ColumnGen::Constant { value } => {
                let v = value
                    .to_value()
                    .coerce(ty)
                    .map_err(|e| gen_err(e.to_string()))?;
                out = vec![v; n];
            }
            ColumnGen::Reference { column } => {
                let target: ColumnRef = column.parse().map_err(gen_err)?;
                let pool = self.pool_of(&target)?;
                if pool.is_empty() && n > 0 {
                    return Err(gen_err(format!("`{target}` has no values to reference")));
                }
                for _ in 0..n {
                    out.push(
                        pool[rng.gen_range(0..pool.len())]
                            .coerce(ty)
                            .map_err(|e| gen_err(e.to_string()))?,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Values of the column `c` owned by plan `p`.
    fn generate_owned(
        &self,
        p: &Plan<'a>,
        c: &ColumnRef,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Value>, SynthError> {
        let rule = p.rule;
        let (ty, nullable) = self.datatype(c)?;
        let bad = |i: usize| p.violating.contains(&i);
        let first_col = rule.columns.first().is_some_and(|f| *f == c.column);
        match &rule.kind {
            RuleKind::Syntax { pattern } | RuleKind::FormatClass { pattern, .. } => {
                let offset = self.cell_offset(p, c);
                let mut vals = self.generate_free(c, ty, n, rng)?;
                let violation = match &p.spec.violation {
                    Some(s) => self.typed(rule, s, ty)?,
                    None if ty == DataType::Text => Value::Text("#INVALID#".into()),
                    None => {
                        return unattainable(
                            rule,
                            format!("column `{c}` is {ty}; give an explicit violation value"),
                        )
                    }
                };
                if p.violating.iter().any(|&i| i >= offset && i < offset + n)
                    && pattern.is_full_match(&violation.to_string())
                {
                    return unattainable(
                        rule,
                        format!("violation `{violation}` matches the pattern"),
                    );
                }
                for (i, v) in vals.iter_mut().enumerate() {
                    if bad(offset + i) {
                        *v = violation.clone();
                    } else if v.is_null() || !pattern.is_full_match(&v.to_string()) {
                        return Err(SynthError::Generator {
                            column: c.to_string(),
                            message: format!(
                                "value `{v}` does not match the pattern of rule `{}`",
                                rule.id
                            ),
                        });
                    }
                }
                Ok(vals)
            }
            RuleKind::Range { min, max } => {
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    out.push(if bad(i) && first_col {
                        range_violation(rule, min, max, ty)?
                    } else {
                        range_value(rule, min, max, ty, rng)?
                    });
                }
                Ok(out)
            }
            RuleKind::Domain(DomainSource::Values(values)) => {
                let set: Vec<Value> = values
                    .iter()
                    .map(|v| v.coerce(ty))
                    .collect::<Result<_, _>>()
                    .or_else(|e| unattainable(rule, e.to_string()))?;
                let taken = Taken::new(&set);
                let violation = match &p.spec.violation {
                    Some(s) => self.typed(rule, s, ty)?,
                    None => taken.outside(rule, ty, 0)?,
                };
                if taken.contains(&violation) {
                    return unattainable(rule, format!("violation `{violation}` is in the domain"));
                }
                Ok((0..n)
                    .map(|i| {
                        if bad(i) && first_col {
                            violation.clone()
                        } else {
                            set[rng.gen_range(0..set.len())].clone()
                        }
                    })
                    .collect())
            }
            RuleKind::Domain(DomainSource::Reference(target))
            | RuleKind::ForeignKey { references: target } => {
                let pool = self.pool_of(target)?;
                if pool.is_empty() && n > p.violating.len() {
                    return unattainable(rule, format!("`{target}` has no values to reference"));
                }
                let taken = Taken::new(&pool);
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    out.push(if bad(i) {
                        match &p.spec.violation {
                            Some(s) => self.typed(rule, s, ty)?,
                            None => taken.outside(rule, ty, i)?,
                        }
                    } else {
                        pool[rng.gen_range(0..pool.len())].clone()
                    });
                }
                if let Some(v) = out
                    .iter()
                    .enumerate()
                    .find(|(i, v)| bad(*i) && taken.contains(v))
                {
                    return unattainable(rule, format!("violation `{}` exists in `{target}`", v.1));
                }
                Ok(out)
            }
            RuleKind::NotNull => {
                let mut vals = self.generate_free(c, ty, n, rng)?;
                for (i, v) in vals.iter_mut().enumerate() {
                    if bad(i) && first_col {
                        if !nullable {
                            return unattainable(rule, format!("column `{c}` is not nullable"));
                        }
                        *v = Value::Null;
                    } else if v.is_null() {
                        return unattainable(rule, format!("generator for `{c}` yields nulls"));
                    }
                }
                Ok(vals)
            }
            RuleKind::NoDefault { placeholders } => {
                let set: Vec<Value> = placeholders
                    .iter()
                    .map(|v| v.coerce(ty))
                    .collect::<Result<_, _>>()
                    .or_else(|e| unattainable(rule, e.to_string()))?;
                let violation = match &p.spec.violation {
                    Some(s) => self.typed(rule, s, ty)?,
                    None => set[0].clone(),
                };
                let mut vals = self.generate_free(c, ty, n, rng)?;
                for (i, v) in vals.iter_mut().enumerate() {
                    if bad(i) && first_col {
                        *v = violation.clone();
                    } else if v.is_null() || set.contains(v) {
                        return unattainable(
                            rule,
                            format!(
                                "generator for `{c}` yields `{v}`, which is not a compliant value"
                            ),
                        );
                    }
                }
                Ok(vals)
            }
            RuleKind::Unique { key } => {
                // Distinct values in the first key column make every
                // compliant tuple unique; duplicates are copied afterwards.
                if key.first() == Some(&c.column) {
                    distinct_values(rule, c, ty, n, self.generators.get(c).copied())
                } else {
                    let vals = self.generate_free(c, ty, n, rng)?;
                    if vals.iter().any(Value::is_null) {
                        return unattainable(rule, format!("generator for `{c}` yields nulls"));
                    }
                    Ok(vals)
                }
            }
            RuleKind::Predicate { .. } => {
                let pick = |m: &BTreeMap<String, Scalar>, fallback: &BTreeMap<String, Scalar>| {
                    m.get(&c.column)
                        .or_else(|| fallback.get(&c.column))
                        .cloned()
                        .unwrap_or(Scalar::Null(()))
                };
                let good = self.typed(rule, &pick(&p.spec.comply, &p.spec.violate), ty)?;
                let poor = self.typed(rule, &pick(&p.spec.violate, &p.spec.comply), ty)?;
                if (good.is_null() || poor.is_null()) && !nullable {
                    return unattainable(rule, format!("column `{c}` is not nullable"));
                }
                Ok((0..n)
                    .map(|i| if bad(i) { poor.clone() } else { good.clone() })
                    .collect())
            }
            RuleKind::Freshness { max_age, .. } => {
                let age = max_age.seconds() as i64;
                Ok((0..n)
                    .map(|i| {
                        let back = if bad(i) {
                            age + 1 + rng.gen_range(0..=30 * DAY)
                        } else {
                            rng.gen_range(0..=age)
                        };
                        Value::Timestamp(self.reference - chrono::TimeDelta::seconds(back))
                    })
                    .collect())
            }
            RuleKind::Frequency { max_gap, .. } => {
                let gap = max_gap.seconds() as i64;
                let step = (gap / 2).max(1);
                let violate = !p.violating.is_empty();
                let total = step * n as i64 + if violate { gap + 1 } else { 0 };
                let base = self.reference - chrono::TimeDelta::seconds(total);
                Ok((0..n)
                    .map(|i| {
                        let extra = if violate && i >= n / 2 { gap + 1 } else { 0 };
                        Value::Timestamp(base + chrono::TimeDelta::seconds(step * i as i64 + extra))
                    })
                    .collect())
            }
            RuleKind::MinCount { .. } => unreachable!("min_count owns no columns"),
        }
    }

    /// Index of the first cell of `c` among a `format_class` rule's items.
    fn cell_offset(&self, p: &Plan<'a>, c: &ColumnRef) -> usize {
        let mut offset = 0;
        for t in p.rule.targets() {
            if t == *c {
                return offset;
            }
            offset += self.rows(&t.entity);
        }
        offset
    }
}

fn fill_template(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(template.len());
    let mut chars = template.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '#' => out.push(char::from(b'0' + rng.gen_range(0..10u8))),
            'A' => out.push(char::from(b'A' + rng.gen_range(0..26u8))),
            'a' => out.push(char::from(b'a' + rng.gen_range(0..26u8))),
            '\\' => {
                if let Some(next) = chars.next() {
                    out.push(next);
                }
            }
            other => out.push(other),
        }
    }
    out
}

fn distinct_values(
    rule: &Rule,
    c: &ColumnRef,
    ty: DataType,
    n: usize,
    gen: Option<&ColumnGen>,
) -> Result<Vec<Value>, SynthError> {
    let (prefix, start, width) = match gen {
        Some(ColumnGen::Sequence {
            prefix,
            start,
            width,
        }) => (prefix.as_str(), *start, *width),
        _ => ("K", 1, 8),
    };
    (0..n)
        .map(|i| {
            let k = start + i as i64;
            match ty {
                DataType::Text => Ok(Value::Text(format!("{prefix}{k:0width$}"))),
                DataType::Integer => Ok(Value::Integer(k)),
                DataType::Decimal => Ok(Value::Decimal(Decimal::from_i64(k))),
                DataType::Timestamp => Ok(Value::Timestamp(
                    Timestamp::UNIX_EPOCH + chrono::TimeDelta::seconds(k),
                )),
                DataType::Boolean => unsupported(
                    rule,
                    format!("boolean key column `{c}` cannot hold distinct values"),
                ),
            }
        })
        .collect()
}

/// Values of one column, for producing values that are not among them.
struct Taken {
    set: HashSet<Value>,
    max: Option<Value>,
}

impl Taken {
    fn new(values: &[Value]) -> Self {
        let max = values
            .iter()
            .filter(|v| !matches!(v, Value::Text(_) | Value::Boolean(_)))
            .max_by(|a, b| a.compare(b).unwrap_or(core::cmp::Ordering::Equal))
            .cloned();
        Taken {
            set: values.iter().cloned().collect(),
            max,
        }
    }

    fn contains(&self, v: &Value) -> bool {
        self.set.contains(v)
    }

    /// A value of type `ty` not taken, varying with `k`.
    fn outside(&self, rule: &Rule, ty: DataType, k: usize) -> Result<Value, SynthError> {
        let v = match (ty, &self.max) {
            (DataType::Text, _) => {
                let mut s = format!("#ORPHAN-{k}#");
                while self.contains(&Value::Text(s.clone())) {
                    s.push('#');
                }
                Value::Text(s)
            }
            (DataType::Integer, max) => {
                let max = if let Some(Value::Integer(i)) = max {
                    *i
                } else {
                    0
                };
                Value::Integer(max.saturating_add(1 + k as i64))
            }
            (DataType::Decimal, max) => {
                let max = if let Some(Value::Decimal(d)) = max {
                    d.units()
                } else {
                    0
                };
                let whole = max.div_euclid(DECIMAL_STEP * 100) + 1 + k as i128;
                Value::Decimal(Decimal::from_units(whole * DECIMAL_STEP * 100))
            }
            (DataType::Timestamp, max) => {
                let max = if let Some(Value::Timestamp(t)) = max {
                    *t
                } else {
                    Timestamp::UNIX_EPOCH
                };
                Value::Timestamp(
                    max + chrono::TimeDelta::days(1) + chrono::TimeDelta::seconds(k as i64),
                )
            }
            (DataType::Boolean, _) => {
                match [true, false]
                    .into_iter()
                    .map(Value::Boolean)
                    .find(|b| !self.contains(b))
                {
                    Some(b) => b,
                    None => return unattainable(rule, "both boolean values are allowed"),
                }
            }
        };
        Ok(v)
    }
}

/// Numeric view of a bound in a range rule: integer, hundredths of a
/// decimal, or seconds of a timestamp.
fn bound_number(rule: &Rule, b: &Bound, ty: DataType) -> Result<i128, SynthError> {
    match b.value.coerce(ty) {
        Ok(Value::Integer(i)) => Ok(i128::from(i)),
        Ok(Value::Decimal(d)) => Ok(d.units()),
        Ok(Value::Timestamp(t)) => Ok(i128::from(t.timestamp())),
        Ok(_) => unsupported(rule, format!("range over {ty} columns cannot be planned")),
        Err(e) => unattainable(rule, e.to_string()),
    }
}

fn number_value(n: i128, ty: DataType) -> Value {
    match ty {
        DataType::Integer => Value::Integer(n as i64),
        DataType::Decimal => Value::Decimal(Decimal::from_units(n)),
        _ => Value::Timestamp(Timestamp::UNIX_EPOCH + chrono::TimeDelta::seconds(n as i64)),
    }
}

/// Granularity used when picking compliant values and stepping outside.
fn unit(ty: DataType) -> i128 {
    match ty {
        DataType::Decimal => DECIMAL_STEP,
        DataType::Timestamp => 1,
        _ => 1,
    }
}

fn range_value(
    rule: &Rule,
    min: &Option<Bound>,
    max: &Option<Bound>,
    ty: DataType,
    rng: &mut ChaCha8Rng,
) -> Result<Value, SynthError> {
    let u = unit(ty);
    let spread = match ty {
        DataType::Timestamp => 365 * i128::from(DAY),
        _ => 1000 * u,
    };
    let lo = min
        .as_ref()
        .map(|b| Ok::<_, SynthError>((bound_number(rule, b, ty)?, b.inclusive)))
        .transpose()?;
    let hi = max
        .as_ref()
        .map(|b| Ok::<_, SynthError>((bound_number(rule, b, ty)?, b.inclusive)))
        .transpose()?;
    // Work on multiples of the unit strictly inside or on the bounds.
    let first = |(v, incl): (i128, bool)| {
        let c = v.div_euclid(u) + i128::from(v.rem_euclid(u) != 0);
        if !incl && c * u == v {
            c + 1
        } else {
            c
        }
    };
    let last = |(v, incl): (i128, bool)| {
        let c = v.div_euclid(u);
        if !incl && c * u == v {
            c - 1
        } else {
            c
        }
    };
    let (a, b) = match (lo, hi) {
        (Some(l), Some(h)) => (first(l), last(h)),
        (Some(l), None) => (first(l), first(l) + spread / u),
        (None, Some(h)) => (last(h) - spread / u, last(h)),
        (None, None) => return unsupported(rule, "range without bounds"),
    };
    if a > b {
        return unattainable(
            rule,
            "no value on the generation grid lies inside the range",
        );
    }
    Ok(number_value(rng.gen_range(a..=b) * u, ty))
}

fn range_violation(
    rule: &Rule,
    min: &Option<Bound>,
    max: &Option<Bound>,
    ty: DataType,
) -> Result<Value, SynthError> {
    let step = match ty {
        DataType::Decimal => DECIMAL_STEP * 100,
        DataType::Timestamp => i128::from(DAY),
        _ => 1,
    };
    if let Some(b) = min {
        let v = bound_number(rule, b, ty)?;
        return Ok(number_value(if b.inclusive { v - step } else { v }, ty));
    }
    if let Some(b) = max {
        let v = bound_number(rule, b, ty)?;
        return Ok(number_value(if b.inclusive { v + step } else { v }, ty));
    }
    unsupported(rule, "range without bounds")
}

/// Entities in an order where every referenced entity comes first.
fn entity_order(ctx: &Ctx<'_>) -> Result<Vec<String>, SynthError> {
    let mut deps: BTreeMap<String, BTreeSet<String>> = ctx
        .catalog
        .entities()
        .iter()
        .map(|e| (e.name.clone(), BTreeSet::new()))
        .collect();
    for p in &ctx.plans {
        if let RuleKind::Domain(DomainSource::Reference(t))
        | RuleKind::ForeignKey { references: t } = &p.rule.kind
        {
            if t.entity != p.rule.entity {
                deps.get_mut(&p.rule.entity)
                    .unwrap()
                    .insert(t.entity.clone());
            }
        }
    }
    for (c, g) in &ctx.generators {
        if let ColumnGen::Reference { column } = g {
            let t: ColumnRef = column.parse().map_err(|m| SynthError::Generator {
                column: c.to_string(),
                message: m,
            })?;
            if t.entity != c.entity {
                deps.get_mut(&c.entity).unwrap().insert(t.entity);
            }
        }
    }
    let mut order = Vec::new();
    let mut placed = BTreeSet::new();
    while placed.len() < deps.len() {
        let ready: Vec<String> = deps
            .iter()
            .filter(|(e, d)| !placed.contains(*e) && d.iter().all(|x| placed.contains(x)))
            .map(|(e, _)| e.clone())
            .collect();
        if ready.is_empty() {
            let rest: Vec<&str> = deps
                .keys()
                .filter(|e| !placed.contains(*e))
                .map(String::as_str)
                .collect();
            return Err(SynthError::Cycle(rest.join(", ")));
        }
        for e in ready {
            placed.insert(e.clone());
            order.push(e);
        }
    }
    Ok(order)
}

fn is_reference_column(ctx: &Ctx<'_>, c: &ColumnRef) -> bool {
    let by_plan = ctx.owner.get(c).is_some_and(|&i| {
        matches!(
            ctx.plans[i].rule.kind,
            RuleKind::Domain(DomainSource::Reference(_)) | RuleKind::ForeignKey { .. }
        )
    });
    by_plan || matches!(ctx.generators.get(c), Some(ColumnGen::Reference { .. }))
}

/// Builds the snapshot described by `spec` and the expected measure of
/// every planned rule. Output depends only on the inputs.
pub fn generate(
    spec: &SynthSpec,
    catalog: &SchemaCatalog,
    rs: &RuleSet,
) -> Result<Generated, SynthError> {
    for e in spec.rows.keys() {
        if catalog.entity(e).is_none() {
            return Err(SynthError::UnknownEntity(e.clone()));
        }
    }
    let mut ctx = Ctx {
        spec,
        catalog,
        reference: rs.reference_time(),
        generators: BTreeMap::new(),
        owner: BTreeMap::new(),
        plans: Vec::new(),
        done: BTreeMap::new(),
    };
    for (name, g) in &spec.generators {
        let c: ColumnRef = name
            .parse()
            .map_err(|_| SynthError::UnknownColumn(name.clone()))?;
        ctx.datatype(&c)?;
        ctx.generators.insert(c, g);
    }
    let mut seen = BTreeSet::new();
    for vp in &spec.plan {
        let rule = rs
            .rule(&vp.rule)
            .ok_or_else(|| SynthError::UnknownRule(vp.rule.clone()))?;
        if !seen.insert(vp.rule.as_str()) {
            return Err(SynthError::DuplicatePlan {
                rule: vp.rule.clone(),
            });
        }
        if !(0.0..=1.0).contains(&vp.rate) {
            return Err(SynthError::BadRate {
                rule: vp.rule.clone(),
                rate: vp.rate,
            });
        }
        let owned = owned_columns(rule, vp)?;
        for c in &owned {
            ctx.datatype(c)?;
            if let Some(&prev) = ctx.owner.get(c) {
                return Err(SynthError::ConflictingPlan {
                    column: c.to_string(),
                    first: ctx.plans[prev].rule.id.clone(),
                    second: rule.id.clone(),
                });
            }
            ctx.owner.insert(c.clone(), ctx.plans.len());
        }
        let n = ctx.rows(&rule.entity);
        let items = match &rule.kind {
            RuleKind::MinCount { .. } => 1,
            RuleKind::Frequency { .. } => usize::from(n >= 2),
            RuleKind::FormatClass { .. } => owned.iter().map(|c| ctx.rows(&c.entity)).sum(),
            _ => n,
        };
        let v = violation_count(vp.rate, items);
        let violating: BTreeSet<usize> = match &rule.kind {
            RuleKind::MinCount { threshold } => {
                let fails = (n as u64) < *threshold;
                if usize::from(fails) != v {
                    return unattainable(
                        rule,
                        format!(
                            "{n} rows against threshold {threshold} cannot give {v} violation(s)"
                        ),
                    );
                }
                (0..v).collect()
            }
            RuleKind::Unique { .. } if v == 1 => {
                return unattainable(
                    rule,
                    "a single duplicated row is impossible; duplicates come at least in pairs",
                )
            }
            _ => sample(&mut rng_for(spec.seed, &["plan", &rule.id]), items, v)
                .into_iter()
                .collect(),
        };
        ctx.plans.push(Plan {
            rule,
            spec: vp,
            violating,
            items,
        });
    }

    for entity in entity_order(&ctx)? {
        let schema = ctx.schema(&entity)?;
        let n = ctx.rows(&entity);
        let mut columns: Vec<Vec<Value>> = vec![Vec::new(); schema.columns.len()];
        ctx.done.insert(entity.clone(), columns.clone());
        let refs: Vec<ColumnRef> = schema
            .columns
            .iter()
            .map(|c| ColumnRef::new(&entity, &c.name))
            .collect();
        let (late, early): (Vec<usize>, Vec<usize>) =
            (0..refs.len()).partition(|&i| is_reference_column(&ctx, &refs[i]));
        for i in early.into_iter().chain(late) {
            let c = &refs[i];
            let mut rng = rng_for(spec.seed, &["cell", &c.entity, &c.column]);
            let ty = schema.columns[i].datatype;
            let vals = match ctx.owner.get(c) {
                Some(&p) => ctx.generate_owned(&ctx.plans[p], c, n, &mut rng)?,
                None => ctx.generate_free(c, ty, n, &mut rng)?,
            };
            columns[i] = vals;
            ctx.done.get_mut(&entity).unwrap()[i] = columns[i].clone();
        }
        // Duplicate key tuples for unique rules once all key columns exist.
        for p in ctx.plans.iter().filter(|p| p.rule.entity == entity) {
            if let RuleKind::Unique { key } = &p.rule.kind {
                let idx: Vec<usize> = key.iter().filter_map(|k| schema.column_index(k)).collect();
                let rows: Vec<usize> = p.violating.iter().copied().collect();
                let mut start = 0;
                while start < rows.len() {
                    let size = if rows.len() - start == 3 { 3 } else { 2 };
                    let leader = rows[start];
                    for &r in &rows[start + 1..start + size] {
                        for &k in &idx {
                            columns[k][r] = columns[k][leader].clone();
                        }
                    }
                    start += size;
                }
            }
        }
        ctx.done.insert(entity.clone(), columns);
    }

    let mut entities = Vec::new();
    for schema in catalog.entities() {
        let cols = ctx.done.remove(&schema.name).unwrap_or_default();
        let entity = Entity::new(schema.clone(), cols).map_err(|e| SynthError::Generator {
            column: schema.name.clone(),
            message: e.to_string(),
        })?;
        entities.push(entity);
    }
    let expected = ctx
        .plans
        .iter()
        .map(|p| {
            let b = p.items as u64;
            (
                p.rule.id.clone(),
                Expected {
                    a: b - p.violating.len() as u64,
                    b,
                },
            )
        })
        .collect();
    Ok(Generated { entities, expected })
}
