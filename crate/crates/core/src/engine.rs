//! Rule evaluation: base measures `A` (compliant items) over `B`
//! (applicable items), with references to every non-compliant record.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use hashbrown::{HashMap, HashSet};

use crate::expr::{BoundExpr, EvalContext, Expr};
use crate::pattern::Pattern;
use crate::rules::{DomainSource, KindTag, Rule, RuleKind, RuleSet};
use crate::table::{index_column, ColumnIndex, Entity, Repository};
use crate::taxonomy::PropertyId;
use crate::value::{Timestamp, Value};

/// A non-compliant record: entity, row ordinal (file order, from 0) and the
/// rendered values of the entity's key columns (empty when it has no key).
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct RecordRef {
    pub entity: String,
    pub ordinal: usize,
    pub key: Vec<String>,
}

/// `A / B` kept as exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ratio {
    Exact { a: u64, b: u64 },
    NotApplicable,
}

impl Ratio {
    pub fn of(a: u64, b: u64) -> Ratio {
        if b == 0 {
            Ratio::NotApplicable
        } else {
            Ratio::Exact { a, b }
        }
    }

    pub fn to_f64(self) -> Option<f64> {
        match self {
            Ratio::Exact { a, b } => Some(a as f64 / b as f64),
            Ratio::NotApplicable => None,
        }
    }

    /// Decimal rendering rounded half-up to `places` digits, computed on
    /// integers so no float rounding leaks in.
    pub fn render(self, places: u32) -> Option<String> {
        let Ratio::Exact { a, b } = self else {
            return None;
        };
        let scale = 10u128.pow(places);
        let scaled = (a as u128 * scale * 2 + b as u128) / (b as u128 * 2);
        let int = scaled / scale;
        if places == 0 {
            return Some(int.to_string());
        }
        let frac = scaled % scale;
        Some(format!("{int}.{frac:0width$}", width = places as usize))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render(4) {
            Some(s) => f.write_str(&s),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RuleMeasure {
    pub rule_id: String,
    pub entity: String,
    pub property: PropertyId,
    pub kind: KindTag,
    pub a: u64,
    pub b: u64,
    /// Sorted by (entity, ordinal). Rows may repeat for `format_class`
    /// rules whose targets share an entity.
    pub failing: Vec<RecordRef>,
    pub elapsed: Duration,
}

impl RuleMeasure {
    pub fn ratio(&self) -> Ratio {
        Ratio::of(self.a, self.b)
    }

    pub fn is_applicable(&self) -> bool {
        self.b > 0
    }
}

/// Equality ignores `elapsed`, which depends on the machine.
impl PartialEq for RuleMeasure {
    fn eq(&self, o: &Self) -> bool {
        self.rule_id == o.rule_id
            && self.entity == o.entity
            && self.property == o.property
            && self.kind == o.kind
            && self.a == o.a
            && self.b == o.b
            && self.failing == o.failing
    }
}

impl Eq for RuleMeasure {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureSet {
    pub measures: BTreeMap<String, RuleMeasure>,
    pub snapshot_fingerprint: String,
    pub ruleset_fingerprint: String,
}

impl MeasureSet {
    pub fn new(
        measures: Vec<RuleMeasure>,
        snapshot_fingerprint: String,
        ruleset_fingerprint: String,
    ) -> Self {
        MeasureSet {
            measures: measures
                .into_iter()
                .map(|m| (m.rule_id.clone(), m))
                .collect(),
            snapshot_fingerprint,
            ruleset_fingerprint,
        }
    }

    pub fn get(&self, rule_id: &str) -> Option<&RuleMeasure> {
        self.measures.get(rule_id)
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }
}

/// A validated rule that cannot be evaluated; always a pipeline bug.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule `{rule_id}`: {message}")]
pub struct EvalError {
    pub rule_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalErrors(pub Vec<EvalError>);

impl fmt::Display for EvalErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "evaluation failed for {} rule(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl core::error::Error for EvalErrors {}

enum CellCheck {
    Pattern(Pattern),
    Range {
        min: Option<(Value, bool)>,
        max: Option<(Value, bool)>,
    },
    InSet(HashSet<Value>),
    InIndex(ColumnIndex),
    Present,
    NotPlaceholder(HashSet<Value>),
    FreshSince {
        reference: Timestamp,
        max_age: chrono::TimeDelta,
    },
}

impl CellCheck {
    fn passes(&self, v: &Value) -> bool {
        if v.is_null() {
            return false;
        }
        match self {
            CellCheck::Pattern(p) => match v {
                Value::Text(s) => p.is_full_match(s),
                other => p.is_full_match(&other.to_string()),
            },
            CellCheck::Range { min, max } => {
                let above = min.as_ref().is_none_or(|(m, incl)| match v.compare(m) {
                    Some(core::cmp::Ordering::Greater) => true,
                    Some(core::cmp::Ordering::Equal) => *incl,
                    _ => false,
                });
                let below = max.as_ref().is_none_or(|(m, incl)| match v.compare(m) {
                    Some(core::cmp::Ordering::Less) => true,
                    Some(core::cmp::Ordering::Equal) => *incl,
                    _ => false,
                });
                above && below
            }
            CellCheck::InSet(set) => set.contains(v),
            CellCheck::InIndex(idx) => idx.contains(v),
            CellCheck::Present => true,
            CellCheck::NotPlaceholder(set) => !set.contains(v),
            CellCheck::FreshSince { reference, max_age } => match v {
                Value::Timestamp(t) => *reference - *t <= *max_age,
                _ => false,
            },
        }
    }
}

struct Ctx<'a> {
    rule: &'a Rule,
    repo: &'a Repository,
    eval: EvalContext,
}

impl<'a> Ctx<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, EvalError> {
        Err(EvalError {
            rule_id: self.rule.id.clone(),
            message: message.into(),
        })
    }

    fn entity(&self, name: &str) -> Result<&'a Entity, EvalError> {
        match self.repo.entity(name) {
            Some(e) => Ok(e),
            None => self.err(format!("entity `{name}` is not loaded")),
        }
    }

    fn column(&self, entity: &Entity, name: &str) -> Result<usize, EvalError> {
        match entity.schema().column_index(name) {
            Some(i) => Ok(i),
            None => self.err(format!("column `{}.{name}` does not exist", entity.name())),
        }
    }

    fn bind(&self, expr: &Expr, entity: &Entity) -> Result<BoundExpr, EvalError> {
        BoundExpr::bind_predicate(expr, entity.schema())
            .or_else(|e| self.err(format!("expression does not bind: {e}")))
    }

    fn literal_set(
        &self,
        values: &[Value],
        entity: &Entity,
        col: usize,
    ) -> Result<HashSet<Value>, EvalError> {
        let ty = entity.schema().columns[col].datatype;
        values
            .iter()
            .map(|v| v.coerce(ty).or_else(|e| self.err(e.to_string())))
            .collect()
    }

    fn bound(
        &self,
        b: &Option<crate::rules::Bound>,
        entity: &Entity,
        col: usize,
    ) -> Result<Option<(Value, bool)>, EvalError> {
        let ty = entity.schema().columns[col].datatype;
        match b {
            None => Ok(None),
            Some(b) => match b.value.coerce(ty) {
                Ok(v) => Ok(Some((v, b.inclusive))),
                Err(e) => self.err(e.to_string()),
            },
        }
    }

    fn cell_check(&self, entity: &Entity, col: usize) -> Result<CellCheck, EvalError> {
        let rs_time = self.eval.reference_time;
        Ok(match &self.rule.kind {
            RuleKind::Syntax { pattern } | RuleKind::FormatClass { pattern, .. } => {
                CellCheck::Pattern(pattern.clone())
            }
            RuleKind::Range { min, max } => CellCheck::Range {
                min: self.bound(min, entity, col)?,
                max: self.bound(max, entity, col)?,
            },
            RuleKind::Domain(DomainSource::Values(values)) => {
                CellCheck::InSet(self.literal_set(values, entity, col)?)
            }
            RuleKind::Domain(DomainSource::Reference(target))
            | RuleKind::ForeignKey { references: target } => {
                let referenced = self.entity(&target.entity)?;
                match index_column(referenced, &target.column) {
                    Ok(idx) => CellCheck::InIndex(idx),
                    Err(e) => return self.err(e.to_string()),
                }
            }
            RuleKind::NotNull => CellCheck::Present,
            RuleKind::NoDefault { placeholders } => {
                CellCheck::NotPlaceholder(self.literal_set(placeholders, entity, col)?)
            }
            RuleKind::Freshness { max_age, .. } => CellCheck::FreshSince {
                reference: rs_time,
                max_age: max_age.to_chrono(),
            },
            _ => return self.err("kind has no per-cell check"),
        })
    }

    fn record(&self, entity: &Entity, ordinal: usize) -> RecordRef {
        let key = entity.schema().key_indexes();
        RecordRef {
            entity: entity.name().into(),
            ordinal,
            key: entity.key_values(ordinal, &key),
        }
    }
}

#[derive(Default)]
struct Tally {
    a: u64,
    b: u64,
    failing: Vec<(usize, usize)>,
}

impl Tally {
    fn item(&mut self, pass: bool, entity_slot: usize, ordinal: usize) {
        self.b += 1;
        if pass {
            self.a += 1;
        } else {
            self.failing.push((entity_slot, ordinal));
        }
    }
}

/// Evaluates one rule. The rule must have passed validation against the
/// repository's catalog; anything unresolvable is reported as [`EvalError`].
pub fn eval_rule(rule: &Rule, repo: &Repository, rs: &RuleSet) -> Result<RuleMeasure, EvalError> {
    let cx = Ctx {
        rule,
        repo,
        eval: EvalContext {
            reference_time: rs.reference_time(),
        },
    };
    let own = cx.entity(&rule.entity)?;
    let filter = rule.filter.as_ref().map(|f| cx.bind(f, own)).transpose()?;
    let applies = |ordinal: usize| {
        filter
            .as_ref()
            .is_none_or(|f| f.test(own.row(ordinal), &cx.eval))
    };

    // Entities referenced by failing items, indexed by slot.
    let mut entities: Vec<&Entity> = alloc::vec![own];
    let mut tally = Tally::default();

    match &rule.kind {
        RuleKind::Unique { key } => {
            let cols = key
                .iter()
                .map(|c| cx.column(own, c))
                .collect::<Result<Vec<_>, _>>()?;
            let mut groups: HashMap<Vec<&Value>, u32> = HashMap::new();
            let mut rows = Vec::new();
            for i in 0..own.len() {
                if !applies(i) {
                    continue;
                }
                let vals: Vec<&Value> = cols.iter().map(|&c| own.cell(i, c)).collect();
                let has_null = vals.iter().any(|v| v.is_null());
                if has_null && rule.skip_null {
                    continue;
                }
                if !has_null {
                    *groups.entry(vals.clone()).or_default() += 1;
                }
                rows.push((i, vals, has_null));
            }
            for (i, vals, has_null) in rows {
                let pass = !has_null && groups[&vals] == 1;
                tally.item(pass, 0, i);
            }
        }
        RuleKind::MinCount { threshold } => {
            let count = (0..own.len()).filter(|&i| applies(i)).count() as u64;
            tally.b = 1;
            tally.a = u64::from(count >= *threshold);
        }
        RuleKind::Frequency {
            timestamp_column,
            max_gap,
        } => {
            let col = cx.column(own, timestamp_column)?;
            let mut stamps = Vec::new();
            let mut nulls = Vec::new();
            for i in (0..own.len()).filter(|&i| applies(i)) {
                match own.cell(i, col) {
                    Value::Timestamp(t) => stamps.push((*t, i)),
                    Value::Null => nulls.push(i),
                    _ => return cx.err(format!("column `{timestamp_column}` is not a timestamp")),
                }
            }
            if !nulls.is_empty() && !rule.skip_null {
                tally.b = 1;
                tally.failing = nulls.into_iter().map(|i| (0, i)).collect();
            } else if stamps.len() >= 2 {
                stamps.sort_unstable();
                let limit = max_gap.to_chrono();
                for w in stamps.windows(2) {
                    if w[1].0 - w[0].0 > limit {
                        tally.failing.push((0, w[1].1));
                    }
                }
                tally.b = 1;
                tally.a = u64::from(tally.failing.is_empty());
            }
        }
        RuleKind::Predicate { expr } => {
            let pred = cx.bind(expr, own)?;
            let null_cols: Vec<usize> = if rule.columns.is_empty() {
                expr.columns()
                    .iter()
                    .map(|c| cx.column(own, c))
                    .collect::<Result<_, _>>()?
            } else {
                rule.columns
                    .iter()
                    .map(|c| cx.column(own, c))
                    .collect::<Result<_, _>>()?
            };
            for i in 0..own.len() {
                if !applies(i)
                    || (rule.skip_null && null_cols.iter().any(|&c| own.cell(i, c).is_null()))
                {
                    continue;
                }
                tally.item(pred.test(own.row(i), &cx.eval), 0, i);
            }
        }
        RuleKind::FormatClass { .. } => {
            for target in rule.targets() {
                let entity = cx.entity(&target.entity)?;
                let col = cx.column(entity, &target.column)?;
                let check = cx.cell_check(entity, col)?;
                let is_own = target.entity == rule.entity;
                let slot = match entities.iter().position(|e| e.name() == entity.name()) {
                    Some(s) => s,
                    None => {
                        entities.push(entity);
                        entities.len() - 1
                    }
                };
                for i in 0..entity.len() {
                    if is_own && !applies(i) {
                        continue;
                    }
                    let v = entity.cell(i, col);
                    if rule.skip_null && v.is_null() {
                        continue;
                    }
                    tally.item(check.passes(v), slot, i);
                }
            }
        }
        RuleKind::Freshness {
            timestamp_column,
            condition,
            ..
        } => {
            let col = cx.column(own, timestamp_column)?;
            let check = cx.cell_check(own, col)?;
            let cond = condition.as_ref().map(|c| cx.bind(c, own)).transpose()?;
            for i in 0..own.len() {
                if !applies(i) || cond.as_ref().is_some_and(|c| !c.test(own.row(i), &cx.eval)) {
                    continue;
                }
                let v = own.cell(i, col);
                if rule.skip_null && v.is_null() {
                    continue;
                }
                tally.item(check.passes(v), 0, i);
            }
        }
        _ => {
            let checks = rule
                .columns
                .iter()
                .map(|c| {
                    let col = cx.column(own, c)?;
                    Ok((col, cx.cell_check(own, col)?))
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            let skip_null = rule.skip_null && !rule.kind.tag().tests_nulls();
            for i in 0..own.len() {
                if !applies(i)
                    || (skip_null && checks.iter().any(|(c, _)| own.cell(i, *c).is_null()))
                {
                    continue;
                }
                let pass = checks
                    .iter()
                    .all(|(c, check)| check.passes(own.cell(i, *c)));
                tally.item(pass, 0, i);
            }
        }
    }

    let mut failing: Vec<RecordRef> = tally
        .failing
        .into_iter()
        .map(|(slot, i)| cx.record(entities[slot], i))
        .collect();
    failing.sort();
    Ok(RuleMeasure {
        rule_id: rule.id.clone(),
        entity: rule.entity.clone(),
        property: rule.property,
        kind: rule.kind.tag(),
        a: tally.a,
        b: tally.b,
        failing,
        elapsed: Duration::ZERO,
    })
}

/// Evaluates every rule sequentially. Errors from all failing rules are
/// collected rather than stopping at the first.
pub fn eval_all(
    rs: &RuleSet,
    repo: &Repository,
    snapshot_fingerprint: String,
    ruleset_fingerprint: String,
) -> Result<MeasureSet, EvalErrors> {
    collect(
        rs.rules().iter().map(|r| eval_rule(r, repo, rs)),
        snapshot_fingerprint,
        ruleset_fingerprint,
    )
}

/// Assembles per-rule results (in any order) into a [`MeasureSet`].
pub fn collect(
    results: impl IntoIterator<Item = Result<RuleMeasure, EvalError>>,
    snapshot_fingerprint: String,
    ruleset_fingerprint: String,
) -> Result<MeasureSet, EvalErrors> {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(m) => ok.push(m),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(MeasureSet::new(
            ok,
            snapshot_fingerprint,
            ruleset_fingerprint,
        ))
    } else {
        errors.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
        Err(EvalErrors(errors))
    }
}
