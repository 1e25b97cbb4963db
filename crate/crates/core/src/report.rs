//! Evaluation reports, improvement manifests and report comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{MeasureSet, RecordRef, RuleMeasure};
use crate::expr::{BinaryOp, Expr, Function};
use crate::rules::{DomainSource, KindTag, Rule, RuleKind, RuleSet};
use crate::scoring::{CharacteristicResult, PropertyScore, Scores, ScoringConfig, Verdict};
use crate::table::Repository;
use crate::taxonomy::{CharacteristicId, PropertyId};
use crate::value::{format_timestamp, DataType, Timestamp, Value};

/// Failing references kept per rule in reports; counts are never capped.
pub const REF_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("report and measures come from different inputs ({what} fingerprint differs)")]
    FingerprintMismatch { what: &'static str },
    #[error("reports evaluate different rule sets (`{first}` vs `{second}`)")]
    RulesetMismatch { first: String, second: String },
    #[error("reports share no evaluated characteristic")]
    ScopeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub ruleset_name: String,
    pub ruleset_version: String,
    pub ruleset_fingerprint: String,
    pub snapshot_fingerprint: String,
    pub reference_time: String,
    pub tool_version: String,
    pub config: ScoringConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scope {
    pub entity_count: usize,
    pub row_counts: BTreeMap<String, usize>,
    pub rule_counts: BTreeMap<CharacteristicId, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSummary {
    pub entity: String,
    pub property: PropertyId,
    pub kind: KindTag,
    pub a: u64,
    pub b: u64,
    /// `A/B` to four decimals; `None` when not applicable.
    pub ratio: Option<String>,
    pub failing_count: u64,
    pub failing: Vec<RecordRef>,
    pub truncated: bool,
}

impl MeasureSummary {
    pub fn of(m: &RuleMeasure) -> Self {
        MeasureSummary {
            entity: m.entity.clone(),
            property: m.property,
            kind: m.kind,
            a: m.a,
            b: m.b,
            ratio: m.ratio().render(4),
            failing_count: m.failing.len() as u64,
            failing: m.failing.iter().take(REF_CAP).cloned().collect(),
            truncated: m.failing.len() > REF_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub metadata: Metadata,
    pub scope: Scope,
    pub measures: BTreeMap<String, MeasureSummary>,
    pub properties: Vec<PropertyScore>,
    pub characteristics: Vec<CharacteristicResult>,
    pub verdict: Verdict,
}

impl EvaluationReport {
    pub fn property(&self, p: PropertyId) -> Option<&PropertyScore> {
        self.properties.iter().find(|s| s.property == p)
    }

    pub fn characteristic(&self, c: CharacteristicId) -> Option<&CharacteristicResult> {
        self.characteristics.iter().find(|r| r.characteristic == c)
    }

    pub fn level(&self, c: CharacteristicId) -> Option<u8> {
        self.characteristic(c).and_then(|r| r.level)
    }
}

pub fn build_report(
    rs: &RuleSet,
    repo: &Repository,
    ms: &MeasureSet,
    scores: &Scores,
    config: &ScoringConfig,
    tool_version: &str,
) -> EvaluationReport {
    let mut rule_counts = rs.counts_by_characteristic();
    rule_counts.retain(|_, n| *n > 0);
    EvaluationReport {
        metadata: Metadata {
            ruleset_name: rs.name().into(),
            ruleset_version: rs.version().into(),
            ruleset_fingerprint: ms.ruleset_fingerprint.clone(),
            snapshot_fingerprint: ms.snapshot_fingerprint.clone(),
            reference_time: format_timestamp(&rs.reference_time()),
            tool_version: tool_version.into(),
            config: config.clone(),
        },
        scope: Scope {
            entity_count: repo.catalog().entities().len(),
            row_counts: repo
                .entities()
                .map(|e| (e.name().to_string(), e.len()))
                .collect(),
            rule_counts,
        },
        measures: ms
            .measures
            .iter()
            .map(|(id, m)| (id.clone(), MeasureSummary::of(m)))
            .collect(),
        properties: scores.properties.clone(),
        characteristics: scores.characteristics.clone(),
        verdict: scores.verdict.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRule {
    pub rule_id: String,
    pub kind: KindTag,
    pub description: String,
    pub a: u64,
    pub b: u64,
    /// Failing records of this rule located in the manifest's entity.
    pub failing_count: u64,
    pub failing: Vec<RecordRef>,
    pub truncated: bool,
    /// Expression over the manifest's entity that holds exactly on the
    /// failing rows; `None` for kinds whose outcome depends on other rows.
    pub selector: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImprovementManifest {
    pub entity: String,
    pub property: PropertyId,
    pub characteristic: CharacteristicId,
    pub property_level: Option<u8>,
    pub weakness: bool,
    pub rules: Vec<ManifestRule>,
}

impl ImprovementManifest {
    pub fn file_name(&self) -> String {
        alloc::format!("{}.{}.manifest.json", self.entity, self.property)
    }
}

/// One manifest per (entity, property) that has failing rules, in
/// (entity, property) order.
pub fn build_improvement(
    report: &EvaluationReport,
    ms: &MeasureSet,
    rs: &RuleSet,
    repo: &Repository,
) -> Result<Vec<ImprovementManifest>, ReportError> {
    if report.metadata.snapshot_fingerprint != ms.snapshot_fingerprint {
        return Err(ReportError::FingerprintMismatch { what: "snapshot" });
    }
    if report.metadata.ruleset_fingerprint != ms.ruleset_fingerprint {
        return Err(ReportError::FingerprintMismatch { what: "ruleset" });
    }
    let mut groups: BTreeMap<(String, PropertyId), Vec<ManifestRule>> = BTreeMap::new();
    for rule in rs.rules() {
        let Some(m) = ms.get(&rule.id) else { continue };
        if m.a == m.b && m.failing.is_empty() {
            continue;
        }
        let mut by_entity: BTreeMap<&str, Vec<&RecordRef>> = BTreeMap::new();
        for r in &m.failing {
            by_entity.entry(r.entity.as_str()).or_default().push(r);
        }
        if by_entity.is_empty() {
            by_entity.insert(&rule.entity, Vec::new());
        }
        for (entity, refs) in by_entity {
            groups
                .entry((entity.to_string(), rule.property))
                .or_default()
                .push(ManifestRule {
                    rule_id: rule.id.clone(),
                    kind: rule.kind.tag(),
                    description: rule.description.clone(),
                    a: m.a,
                    b: m.b,
                    failing_count: refs.len() as u64,
                    failing: refs.iter().take(REF_CAP).map(|r| (*r).clone()).collect(),
                    truncated: refs.len() > REF_CAP,
                    selector: selector(rule, entity, repo, rs.reference_time())
                        .map(|e| e.to_string()),
                });
        }
    }
    Ok(groups
        .into_iter()
        .map(|((entity, property), rules)| {
            let property_level = report.property(property).and_then(|p| p.level);
            ImprovementManifest {
                entity,
                property,
                characteristic: property.characteristic(),
                property_level,
                weakness: property_level.is_some_and(|l| l <= 2),
                rules,
            }
        })
        .collect())
}

fn and(a: Expr, b: Expr) -> Expr {
    Expr::binary(BinaryOp::And, a, b)
}

fn all(parts: Vec<Expr>) -> Option<Expr> {
    parts.into_iter().reduce(and)
}

fn is_null(e: Expr, negated: bool) -> Expr {
    Expr::IsNull {
        expr: alloc::boxed::Box::new(e),
        negated,
    }
}

/// Selector for the rows of `entity` that fail `rule`, mirroring the
/// engine: rows where `where` is true, not skipped for nulls, and whose
/// check is false or null.
fn selector(rule: &Rule, entity: &str, repo: &Repository, reference: Timestamp) -> Option<Expr> {
    let schema = repo.catalog().entity(entity)?;
    let own = entity == rule.entity;
    let col = Expr::column;
    let text_cols = |cols: &[&str]| {
        cols.iter().all(|c| {
            schema
                .column(c)
                .is_some_and(|s| s.datatype == DataType::Text)
        })
    };
    let mut skip_cols: Vec<&str> = Vec::new();
    let mut guard: Vec<Expr> = Vec::new();
    let check = match &rule.kind {
        RuleKind::Syntax { pattern } => {
            let cols: Vec<&str> = rule.columns.iter().map(String::as_str).collect();
            if !text_cols(&cols) {
                return None;
            }
            skip_cols = cols.clone();
            all(cols
                .iter()
                .map(|c| regex(col(c), pattern.source()))
                .collect())?
        }
        RuleKind::FormatClass {
            pattern,
            extra_targets,
            ..
        } => {
            let mut cols: Vec<&str> = if own {
                rule.columns.iter().map(String::as_str).collect()
            } else {
                Vec::new()
            };
            cols.extend(
                extra_targets
                    .iter()
                    .filter(|t| t.entity == entity)
                    .map(|t| t.column.as_str()),
            );
            if !text_cols(&cols) || cols.len() != 1 {
                // Several cells of one row are separate items; a row-level
                // selector would merge them.
                return None;
            }
            skip_cols = cols.clone();
            regex(col(cols[0]), pattern.source())
        }
        RuleKind::Range { min, max } => {
            let cols: Vec<&str> = rule.columns.iter().map(String::as_str).collect();
            skip_cols = cols.clone();
            let mut parts = Vec::new();
            for c in &cols {
                let ty = schema.column(c)?.datatype;
                if let Some(b) = min {
                    let op = if b.inclusive {
                        BinaryOp::Ge
                    } else {
                        BinaryOp::Gt
                    };
                    parts.push(Expr::binary(
                        op,
                        col(c),
                        Expr::Literal(b.value.coerce(ty).ok()?),
                    ));
                }
                if let Some(b) = max {
                    let op = if b.inclusive {
                        BinaryOp::Le
                    } else {
                        BinaryOp::Lt
                    };
                    parts.push(Expr::binary(
                        op,
                        col(c),
                        Expr::Literal(b.value.coerce(ty).ok()?),
                    ));
                }
            }
            all(parts)?
        }
        RuleKind::Domain(DomainSource::Values(values)) => {
            let cols: Vec<&str> = rule.columns.iter().map(String::as_str).collect();
            skip_cols = cols.clone();
            let mut parts = Vec::new();
            for c in &cols {
                let ty = schema.column(c)?.datatype;
                let mut args = alloc::vec![col(c)];
                for v in values {
                    args.push(Expr::Literal(v.coerce(ty).ok()?));
                }
                parts.push(Expr::Call(Function::InSet, args));
            }
            all(parts)?
        }
        RuleKind::NotNull => all(rule.columns.iter().map(|c| is_null(col(c), true)).collect())?,
        RuleKind::NoDefault { placeholders } => {
            let mut parts = Vec::new();
            for c in &rule.columns {
                let ty = schema.column(c)?.datatype;
                let mut args = alloc::vec![col(c)];
                for v in placeholders {
                    args.push(Expr::Literal(v.coerce(ty).ok()?));
                }
                parts.push(and(
                    is_null(col(c), true),
                    Expr::not(Expr::Call(Function::InSet, args)),
                ));
            }
            all(parts)?
        }
        RuleKind::Predicate { expr } => {
            skip_cols = if rule.columns.is_empty() {
                expr.columns()
            } else {
                rule.columns.iter().map(String::as_str).collect()
            };
            expr.clone()
        }
        RuleKind::Freshness {
            timestamp_column,
            max_age,
            condition,
        } => {
            skip_cols = alloc::vec![timestamp_column.as_str()];
            if let Some(c) = condition {
                guard.push(c.clone());
            }
            let oldest = reference - max_age.to_chrono();
            Expr::binary(
                BinaryOp::Ge,
                col(timestamp_column),
                Expr::Literal(Value::Timestamp(oldest)),
            )
        }
        RuleKind::Domain(DomainSource::Reference(_))
        | RuleKind::Unique { .. }
        | RuleKind::MinCount { .. }
        | RuleKind::ForeignKey { .. }
        | RuleKind::Frequency { .. } => return None,
    };
    let fails = Expr::binary(
        BinaryOp::Or,
        is_null(check.clone(), false),
        Expr::not(check),
    );
    let mut parts = Vec::new();
    if own {
        if let Some(w) = &rule.filter {
            parts.push(w.clone());
        }
    }
    parts.extend(guard);
    if rule.skip_null {
        parts.extend(skip_cols.iter().map(|c| is_null(col(c), true)));
    }
    parts.push(fails);
    all(parts)
}

fn regex(subject: Expr, pattern: &str) -> Expr {
    Expr::Call(
        Function::RegexMatch,
        alloc::vec![subject, Expr::Literal(Value::Text(pattern.into()))],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyDelta {
    pub property: PropertyId,
    pub first_value: Option<f64>,
    pub second_value: Option<f64>,
    pub value_delta: Option<f64>,
    pub first_level: Option<u8>,
    pub second_level: Option<u8>,
    pub level_delta: Option<i8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicDelta {
    pub characteristic: CharacteristicId,
    pub first_level: Option<u8>,
    pub second_level: Option<u8>,
    pub level_delta: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Eligible,
    NotEligible,
}

impl From<&Verdict> for VerdictStatus {
    fn from(v: &Verdict) -> Self {
        if v.is_eligible() {
            VerdictStatus::Eligible
        } else {
            VerdictStatus::NotEligible
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonReport {
    pub ruleset_name: String,
    pub first_version: String,
    pub second_version: String,
    pub properties: Vec<PropertyDelta>,
    pub characteristics: Vec<CharacteristicDelta>,
    pub added_properties: Vec<PropertyId>,
    pub removed_properties: Vec<PropertyId>,
    pub added_characteristics: Vec<CharacteristicId>,
    pub removed_characteristics: Vec<CharacteristicId>,
    /// Properties and characteristics whose value or level went down.
    pub regressions: Vec<String>,
    pub regression: bool,
    pub verdict: [VerdictStatus; 2],
}

fn level_delta(a: Option<u8>, b: Option<u8>) -> Option<i8> {
    Some(b? as i8 - a? as i8)
}

/// Differences `second − first` over what both reports evaluated.
pub fn compare(
    first: &EvaluationReport,
    second: &EvaluationReport,
) -> Result<ComparisonReport, ReportError> {
    if first.metadata.ruleset_name != second.metadata.ruleset_name {
        return Err(ReportError::RulesetMismatch {
            first: first.metadata.ruleset_name.clone(),
            second: second.metadata.ruleset_name.clone(),
        });
    }
    let chars = |r: &EvaluationReport| -> BTreeSet<CharacteristicId> {
        r.characteristics.iter().map(|c| c.characteristic).collect()
    };
    let (c1, c2) = (chars(first), chars(second));
    if c1.is_disjoint(&c2) {
        return Err(ReportError::ScopeMismatch);
    }
    let props = |r: &EvaluationReport| -> BTreeSet<PropertyId> {
        r.properties.iter().map(|p| p.property).collect()
    };
    let (p1, p2) = (props(first), props(second));
    let mut regressions = Vec::new();

    let mut properties = Vec::new();
    for &p in p1.intersection(&p2) {
        let (a, b) = (first.property(p).unwrap(), second.property(p).unwrap());
        let value_delta = match (a.value, b.value) {
            (Some(x), Some(y)) => Some(y - x),
            _ => None,
        };
        let ld = level_delta(a.level, b.level);
        if value_delta.is_some_and(|d| d < 0.0) || ld.is_some_and(|d| d < 0) {
            regressions.push(p.to_string());
        }
        properties.push(PropertyDelta {
            property: p,
            first_value: a.value,
            second_value: b.value,
            value_delta,
            first_level: a.level,
            second_level: b.level,
            level_delta: ld,
        });
    }
    let mut characteristics = Vec::new();
    for &c in c1.intersection(&c2) {
        let (a, b) = (first.level(c), second.level(c));
        let ld = level_delta(a, b);
        if ld.is_some_and(|d| d < 0) {
            regressions.push(c.to_string());
        }
        characteristics.push(CharacteristicDelta {
            characteristic: c,
            first_level: a,
            second_level: b,
            level_delta: ld,
        });
    }
    Ok(ComparisonReport {
        ruleset_name: first.metadata.ruleset_name.clone(),
        first_version: first.metadata.ruleset_version.clone(),
        second_version: second.metadata.ruleset_version.clone(),
        properties,
        characteristics,
        added_properties: p2.difference(&p1).copied().collect(),
        removed_properties: p1.difference(&p2).copied().collect(),
        added_characteristics: c2.difference(&c1).copied().collect(),
        removed_characteristics: c1.difference(&c2).copied().collect(),
        regression: !regressions.is_empty(),
        regressions,
        verdict: [(&first.verdict).into(), (&second.verdict).into()],
    })
}
