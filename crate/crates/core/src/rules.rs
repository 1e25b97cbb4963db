//! Business rules, their kinds, and the rule set that groups them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::expr::Expr;
use crate::pattern::Pattern;
use crate::taxonomy::{CharacteristicId, PropertyId};
use crate::value::{Span, Timestamp, Value};

/// `entity.column` reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub entity: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(entity: &str, column: &str) -> Self {
        ColumnRef {
            entity: entity.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.entity, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((e, c)) if !e.is_empty() && !c.is_empty() && !c.contains('.') => {
                Ok(ColumnRef::new(e, c))
            }
            _ => Err(format!("`{s}` is not an `entity.column` reference")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub value: Value,
    pub inclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainSource {
    Values(Vec<Value>),
    Reference(ColumnRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    Syntax {
        pattern: Pattern,
    },
    Range {
        min: Option<Bound>,
        max: Option<Bound>,
    },
    Domain(DomainSource),
    NotNull,
    NoDefault {
        placeholders: Vec<Value>,
    },
    Unique {
        key: Vec<String>,
    },
    MinCount {
        threshold: u64,
    },
    ForeignKey {
        references: ColumnRef,
    },
    FormatClass {
        class: String,
        pattern: Pattern,
        extra_targets: Vec<ColumnRef>,
    },
    Predicate {
        expr: Expr,
    },
    Freshness {
        timestamp_column: String,
        max_age: Span,
        condition: Option<Expr>,
    },
    Frequency {
        timestamp_column: String,
        max_gap: Span,
    },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum KindTag {
    Syntax,
    Range,
    Domain,
    NotNull,
    NoDefault,
    Unique,
    MinCount,
    ForeignKey,
    FormatClass,
    Predicate,
    Freshness,
    Frequency,
}

impl KindTag {
    pub const ALL: [KindTag; 12] = [
        KindTag::Syntax,
        KindTag::Range,
        KindTag::Domain,
        KindTag::NotNull,
        KindTag::NoDefault,
        KindTag::Unique,
        KindTag::MinCount,
        KindTag::ForeignKey,
        KindTag::FormatClass,
        KindTag::Predicate,
        KindTag::Freshness,
        KindTag::Frequency,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            KindTag::Syntax => "syntax",
            KindTag::Range => "range",
            KindTag::Domain => "domain",
            KindTag::NotNull => "not_null",
            KindTag::NoDefault => "no_default",
            KindTag::Unique => "unique",
            KindTag::MinCount => "min_count",
            KindTag::ForeignKey => "foreign_key",
            KindTag::FormatClass => "format_class",
            KindTag::Predicate => "predicate",
            KindTag::Freshness => "freshness",
            KindTag::Frequency => "frequency",
        }
    }

    pub fn from_name(s: &str) -> Option<KindTag> {
        KindTag::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Properties a rule of this kind may be categorized under.
    pub const fn allowed_properties(self) -> &'static [PropertyId] {
        use PropertyId::*;
        match self {
            KindTag::Syntax => &[EXAC_SINT, CONS_FORM],
            KindTag::Range => &[RAN_EXAC],
            KindTag::Domain => &[EXAC_SEMAN, CRED_VAL_DAT],
            KindTag::NotNull => &[COMP_REG, COMP_VAL_ESP],
            KindTag::NoDefault => &[COMP_VAL_ESP],
            KindTag::Unique => &[FAL_COMP_FICH, RIES_INCO],
            KindTag::MinCount => &[COMP_FICH],
            KindTag::ForeignKey => &[INT_REF],
            KindTag::FormatClass => &[CONS_FORM],
            KindTag::Predicate => &[CONS_SEMAN, CRED_VAL_DAT, CRED_FUEN, RIES_INCO, EXAC_SEMAN],
            KindTag::Freshness => &[CONV_ACT],
            KindTag::Frequency => &[FREC_ACT],
        }
    }

    /// Entity-level kinds produce a single item per rule (`B = 1`).
    pub const fn is_entity_level(self) -> bool {
        matches!(self, KindTag::MinCount | KindTag::Frequency)
    }

    /// Kinds whose subject is the null itself; `skip_null` is meaningless.
    pub const fn tests_nulls(self) -> bool {
        matches!(self, KindTag::NotNull | KindTag::NoDefault)
    }
}

impl fmt::Display for KindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl RuleKind {
    pub fn tag(&self) -> KindTag {
        match self {
            RuleKind::Syntax { .. } => KindTag::Syntax,
            RuleKind::Range { .. } => KindTag::Range,
            RuleKind::Domain(_) => KindTag::Domain,
            RuleKind::NotNull => KindTag::NotNull,
            RuleKind::NoDefault { .. } => KindTag::NoDefault,
            RuleKind::Unique { .. } => KindTag::Unique,
            RuleKind::MinCount { .. } => KindTag::MinCount,
            RuleKind::ForeignKey { .. } => KindTag::ForeignKey,
            RuleKind::FormatClass { .. } => KindTag::FormatClass,
            RuleKind::Predicate { .. } => KindTag::Predicate,
            RuleKind::Freshness { .. } => KindTag::Freshness,
            RuleKind::Frequency { .. } => KindTag::Frequency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub entity: String,
    pub columns: Vec<String>,
    pub property: PropertyId,
    pub kind: RuleKind,
    pub filter: Option<Expr>,
    pub skip_null: bool,
    pub description: String,
}

impl Rule {
    pub fn characteristic(&self) -> CharacteristicId {
        self.property.characteristic()
    }

    /// Every (entity, column) cell range the rule checks, in evaluation order.
    pub fn targets(&self) -> Vec<ColumnRef> {
        match &self.kind {
            RuleKind::Unique { key } => key
                .iter()
                .map(|c| ColumnRef::new(&self.entity, c))
                .collect(),
            RuleKind::MinCount { .. } => Vec::new(),
            RuleKind::Freshness {
                timestamp_column, ..
            }
            | RuleKind::Frequency {
                timestamp_column, ..
            } => {
                alloc::vec![ColumnRef::new(&self.entity, timestamp_column)]
            }
            RuleKind::FormatClass { extra_targets, .. } => self
                .columns
                .iter()
                .map(|c| ColumnRef::new(&self.entity, c))
                .chain(extra_targets.iter().cloned())
                .collect(),
            _ => self
                .columns
                .iter()
                .map(|c| ColumnRef::new(&self.entity, c))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleSetError {
    #[error("ruleset must contain at least one rule")]
    Empty,
    #[error("duplicate rule id `{0}`")]
    DuplicateId(String),
    #[error(
        "rule `{id}`: kind `{kind}` cannot be categorized under {property} (allowed: {allowed})"
    )]
    Incompatible {
        id: String,
        kind: KindTag,
        property: PropertyId,
        allowed: String,
    },
    #[error("rule `{id}`: format class `{class}` is not defined")]
    UndefinedFormatClass { id: String, class: String },
    #[error("rule `{id}`: {message}")]
    Invalid { id: String, message: String },
}

impl RuleSetError {
    /// Id of the offending rule, when the error concerns one.
    pub fn rule_id(&self) -> Option<&str> {
        match self {
            RuleSetError::Empty => None,
            RuleSetError::DuplicateId(id)
            | RuleSetError::Incompatible { id, .. }
            | RuleSetError::UndefinedFormatClass { id, .. }
            | RuleSetError::Invalid { id, .. } => Some(id),
        }
    }
}

/// A structurally valid, immutable rule document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    name: String,
    version: String,
    reference_time: Timestamp,
    format_classes: BTreeMap<String, Pattern>,
    rules: Vec<Rule>,
}

fn invalid(rule: &Rule, message: impl Into<String>) -> RuleSetError {
    RuleSetError::Invalid {
        id: rule.id.clone(),
        message: message.into(),
    }
}

fn check_rule(rule: &Rule, classes: &BTreeMap<String, Pattern>) -> Result<(), RuleSetError> {
    let tag = rule.kind.tag();
    if !tag.allowed_properties().contains(&rule.property) {
        let allowed: Vec<&str> = tag
            .allowed_properties()
            .iter()
            .map(|p| p.acronym())
            .collect();
        return Err(RuleSetError::Incompatible {
            id: rule.id.clone(),
            kind: tag,
            property: rule.property,
            allowed: allowed.join(", "),
        });
    }
    if rule.id.is_empty() {
        return Err(invalid(rule, "rule id must not be empty"));
    }
    if rule.entity.is_empty() {
        return Err(invalid(rule, "entity must not be empty"));
    }
    if tag.tests_nulls() && rule.skip_null {
        return Err(invalid(
            rule,
            format!("skip_null cannot be set on `{tag}` rules"),
        ));
    }
    let needs_columns = matches!(
        tag,
        KindTag::Syntax | KindTag::Range | KindTag::Domain | KindTag::NotNull | KindTag::NoDefault
    );
    if needs_columns && rule.columns.is_empty() {
        return Err(invalid(
            rule,
            format!("`{tag}` rules need at least one column"),
        ));
    }
    for (i, c) in rule.columns.iter().enumerate() {
        if rule.columns[..i].contains(c) {
            return Err(invalid(rule, format!("column `{c}` listed twice")));
        }
    }
    match &rule.kind {
        RuleKind::Range { min, max } => match (min, max) {
            (None, None) => return Err(invalid(rule, "range needs `min`, `max`, or both")),
            (Some(lo), Some(hi)) => match lo.value.compare(&hi.value) {
                None => return Err(invalid(rule, "range bounds are not comparable")),
                Some(Ordering::Greater) => return Err(invalid(rule, "range `min` exceeds `max`")),
                _ => {}
            },
            _ => {}
        },
        RuleKind::Domain(DomainSource::Values(v)) if v.is_empty() => {
            return Err(invalid(rule, "domain value list is empty"))
        }
        RuleKind::Domain(DomainSource::Reference(_)) | RuleKind::ForeignKey { .. }
            if rule.columns.len() != 1 =>
        {
            return Err(invalid(
                rule,
                format!("`{tag}` rules check exactly one column"),
            ))
        }
        RuleKind::NoDefault { placeholders } if placeholders.is_empty() => {
            return Err(invalid(rule, "no_default needs at least one placeholder"))
        }
        RuleKind::Unique { key } => {
            if key.is_empty() {
                return Err(invalid(rule, "unique key must list at least one column"));
            }
            for (i, c) in key.iter().enumerate() {
                if key[..i].contains(c) {
                    return Err(invalid(rule, format!("unique key lists `{c}` twice")));
                }
            }
        }
        RuleKind::FormatClass {
            class,
            pattern,
            extra_targets,
        } => {
            match classes.get(class) {
                None => {
                    return Err(RuleSetError::UndefinedFormatClass {
                        id: rule.id.clone(),
                        class: class.clone(),
                    })
                }
                Some(p) if p != pattern => {
                    return Err(invalid(
                        rule,
                        format!("pattern differs from format class `{class}`"),
                    ))
                }
                _ => {}
            }
            if rule.columns.is_empty() && extra_targets.is_empty() {
                return Err(invalid(
                    rule,
                    "format_class needs at least one target column",
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

impl RuleSet {
    pub fn new(
        name: String,
        version: String,
        reference_time: Timestamp,
        format_classes: BTreeMap<String, Pattern>,
        rules: Vec<Rule>,
    ) -> Result<Self, RuleSetError> {
        if rules.is_empty() {
            return Err(RuleSetError::Empty);
        }
        {
            let mut seen = hashbrown::HashSet::with_capacity(rules.len());
            for rule in &rules {
                if !seen.insert(rule.id.as_str()) {
                    return Err(RuleSetError::DuplicateId(rule.id.clone()));
                }
                check_rule(rule, &format_classes)?;
            }
        }
        Ok(RuleSet {
            name,
            version,
            reference_time,
            format_classes,
            rules,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn reference_time(&self) -> Timestamp {
        self.reference_time
    }

    pub fn format_classes(&self) -> &BTreeMap<String, Pattern> {
        &self.format_classes
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Rules whose property passes `keep`, preserving document order.
    pub fn subset(&self, keep: impl Fn(PropertyId) -> bool) -> Result<RuleSet, RuleSetError> {
        let rules = self
            .rules
            .iter()
            .filter(|r| keep(r.property))
            .cloned()
            .collect();
        RuleSet::new(
            self.name.clone(),
            self.version.clone(),
            self.reference_time,
            self.format_classes.clone(),
            rules,
        )
    }

    /// Rule count per characteristic (all five present, possibly zero).
    pub fn counts_by_characteristic(&self) -> BTreeMap<CharacteristicId, usize> {
        let mut out: BTreeMap<CharacteristicId, usize> =
            CharacteristicId::ALL.into_iter().map(|c| (c, 0)).collect();
        for r in &self.rules {
            *out.entry(r.characteristic()).or_default() += 1;
        }
        out
    }
}

/// Partitions the rules by property; document order is kept within each list.
pub fn rules_by_property(rs: &RuleSet) -> BTreeMap<PropertyId, Vec<&Rule>> {
    let mut out: BTreeMap<PropertyId, Vec<&Rule>> = BTreeMap::new();
    for r in rs.rules() {
        out.entry(r.property).or_default().push(r);
    }
    out
}
