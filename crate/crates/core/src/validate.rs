//! Static checks of a rule set against a schema catalog.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::BoundExpr;
use crate::rules::{ColumnRef, DomainSource, Rule, RuleKind, RuleSet};
use crate::schema::{EntitySchema, SchemaCatalog};
use crate::value::{DataType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub level: Level,
    pub rule_id: String,
    pub message: String,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.level == Level::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Error => "ERROR",
            Level::Warning => "WARNING",
        };
        write!(f, "{level} {}: {}", self.rule_id, self.message)
    }
}

struct Checker<'a> {
    catalog: &'a SchemaCatalog,
    rule: &'a Rule,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, level: Level, message: String) {
        self.out.push(Diagnostic {
            level,
            rule_id: self.rule.id.clone(),
            message,
        });
    }

    fn error(&mut self, message: String) {
        self.push(Level::Error, message);
    }

    fn column_type(&mut self, target: &ColumnRef) -> Option<(DataType, bool)> {
        let Some(entity) = self.catalog.entity(&target.entity) else {
            self.error(format!("entity `{}` does not exist", target.entity));
            return None;
        };
        match entity.column(&target.column) {
            Some(c) => Some((c.datatype, c.nullable)),
            None => {
                self.error(format!("column `{target}` does not exist"));
                None
            }
        }
    }

    fn literals_coerce(&mut self, what: &str, values: &[&Value], ty: DataType, column: &str) {
        for v in values {
            if let Err(e) = v.coerce(ty) {
                self.error(format!("{what} for column `{column}`: {e}"));
            }
        }
    }

    fn predicate(&mut self, what: &str, expr: &crate::expr::Expr, schema: &EntitySchema) {
        if let Err(e) = BoundExpr::bind_predicate(expr, schema) {
            self.error(format!("{what}: {e}"));
        }
    }

    fn check(&mut self) {
        let rule = self.rule;
        let Some(schema) = self.catalog.entity(&rule.entity) else {
            self.error(format!("entity `{}` does not exist", rule.entity));
            return;
        };
        let mut typed: Vec<(String, DataType, bool)> = Vec::new();
        for c in &rule.columns {
            match schema.column(c) {
                Some(col) => typed.push((c.clone(), col.datatype, col.nullable)),
                None => self.error(format!("column `{}.{c}` does not exist", rule.entity)),
            }
        }
        if let Some(filter) = &rule.filter {
            self.predicate("where", filter, schema);
        }
        match &rule.kind {
            RuleKind::Syntax { .. } => {
                for (c, ty, _) in &typed {
                    if *ty != DataType::Text {
                        self.push(
                            Level::Warning,
                            format!(
                                "pattern is matched against the text form of {ty} column `{c}`"
                            ),
                        );
                    }
                }
            }
            RuleKind::Range { min, max } => {
                let bounds: Vec<&Value> = min.iter().chain(max.iter()).map(|b| &b.value).collect();
                for (c, ty, _) in &typed {
                    if *ty == DataType::Boolean {
                        self.error(format!("range cannot apply to boolean column `{c}`"));
                    } else {
                        self.literals_coerce("range bound", &bounds, *ty, c);
                    }
                }
            }
            RuleKind::Domain(DomainSource::Values(values)) => {
                let refs: Vec<&Value> = values.iter().collect();
                for (c, ty, _) in &typed {
                    self.literals_coerce("domain value", &refs, *ty, c);
                }
            }
            RuleKind::Domain(DomainSource::Reference(target))
            | RuleKind::ForeignKey { references: target } => {
                if let Some((ref_ty, _)) = self.column_type(target) {
                    for (c, ty, _) in &typed {
                        if *ty != ref_ty {
                            self.error(format!("column `{c}` is {ty} but `{target}` is {ref_ty}"));
                        }
                    }
                }
            }
            RuleKind::NotNull => {
                for (c, _, nullable) in &typed {
                    if !nullable {
                        self.push(
                            Level::Warning,
                            format!("column `{c}` is not nullable; rule always holds"),
                        );
                    }
                }
            }
            RuleKind::NoDefault { placeholders } => {
                let refs: Vec<&Value> = placeholders.iter().collect();
                for (c, ty, _) in &typed {
                    self.literals_coerce("placeholder", &refs, *ty, c);
                }
            }
            RuleKind::Unique { key } => {
                for k in key {
                    if schema.column(k).is_none() {
                        self.error(format!("key column `{}.{k}` does not exist", rule.entity));
                    }
                }
            }
            RuleKind::MinCount { .. } => {}
            RuleKind::FormatClass { extra_targets, .. } => {
                for (c, ty, _) in &typed {
                    if *ty != DataType::Text {
                        self.push(
                            Level::Warning,
                            format!(
                                "pattern is matched against the text form of {ty} column `{c}`"
                            ),
                        );
                    }
                }
                for t in extra_targets {
                    if let Some((ty, _)) = self.column_type(t) {
                        if ty != DataType::Text {
                            self.push(
                                Level::Warning,
                                format!(
                                    "pattern is matched against the text form of {ty} column `{t}`"
                                ),
                            );
                        }
                    }
                }
            }
            RuleKind::Predicate { expr } => self.predicate("predicate", expr, schema),
            RuleKind::Freshness {
                timestamp_column,
                condition,
                ..
            } => {
                self.timestamp_column(schema, timestamp_column);
                if let Some(cond) = condition {
                    self.predicate("condition", cond, schema);
                }
            }
            RuleKind::Frequency {
                timestamp_column, ..
            } => self.timestamp_column(schema, timestamp_column),
        }
    }

    fn timestamp_column(&mut self, schema: &EntitySchema, column: &str) {
        match schema.column(column) {
            None => self.error(format!(
                "timestamp column `{}.{column}` does not exist",
                schema.name
            )),
            Some(c) if c.datatype != DataType::Timestamp => self.error(format!(
                "column `{}.{column}` is {}, not timestamp",
                schema.name, c.datatype
            )),
            _ => {}
        }
    }
}

/// Checks every rule against the catalog. An empty result means the rule
/// set can be evaluated; warnings do not block evaluation.
pub fn validate_ruleset(rs: &RuleSet, catalog: &SchemaCatalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for rule in rs.rules() {
        let mut c = Checker {
            catalog,
            rule,
            out: Vec::new(),
        };
        c.check();
        out.extend(c.out);
    }
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::pattern::Pattern;
    use crate::schema::ColumnSchema;
    use crate::taxonomy::PropertyId;
    use crate::value::parse_timestamp;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;

    fn catalog() -> SchemaCatalog {
        let c = |n: &str, t| ColumnSchema {
            name: n.into(),
            datatype: t,
            nullable: true,
        };
        SchemaCatalog::new(vec![
            EntitySchema {
                name: "person".into(),
                columns: vec![
                    c("id", DataType::Text),
                    c("age", DataType::Integer),
                    c("updated", DataType::Timestamp),
                ],
                key: Some(vec!["id".into()]),
            },
            EntitySchema {
                name: "warning".into(),
                columns: vec![c("person_id", DataType::Text)],
                key: None,
            },
        ])
        .unwrap()
    }

    fn rule(id: &str, entity: &str, cols: &[&str], property: PropertyId, kind: RuleKind) -> Rule {
        Rule {
            id: id.into(),
            entity: entity.into(),
            columns: cols.iter().map(|c| c.to_string()).collect(),
            property,
            kind,
            filter: None,
            skip_null: false,
            description: String::new(),
        }
    }

    fn set(rules: Vec<Rule>) -> RuleSet {
        RuleSet::new(
            "t".into(),
            "1".into(),
            parse_timestamp("2024-01-01T00:00:00Z").unwrap(),
            BTreeMap::new(),
            rules,
        )
        .unwrap()
    }

    #[test]
    fn missing_column_is_one_error() {
        let rs = set(vec![rule(
            "r1",
            "person",
            &["foo"],
            PropertyId::EXAC_SINT,
            RuleKind::Syntax {
                pattern: Pattern::new("x").unwrap(),
            },
        )]);
        let d = validate_ruleset(&rs, &catalog());
        assert_eq!(d.len(), 1);
        assert!(d[0].is_error());
        assert_eq!(
            d[0].to_string(),
            "ERROR r1: column `person.foo` does not exist"
        );
    }

    #[test]
    fn foreign_key_to_missing_entity() {
        let rs = set(vec![rule(
            "fk",
            "warning",
            &["person_id"],
            PropertyId::INT_REF,
            RuleKind::ForeignKey {
                references: ColumnRef::new("people", "id"),
            },
        )]);
        let d = validate_ruleset(&rs, &catalog());
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("people"));
    }

    #[test]
    fn resolvable_ruleset_is_clean() {
        let mut pred = rule(
            "p",
            "person",
            &[],
            PropertyId::CONS_SEMAN,
            RuleKind::Predicate {
                expr: parse_expr("age >= 0 and age_days(updated) < 365").unwrap(),
            },
        );
        pred.filter = Some(parse_expr("id is not null").unwrap());
        let rs = set(vec![
            rule(
                "fk",
                "warning",
                &["person_id"],
                PropertyId::INT_REF,
                RuleKind::ForeignKey {
                    references: ColumnRef::new("person", "id"),
                },
            ),
            pred,
            rule(
                "f",
                "person",
                &[],
                PropertyId::FREC_ACT,
                RuleKind::Frequency {
                    timestamp_column: "updated".into(),
                    max_gap: crate::value::Span::from_days(7),
                },
            ),
        ]);
        assert!(validate_ruleset(&rs, &catalog()).is_empty());
    }

    #[test]
    fn type_errors_are_reported() {
        let rs = set(vec![
            rule(
                "p",
                "person",
                &[],
                PropertyId::CONS_SEMAN,
                RuleKind::Predicate {
                    expr: parse_expr("age = 'x'").unwrap(),
                },
            ),
            rule(
                "d",
                "person",
                &["age"],
                PropertyId::EXAC_SEMAN,
                RuleKind::Domain(DomainSource::Values(vec![Value::Text("ten".into())])),
            ),
            rule(
                "f",
                "person",
                &[],
                PropertyId::FREC_ACT,
                RuleKind::Frequency {
                    timestamp_column: "age".into(),
                    max_gap: crate::value::Span::from_days(7),
                },
            ),
        ]);
        let d = validate_ruleset(&rs, &catalog());
        let ids: Vec<&str> = d.iter().map(|d| d.rule_id.as_str()).collect();
        assert_eq!(ids, ["p", "d", "f"]);
        assert!(has_errors(&d));
    }
}
