//! Random two-entity fixtures and single-rule files shared by the tests.
#![allow(dead_code)]

use chrono::{DateTime, TimeDelta, Utc};
use proptest::prelude::*;

use dq::formats::parse_catalog;
use dq_core::table::{Entity, Repository};
use dq_core::value::Value;

/// Rule kinds `0..KINDS` of [`rule_json`].
pub const KINDS: usize = 14;

pub const SCHEMA: &str = r#"{"entities": [
  {"name": "t", "key": ["id"], "columns": [
    {"name": "id", "datatype": "text"},
    {"name": "code", "datatype": "text", "nullable": true},
    {"name": "n", "datatype": "integer", "nullable": true},
    {"name": "copy", "datatype": "integer", "nullable": true},
    {"name": "status", "datatype": "text", "nullable": true},
    {"name": "ts", "datatype": "timestamp", "nullable": true}
  ]},
  {"name": "r", "columns": [{"name": "code", "datatype": "text", "nullable": true}]}
]}"#;

pub const REFERENCE: &str = "2024-01-01T00:00:00Z";

pub fn reference() -> DateTime<Utc> {
    REFERENCE.parse().unwrap()
}

#[derive(Debug, Clone)]
pub struct Row {
    pub code: Option<String>,
    pub n: Option<i64>,
    pub copy: Option<i64>,
    pub status: Option<String>,
    /// Seconds before the reference time.
    pub age: Option<i64>,
}

pub fn opt<T: std::fmt::Debug + Clone + 'static>(
    s: impl Strategy<Value = T> + 'static,
) -> impl Strategy<Value = Option<T>> {
    prop_oneof![1 => Just(None), 4 => s.prop_map(Some)]
}

pub fn code() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["A1", "B2", "C3", "D4", "a1", "A12", ""]).prop_map(String::from)
}

pub fn row() -> impl Strategy<Value = Row> {
    let age = prop_oneof![
        (0i64..40).prop_map(|d| d * 86_400),
        (0i64..40 * 86_400),
        Just(-3_600i64),
    ];
    (
        opt(code()),
        opt(0i64..60),
        opt(0i64..60),
        opt(prop::sample::select(vec!["A", "B", "C", "N/A"]).prop_map(String::from)),
        opt(age),
    )
        .prop_map(|(code, n, copy, status, age)| Row {
            code,
            n,
            copy,
            status,
            age,
        })
}

#[derive(Debug, Clone)]
pub struct RuleCfg {
    pub kind: usize,
    pub skip_null: bool,
    pub filtered: bool,
    pub threshold: u64,
    pub min_incl: bool,
    pub max_incl: bool,
    pub days: i64,
}

pub fn rule_cfg() -> impl Strategy<Value = RuleCfg> {
    (0usize..KINDS, any::<bool>(), any::<bool>(), 0u64..50, any::<bool>(), any::<bool>(), 1i64..30)
        .prop_map(|(kind, skip_null, filtered, threshold, min_incl, max_incl, days)| RuleCfg {
            kind,
            skip_null,
            filtered,
            threshold,
            min_incl,
            max_incl,
            days,
        })
}

pub const PATTERN: &str = "[A-C][0-9]";

pub fn pattern_ok(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 2 && (b'A'..=b'C').contains(&b[0]) && b[1].is_ascii_digit()
}

/// One rule object of kind `c.kind` on entity `t`.
pub fn rule_obj(id: &str, c: &RuleCfg) -> String {
    let (columns, property, kind, params) = match c.kind {
        0 => (r#"["code"]"#, "EXAC_SINT", "syntax", format!(r#"{{"pattern": "{PATTERN}"}}"#)),
        1 => (
            r#"["n"]"#,
            "RAN_EXAC",
            "range",
            format!(
                r#"{{"min": 10, "max": 40, "min_inclusive": {}, "max_inclusive": {}}}"#,
                c.min_incl, c.max_incl
            ),
        ),
        2 => (r#"["status"]"#, "EXAC_SEMAN", "domain", r#"{"values": ["A", "B"]}"#.into()),
        3 => (r#"["code"]"#, "CRED_VAL_DAT", "domain", r#"{"reference": "r.code"}"#.into()),
        4 => (r#"["n"]"#, "COMP_REG", "not_null", "{}".into()),
        5 => (r#"["status"]"#, "COMP_VAL_ESP", "no_default", r#"{"placeholders": ["N/A"]}"#.into()),
        6 => (r#"["code"]"#, "FAL_COMP_FICH", "unique", "{}".into()),
        7 => (r#"["code"]"#, "RIES_INCO", "unique", r#"{"key": ["code", "n"]}"#.into()),
        8 => ("[]", "COMP_FICH", "min_count", format!(r#"{{"threshold": {}}}"#, c.threshold)),
        9 => (r#"["code"]"#, "INT_REF", "foreign_key", r#"{"references": "r.code"}"#.into()),
        10 => (
            r#"["code"]"#,
            "CONS_FORM",
            "format_class",
            r#"{"class": "cls", "extra_targets": ["r.code"]}"#.into(),
        ),
        11 => ("[]", "CONS_SEMAN", "predicate", r#"{"expr": "n <= copy"}"#.into()),
        12 => (
            "[]",
            "CONV_ACT",
            "freshness",
            format!(r#"{{"timestamp_column": "ts", "max_age": "{}d"}}"#, c.days),
        ),
        _ => (
            "[]",
            "FREC_ACT",
            "frequency",
            format!(r#"{{"timestamp_column": "ts", "max_gap": "{}d"}}"#, c.days % 5 + 1),
        ),
    };
    let skip = c.skip_null && !matches!(c.kind, 4 | 5);
    let filter = if c.filtered { r#", "where": "n > 20""# } else { "" };
    format!(
        r#"{{"id": "{id}", "entity": "t", "columns": {columns}, "property": "{property}",
    "kind": "{kind}", "params": {params}, "skip_null": {skip}{filter}}}"#
    )
}

pub fn ruleset_json(rules: &[String]) -> String {
    format!(
        r#"{{"name": "o", "version": "1", "reference_time": "{REFERENCE}",
  "format_classes": {{"cls": "{PATTERN}"}},
  "rules": [{}]}}"#,
        rules.join(",\n")
    )
}

pub fn rule_json(c: &RuleCfg) -> String {
    ruleset_json(&[rule_obj("x", c)])
}

pub fn text(v: &Option<String>) -> Value {
    v.clone().map_or(Value::Null, Value::Text)
}

pub fn int(v: Option<i64>) -> Value {
    v.map_or(Value::Null, Value::Integer)
}

pub fn repository(rows: &[Row], refs: &[Option<String>]) -> Repository {
    let catalog = parse_catalog(SCHEMA).unwrap();
    let t = catalog.entity("t").unwrap().clone();
    let r = catalog.entity("r").unwrap().clone();
    let t_rows = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            vec![
                Value::Text(format!("T{i:04}")),
                text(&row.code),
                int(row.n),
                int(row.copy),
                text(&row.status),
                row.age
                    .map_or(Value::Null, |a| Value::Timestamp(reference() - TimeDelta::seconds(a))),
            ]
        })
        .collect();
    let r_rows = refs.iter().map(|v| vec![text(v)]).collect();
    Repository::new(
        catalog,
        vec![
            Entity::from_rows(t, t_rows).unwrap(),
            Entity::from_rows(r, r_rows).unwrap(),
        ],
    )
    .unwrap()
}

