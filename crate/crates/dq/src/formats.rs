//! JSON documents: schema catalogs, rule sets, scoring configs, synthesis
//! specs and canonical output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use dq_core::expr::parse_expr;
use dq_core::pattern::Pattern;
use dq_core::rules::{Bound, ColumnRef, DomainSource, KindTag, Rule, RuleKind, RuleSet, RuleSetError};
use dq_core::schema::{EntitySchema, SchemaCatalog};
use dq_core::scoring::ScoringConfig;
use dq_core::synth::SynthSpec;
use dq_core::taxonomy::PropertyId;
use dq_core::value::{format_timestamp, parse_timestamp, Decimal, Span, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// 1-based line and column of `part`, which must be a slice of `doc`.
fn position(doc: &str, part: &str) -> (usize, usize) {
    let offset = (part.as_ptr() as usize).saturating_sub(doc.as_ptr() as usize).min(doc.len());
    let before = &doc[..offset];
    let line = before.bytes().filter(|&b| b == b'\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn at(doc: &str, part: &str, message: impl Into<String>) -> ParseError {
    let (line, column) = position(doc, part);
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Re-bases a serde error raised while reading `part` onto `doc`.
fn json_error(doc: &str, part: &str, e: &serde_json::Error) -> ParseError {
    let (base_line, base_col) = position(doc, part);
    let (line, column) = match (e.line(), e.column()) {
        (0, _) => (base_line, base_col),
        (1, c) => (base_line, base_col + c.saturating_sub(1)),
        (l, c) => (base_line + l - 1, c),
    };
    let message = e.to_string();
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    ParseError {
        line,
        column,
        message,
    }
}

fn from_part<'a, T: Deserialize<'a>>(doc: &str, part: &'a str) -> Result<T, ParseError> {
    serde_json::from_str(part).map_err(|e| json_error(doc, part, &e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc<'a> {
    #[serde(borrow)]
    entities: Vec<&'a RawValue>,
}

pub fn parse_catalog(doc: &str) -> Result<SchemaCatalog, ParseError> {
    let top: CatalogDoc = from_part(doc, doc)?;
    let mut entities = Vec::with_capacity(top.entities.len());
    for raw in &top.entities {
        let e: EntitySchema = from_part(doc, raw.get())?;
        entities.push(e);
    }
    SchemaCatalog::new(entities).map_err(|e| {
        use dq_core::schema::CatalogError::*;
        let name = match &e {
            DuplicateEntity(n) | EmptyKey(n) => n,
            DuplicateColumn { entity, .. } | MissingKeyColumn { entity, .. } => entity,
        };
        let needle = format!("\"{name}\"");
        // the second occurrence is the duplicate
        let hits: Vec<&&RawValue> = top.entities.iter().filter(|r| r.get().contains(&needle)).collect();
        let raw = match e {
            DuplicateEntity(_) => hits.get(1).or(hits.first()),
            _ => hits.first(),
        };
        at(doc, raw.map_or(doc, |r| r.get()), e.to_string())
    })
}

#[derive(Serialize)]
struct CatalogOut<'a> {
    entities: &'a [EntitySchema],
}

pub fn write_catalog(catalog: &SchemaCatalog) -> String {
    to_canonical_json(&CatalogOut {
        entities: catalog.entities(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesDoc<'a> {
    name: String,
    version: String,
    reference_time: String,
    #[serde(default)]
    format_classes: BTreeMap<String, String>,
    #[serde(borrow)]
    rules: &'a RawValue,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc<'a> {
    id: String,
    entity: String,
    #[serde(default)]
    columns: Vec<String>,
    property: String,
    kind: String,
    #[serde(default, borrow)]
    params: Option<&'a RawValue>,
    #[serde(default, rename = "where")]
    filter: Option<String>,
    #[serde(default)]
    skip_null: bool,
    #[serde(default)]
    description: String,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternParams {
    pattern: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeParams<'a> {
    #[serde(default, borrow)]
    min: Option<&'a RawValue>,
    #[serde(default, borrow)]
    max: Option<&'a RawValue>,
    #[serde(default = "yes")]
    min_inclusive: bool,
    #[serde(default = "yes")]
    max_inclusive: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainParams<'a> {
    #[serde(default, borrow)]
    values: Option<Vec<&'a RawValue>>,
    #[serde(default)]
    reference: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoDefaultParams<'a> {
    #[serde(borrow)]
    placeholders: Vec<&'a RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UniqueParams {
    /// Defaults to the rule's columns.
    #[serde(default)]
    key: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MinCountParams {
    threshold: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForeignKeyParams {
    references: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FormatClassParams {
    class: String,
    #[serde(default)]
    extra_targets: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicateParams {
    expr: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FreshnessParams {
    timestamp_column: String,
    max_age: String,
    #[serde(default)]
    condition: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrequencyParams {
    timestamp_column: String,
    max_gap: String,
}

/// A JSON scalar as a literal. Numbers keep their exact text: a fraction
/// makes a decimal, otherwise an integer.
fn literal(raw: &RawValue) -> Result<Value, String> {
    let s = raw.get().trim();
    match s.as_bytes().first() {
        Some(b'"') => serde_json::from_str::<String>(s)
            .map(Value::Text)
            .map_err(|e| e.to_string()),
        Some(b't') | Some(b'f') => Ok(Value::Boolean(s == "true")),
        Some(b'n') => Ok(Value::Null),
        Some(b'[') | Some(b'{') => Err(format!("`{s}` is not a scalar literal")),
        _ if s.contains(['e', 'E']) => Err(format!("`{s}`: exponent notation is not supported")),
        _ if s.contains('.') => s.parse::<Decimal>().map(Value::Decimal).map_err(|e| e.to_string()),
        _ => s
            .parse::<i64>()
            .map(Value::Integer)
            .map_err(|_| format!("integer `{s}` is out of range")),
    }
}

fn raw(text: String) -> Box<RawValue> {
    RawValue::from_string(text).expect("valid JSON fragment")
}

fn raw_of<T: Serialize + ?Sized>(v: &T) -> Box<RawValue> {
    raw(serde_json::to_string(v).expect("serializable"))
}

fn literal_out(v: &Value) -> Box<RawValue> {
    match v {
        Value::Null => raw("null".into()),
        Value::Text(s) => raw_of(s),
        Value::Integer(i) => raw(i.to_string()),
        Value::Decimal(d) if d.is_integral() => raw(format!("{d}.0")),
        Value::Decimal(d) => raw(d.to_string()),
        Value::Boolean(b) => raw(b.to_string()),
        Value::Timestamp(t) => raw_of(&format_timestamp(t)),
    }
}

fn column_ref(s: &str) -> Result<ColumnRef, String> {
    s.parse()
}

fn span(s: &str) -> Result<Span, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a duration such as `30d` or `1d12h`"))
}

fn expr(s: &str, what: &str) -> Result<dq_core::expr::Expr, String> {
    parse_expr(s).map_err(|e| format!("{what}: {e}"))
}

fn kind_of<'a>(
    doc: &str,
    part: &'a str,
    rule: &RuleDoc<'a>,
    classes: &BTreeMap<String, Pattern>,
) -> Result<RuleKind, ParseError> {
    let tag = KindTag::from_name(&rule.kind).ok_or_else(|| at(doc, part, format!("unknown rule kind `{}`", rule.kind)))?;
    let params: &'a str = rule.params.map_or("{}", |r| r.get());
    let params_doc = if rule.params.is_some() { doc } else { params };
    let p_err = |m: String| at(doc, rule.params.map_or(part, |r| r.get()), m);
    let lit = |r: &RawValue| literal(r).map_err(|m| at(doc, r.get(), m));
    let kind = match tag {
        KindTag::Syntax => {
            let p: PatternParams = from_part(params_doc, params)?;
            RuleKind::Syntax {
                pattern: Pattern::new(&p.pattern).map_err(|e| p_err(e.to_string()))?,
            }
        }
        KindTag::Range => {
            let p: RangeParams = from_part(params_doc, params)?;
            let bound = |r: Option<&RawValue>, inclusive| -> Result<Option<Bound>, ParseError> {
                match r {
                    None => Ok(None),
                    Some(r) => match lit(r)? {
                        Value::Null => Ok(None),
                        value => Ok(Some(Bound { value, inclusive })),
                    },
                }
            };
            RuleKind::Range {
                min: bound(p.min, p.min_inclusive)?,
                max: bound(p.max, p.max_inclusive)?,
            }
        }
        KindTag::Domain => {
            let p: DomainParams = from_part(params_doc, params)?;
            match (p.values, p.reference) {
                (Some(values), None) => RuleKind::Domain(DomainSource::Values(
                    values.into_iter().map(lit).collect::<Result<_, _>>()?,
                )),
                (None, Some(r)) => RuleKind::Domain(DomainSource::Reference(column_ref(&r).map_err(p_err)?)),
                _ => return Err(p_err("domain needs exactly one of `values` and `reference`".into())),
            }
        }
        KindTag::NotNull => {
            let _: NoParams = from_part(params_doc, params)?;
            RuleKind::NotNull
        }
        KindTag::NoDefault => {
            let p: NoDefaultParams = from_part(params_doc, params)?;
            RuleKind::NoDefault {
                placeholders: p.placeholders.into_iter().map(lit).collect::<Result<_, _>>()?,
            }
        }
        KindTag::Unique => {
            let p: UniqueParams = from_part(params_doc, params)?;
            RuleKind::Unique {
                key: p.key.unwrap_or_else(|| rule.columns.clone()),
            }
        }
        KindTag::MinCount => {
            let p: MinCountParams = from_part(params_doc, params)?;
            RuleKind::MinCount {
                threshold: p.threshold,
            }
        }
        KindTag::ForeignKey => {
            let p: ForeignKeyParams = from_part(params_doc, params)?;
            RuleKind::ForeignKey {
                references: column_ref(&p.references).map_err(p_err)?,
            }
        }
        KindTag::FormatClass => {
            let p: FormatClassParams = from_part(params_doc, params)?;
            let Some(pattern) = classes.get(&p.class) else {
                return Err(p_err(format!("format class `{}` is not defined", p.class)));
            };
            RuleKind::FormatClass {
                pattern: pattern.clone(),
                class: p.class,
                extra_targets: p
                    .extra_targets
                    .iter()
                    .map(|t| column_ref(t))
                    .collect::<Result<_, _>>()
                    .map_err(p_err)?,
            }
        }
        KindTag::Predicate => {
            let p: PredicateParams = from_part(params_doc, params)?;
            RuleKind::Predicate {
                expr: expr(&p.expr, "expr").map_err(p_err)?,
            }
        }
        KindTag::Freshness => {
            let p: FreshnessParams = from_part(params_doc, params)?;
            RuleKind::Freshness {
                timestamp_column: p.timestamp_column,
                max_age: span(&p.max_age).map_err(p_err)?,
                condition: p
                    .condition
                    .as_deref()
                    .map(|c| expr(c, "condition"))
                    .transpose()
                    .map_err(p_err)?,
            }
        }
        KindTag::Frequency => {
            let p: FrequencyParams = from_part(params_doc, params)?;
            RuleKind::Frequency {
                timestamp_column: p.timestamp_column,
                max_gap: span(&p.max_gap).map_err(p_err)?,
            }
        }
    };
    Ok(kind)
}

/// Parses a rules document. Every error carries the line and column of
/// the offending element.
pub fn parse_ruleset(doc: &str) -> Result<RuleSet, ParseError> {
    let top: RulesDoc = from_part(doc, doc)?;
    let reference_time = parse_timestamp(&top.reference_time).ok_or_else(|| {
        at(
            doc,
            doc,
            format!("reference_time `{}` is not an RFC 3339 timestamp", top.reference_time),
        )
    })?;
    let mut classes = BTreeMap::new();
    for (name, p) in &top.format_classes {
        let pattern = Pattern::new(p).map_err(|e| at(doc, doc, format!("format class `{name}`: {e}")))?;
        classes.insert(name.clone(), pattern);
    }
    let parts: Vec<&RawValue> = from_part(doc, top.rules.get())?;
    let mut rules = Vec::with_capacity(parts.len());
    for raw in &parts {
        let part = raw.get();
        let r: RuleDoc = from_part(doc, part)?;
        let property = r
            .property
            .parse::<PropertyId>()
            .map_err(|_| at(doc, part, format!("unknown property acronym `{}`", r.property)))?;
        let kind = kind_of(doc, part, &r, &classes)?;
        let filter = r
            .filter
            .as_deref()
            .map(|w| expr(w, "where"))
            .transpose()
            .map_err(|m| at(doc, part, m))?;
        rules.push(Rule {
            id: r.id,
            entity: r.entity,
            columns: r.columns,
            property,
            kind,
            filter,
            skip_null: r.skip_null,
            description: r.description,
        });
    }
    RuleSet::new(top.name, top.version, reference_time, classes, rules).map_err(|e| {
        let part = match &e {
            RuleSetError::Empty => top.rules.get(),
            RuleSetError::DuplicateId(id) => {
                let at_id = |r: &&&RawValue| {
                    serde_json::from_str::<RuleDoc>(r.get()).is_ok_and(|d| d.id == *id)
                };
                let mut hits = parts.iter().filter(at_id);
                hits.next();
                hits.next().map_or(doc, |r| r.get())
            }
            other => {
                let id = other.rule_id().unwrap_or_default();
                parts
                    .iter()
                    .find(|r| serde_json::from_str::<RuleDoc>(r.get()).is_ok_and(|d| d.id == id))
                    .map_or(doc, |r| r.get())
            }
        };
        at(doc, part, e.to_string())
    })
}

#[derive(Serialize)]
struct RulesOut<'a> {
    name: &'a str,
    version: &'a str,
    reference_time: String,
    format_classes: BTreeMap<&'a str, &'a str>,
    rules: Vec<RuleOut<'a>>,
}

#[derive(Serialize)]
struct RuleOut<'a> {
    id: &'a str,
    entity: &'a str,
    columns: &'a [String],
    property: &'static str,
    kind: &'static str,
    params: BTreeMap<&'static str, Box<RawValue>>,
    #[serde(rename = "where", skip_serializing_if = "Option::is_none")]
    filter: Option<String>,
    skip_null: bool,
    description: &'a str,
}

fn params_out(kind: &RuleKind) -> BTreeMap<&'static str, Box<RawValue>> {
    let mut p = BTreeMap::new();
    match kind {
        RuleKind::Syntax { pattern } => {
            p.insert("pattern", raw_of(pattern.source()));
        }
        RuleKind::Range { min, max } => {
            for (name, flag, b) in [("min", "min_inclusive", min), ("max", "max_inclusive", max)] {
                if let Some(b) = b {
                    p.insert(name, literal_out(&b.value));
                    p.insert(flag, raw_of(&b.inclusive));
                }
            }
        }
        RuleKind::Domain(DomainSource::Values(values)) => {
            let items: Vec<Box<RawValue>> = values.iter().map(literal_out).collect();
            p.insert("values", raw_of(&items));
        }
        RuleKind::Domain(DomainSource::Reference(r)) => {
            p.insert("reference", raw_of(&r.to_string()));
        }
        RuleKind::NotNull => {}
        RuleKind::NoDefault { placeholders } => {
            let items: Vec<Box<RawValue>> = placeholders.iter().map(literal_out).collect();
            p.insert("placeholders", raw_of(&items));
        }
        RuleKind::Unique { key } => {
            p.insert("key", raw_of(key));
        }
        RuleKind::MinCount { threshold } => {
            p.insert("threshold", raw_of(threshold));
        }
        RuleKind::ForeignKey { references } => {
            p.insert("references", raw_of(&references.to_string()));
        }
        RuleKind::FormatClass {
            class,
            extra_targets,
            ..
        } => {
            p.insert("class", raw_of(class));
            let targets: Vec<String> = extra_targets.iter().map(ToString::to_string).collect();
            p.insert("extra_targets", raw_of(&targets));
        }
        RuleKind::Predicate { expr } => {
            p.insert("expr", raw_of(&expr.to_string()));
        }
        RuleKind::Freshness {
            timestamp_column,
            max_age,
            condition,
        } => {
            p.insert("timestamp_column", raw_of(timestamp_column));
            p.insert("max_age", raw_of(&max_age.to_string()));
            if let Some(c) = condition {
                p.insert("condition", raw_of(&c.to_string()));
            }
        }
        RuleKind::Frequency {
            timestamp_column,
            max_gap,
        } => {
            p.insert("timestamp_column", raw_of(timestamp_column));
            p.insert("max_gap", raw_of(&max_gap.to_string()));
        }
    }
    p
}

/// Canonical rules document; parsing it gives back an equal rule set.
/// Timestamp literals are written as text.
pub fn write_ruleset(rs: &RuleSet) -> String {
    let out = RulesOut {
        name: rs.name(),
        version: rs.version(),
        reference_time: format_timestamp(&rs.reference_time()),
        format_classes: rs
            .format_classes()
            .iter()
            .map(|(k, v)| (k.as_str(), v.source()))
            .collect(),
        rules: rs
            .rules()
            .iter()
            .map(|r| RuleOut {
                id: &r.id,
                entity: &r.entity,
                columns: &r.columns,
                property: r.property.acronym(),
                kind: r.kind.tag().name(),
                params: params_out(&r.kind),
                filter: r.filter.as_ref().map(ToString::to_string),
                skip_null: r.skip_null,
                description: &r.description,
            })
            .collect(),
    };
    to_canonical_json(&out)
}

pub fn parse_config(doc: &str) -> Result<ScoringConfig, ParseError> {
    let config: ScoringConfig = from_part(doc, doc)?;
    config.validate().map_err(|e| at(doc, doc, e.to_string()))?;
    Ok(config)
}

pub fn parse_synth_spec(doc: &str) -> Result<SynthSpec, ParseError> {
    from_part(doc, doc)
}

/// Pretty JSON with a trailing newline; map keys come out in a fixed order.
pub fn to_canonical_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULES: &str = r#"{
  "name": "people",
  "version": "1",
  "reference_time": "2024-01-01T00:00:00Z",
  "format_classes": {"zip": "[0-9]{5}"},
  "rules": [
    {"id": "r1", "entity": "person", "columns": ["id"], "property": "EXAC_SINT",
     "kind": "syntax", "params": {"pattern": "^[0-9]{8}[A-Z]$"}},
    {"id": "r2", "entity": "person", "columns": ["height"], "property": "RAN_EXAC",
     "kind": "range", "params": {"min": 0.5, "max": 3, "max_inclusive": false}, "skip_null": true},
    {"id": "r3", "entity": "person", "columns": ["zip"], "property": "CONS_FORM",
     "kind": "format_class", "params": {"class": "zip"}, "where": "age >= 18"}
  ]
}"#;

    #[test]
    fn parses_and_round_trips() {
        let rs = parse_ruleset(RULES).unwrap();
        assert_eq!(rs.rules().len(), 3);
        let RuleKind::Range { min, max } = &rs.rules()[1].kind else {
            panic!()
        };
        assert_eq!(min.as_ref().unwrap().value, Value::Decimal("0.5".parse().unwrap()));
        assert_eq!(max.as_ref().unwrap().value, Value::Integer(3));
        assert!(!max.as_ref().unwrap().inclusive);
        let text = write_ruleset(&rs);
        assert_eq!(parse_ruleset(&text).unwrap(), rs);
        assert_eq!(write_ruleset(&parse_ruleset(&text).unwrap()), text);
    }

    #[test]
    fn errors_point_at_the_rule() {
        let bad = RULES.replace("\"RAN_EXAC\"", "\"XXXX\"");
        let e = parse_ruleset(&bad).unwrap_err();
        assert_eq!((e.line, e.column), (9, 5));
        assert!(e.message.contains("XXXX"));
        let dup = RULES.replace("\"id\": \"r3\"", "\"id\": \"r1\"");
        let e = parse_ruleset(&dup).unwrap_err();
        assert_eq!(e.line, 11);
        assert!(e.message.contains("duplicate rule id `r1`"));
        let incompatible = RULES.replace("\"EXAC_SINT\"", "\"COMP_REG\"");
        let e = parse_ruleset(&incompatible).unwrap_err();
        assert_eq!(e.line, 7);
        let empty = r#"{"name":"x","version":"1","reference_time":"2024-01-01T00:00:00Z","rules":[]}"#;
        let e = parse_ruleset(empty).unwrap_err();
        assert_eq!(e.message, "ruleset must contain at least one rule");
        let syntax = RULES.replace("\"kind\": \"range\",", "\"kind\": \"range\"");
        let e = parse_ruleset(&syntax).unwrap_err();
        assert_eq!(e.line, 10);
        let e = parse_ruleset(&RULES.replace("\"zip\"}", "\"phone\"}")).unwrap_err();
        assert!(e.message.contains("phone"));
    }

    #[test]
    fn catalog_errors_are_located() {
        let doc = r#"{"entities": [
  {"name": "a", "columns": [{"name": "x", "datatype": "text"}]},
  {"name": "a", "columns": []}
]}"#;
        let e = parse_catalog(doc).unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let doc = r#"{"entities": [{"name": "a", "columns": [{"name": "x", "datatype": "blob"}]}]}"#;
        assert!(parse_catalog(doc).is_err());
        let ok = r#"{"entities": [{"name": "a", "columns": [{"name": "x", "datatype": "text", "nullable": true}], "key": ["x"]}]}"#;
        let c = parse_catalog(ok).unwrap();
        assert_eq!(parse_catalog(&write_catalog(&c)).unwrap(), c);
    }

    #[test]
    fn literals_keep_their_type() {
        let r = |s: &str| RawValue::from_string(s.into()).unwrap();
        assert_eq!(literal(&r("12")), Ok(Value::Integer(12)));
        assert_eq!(literal(&r("1.50")), Ok(Value::Decimal("1.5".parse().unwrap())));
        assert_eq!(literal(&r("\"a\"")), Ok(Value::Text("a".into())));
        assert!(literal(&r("1e3")).is_err());
        assert!(literal(&r("[1]")).is_err());
        assert_eq!(literal_out(&Value::Decimal(Decimal::from_i64(2))).get(), "2.0");
    }
}
