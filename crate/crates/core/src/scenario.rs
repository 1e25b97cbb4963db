//! Replayable before/after fixtures for three organizations.
//!
//! Each scenario is a catalog, a rule set and a synthesis plan. Rules are
//! spread round-robin over the entities and every rule owns its own
//! columns, so the planned rate of a property fixes its quality value and
//! therefore its level. Both versions of a scenario share the same rules;
//! only the data differs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::parse_expr;
use crate::pattern::Pattern;
use crate::rules::{Bound, ColumnRef, DomainSource, Rule, RuleKind, RuleSet};
use crate::schema::{ColumnSchema, EntitySchema, SchemaCatalog};
use crate::synth::{ColumnGen, Scalar, SynthSpec, ViolationPlan};
use crate::taxonomy::{CharacteristicId, PropertyId};
use crate::value::{parse_timestamp, DataType, Span, Value};

pub const SCENARIOS: [&str; 6] = [
    "travel-v1",
    "travel-v2",
    "registry-v1",
    "registry-v2",
    "school-v1",
    "school-v2",
];

const REFERENCE_TIME: &str = "2024-06-30T00:00:00Z";

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub catalog: SchemaCatalog,
    pub ruleset: RuleSet,
    pub synth: SynthSpec,
    /// Characteristic levels the fixture is built to produce under the
    /// default scoring configuration.
    pub expected_levels: BTreeMap<CharacteristicId, u8>,
}

struct Blueprint {
    name: &'static str,
    entities: &'static [&'static str],
    rows: usize,
    seed: u64,
    /// Rule count per characteristic, in taxonomy order.
    split: [usize; 5],
    /// Property levels per version, in `PropertyId::ALL` order.
    levels: [[u8; 15]; 2],
    characteristic_levels: [[u8; 5]; 2],
}

const TRAVEL: Blueprint = Blueprint {
    name: "travel",
    entities: &[
        "booking",
        "customer",
        "flight",
        "hotel",
        "train",
        "tour",
        "package",
        "invoice",
        "payment",
        "agency",
        "supplier",
        "destination",
        "review",
        "employee",
    ],
    rows: 1000,
    seed: 1001,
    split: [89, 78, 91, 54, 63],
    levels: [
        [1, 1, 1, 5, 1, 5, 5, 1, 4, 5, 4, 4, 3, 1, 5],
        [5, 5, 5, 5, 4, 5, 5, 3, 3, 4, 5, 4, 3, 5, 5],
    ],
    characteristic_levels: [[1, 2, 2, 3, 2], [5, 4, 3, 3, 5]],
};

const REGISTRY: Blueprint = Blueprint {
    name: "registry",
    entities: &[
        "company",
        "person",
        "address",
        "activity",
        "filing",
        "shareholder",
        "director",
        "branch",
        "license",
        "sector",
        "capital",
        "merger",
        "dissolution",
        "auditor",
        "account",
        "notary",
        "deed",
        "appointment",
        "revocation",
        "power",
        "seal",
        "registration",
        "annotation",
        "certificate",
        "fee",
        "payment",
        "office",
        "region",
        "municipality",
        "country",
        "currency",
        "language",
        "document",
        "request",
        "response",
        "event",
    ],
    rows: 800,
    seed: 2002,
    split: [189, 131, 340, 72, 81],
    levels: [
        [1, 1, 1, 5, 5, 5, 5, 1, 1, 1, 5, 5, 5, 3, 5],
        [5, 5, 5, 5, 5, 5, 5, 3, 3, 4, 5, 5, 5, 5, 5],
    ],
    characteristic_levels: [[1, 5, 1, 5, 3], [5, 5, 3, 5, 5]],
};

const SCHOOL: Blueprint = Blueprint {
    name: "school",
    entities: &[
        "student",
        "program",
        "course",
        "enrollment",
        "teacher",
        "survey",
        "answer",
        "question",
        "campus",
        "term",
    ],
    rows: 1500,
    seed: 3003,
    split: [94, 100, 176, 48, 70],
    levels: [
        [5, 5, 1, 5, 5, 4, 5, 4, 3, 5, 4, 4, 5, 5, 4],
        [5, 5, 5, 5, 5, 4, 5, 4, 3, 5, 4, 4, 5, 5, 4],
    ],
    characteristic_levels: [[2, 4, 3, 4, 4], [5, 4, 3, 4, 4]],
};

/// Violation rate whose property value sits well inside the level's band.
fn rate_for(level: u8) -> f64 {
    match level {
        1 => 0.9,
        2 => 0.7,
        3 => 0.45,
        4 => 0.22,
        _ => 0.02,
    }
}

struct Builder<'a> {
    bp: &'a Blueprint,
    version: usize,
    columns: Vec<Vec<ColumnSchema>>,
    rules: Vec<Rule>,
    generators: BTreeMap<String, ColumnGen>,
    plan: Vec<ViolationPlan>,
    classes: BTreeMap<String, Pattern>,
}

fn col(name: &str, datatype: DataType) -> ColumnSchema {
    ColumnSchema {
        name: name.into(),
        datatype,
        nullable: true,
    }
}

fn text(s: &str) -> Value {
    Value::Text(s.into())
}

fn pattern(p: &str) -> Pattern {
    Pattern::new(p).expect("literal pattern")
}

fn inclusive(value: Value) -> Option<Bound> {
    Some(Bound {
        value,
        inclusive: true,
    })
}

impl Builder<'_> {
    fn entity(&self, e: usize) -> &'static str {
        self.bp.entities[e]
    }

    fn add_column(&mut self, e: usize, name: &str, ty: DataType) {
        self.columns[e].push(col(name, ty));
    }

    fn generator(&mut self, e: usize, column: &str, g: ColumnGen) {
        self.generators
            .insert(format!("{}.{column}", self.entity(e)), g);
    }

    /// Adds one rule of property `p` (the `k`-th of that property) to
    /// entity `e`, planned at `rate`.
    fn add_rule(&mut self, e: usize, p: PropertyId, k: usize, rate: f64) {
        use PropertyId::*;
        let entity = self.entity(e);
        let stem = format!("{}_{k:03}", p.acronym().to_ascii_lowercase());
        let mut plan = ViolationPlan {
            rule: format!("{entity}.{stem}"),
            rate,
            violation: None,
            comply: BTreeMap::new(),
            violate: BTreeMap::new(),
        };
        let mut columns = vec![stem.clone()];
        let (kind, description) = match p {
            EXAC_SINT => {
                let (re, template) = [
                    ("[0-9]{8}[A-Z]", "########A"),
                    ("[A-Z]{3}-[0-9]{4}", "AAA-####"),
                    ("[A-Z]{2}[0-9]{6}", "AA######"),
                ][k % 3];
                self.add_column(e, &stem, DataType::Text);
                self.generator(
                    e,
                    &stem,
                    ColumnGen::Template {
                        template: template.into(),
                    },
                );
                (
                    RuleKind::Syntax {
                        pattern: pattern(re),
                    },
                    format!("{stem} matches {re}"),
                )
            }
            EXAC_SEMAN if k % 2 == 0 => {
                self.add_column(e, &stem, DataType::Text);
                (
                    RuleKind::Domain(DomainSource::Values(vec![
                        text("ACTIVE"),
                        text("CLOSED"),
                        text("PENDING"),
                    ])),
                    format!("{stem} is a known status"),
                )
            }
            EXAC_SEMAN | CONS_SEMAN => {
                columns.clear();
                let (a, b) = (format!("{stem}_from"), format!("{stem}_to"));
                self.add_column(e, &a, DataType::Integer);
                self.add_column(e, &b, DataType::Integer);
                plan.comply.insert(a.clone(), Scalar::Int(1));
                plan.comply.insert(b.clone(), Scalar::Int(2));
                plan.violate.insert(a.clone(), Scalar::Int(3));
                plan.violate.insert(b.clone(), Scalar::Int(2));
                let src = format!("{a} <= {b}");
                (
                    RuleKind::Predicate {
                        expr: parse_expr(&src).expect("literal expression"),
                    },
                    format!("{a} does not exceed {b}"),
                )
            }
            RAN_EXAC => {
                let (ty, min, max) = match k % 3 {
                    0 => (DataType::Integer, Value::Integer(0), Value::Integer(120)),
                    1 => (DataType::Decimal, text("0"), text("9999.99")),
                    _ => (
                        DataType::Timestamp,
                        text("2000-01-01T00:00:00Z"),
                        text(REFERENCE_TIME),
                    ),
                };
                self.add_column(e, &stem, ty);
                let description = format!("{stem} between {min} and {max}");
                (
                    RuleKind::Range {
                        min: inclusive(min),
                        max: inclusive(max),
                    },
                    description,
                )
            }
            COMP_FICH => {
                columns.clear();
                let threshold = if k % 2 == 0 {
                    1
                } else {
                    (self.bp.rows / 2) as u64
                };
                (
                    RuleKind::MinCount { threshold },
                    format!("{entity} holds at least {threshold} records"),
                )
            }
            COMP_REG => {
                self.add_column(e, &stem, DataType::Text);
                (RuleKind::NotNull, format!("{stem} is present"))
            }
            COMP_VAL_ESP if k % 2 == 0 => {
                self.add_column(e, &stem, DataType::Text);
                (
                    RuleKind::NoDefault {
                        placeholders: vec![text("N/A"), text("UNKNOWN")],
                    },
                    format!("{stem} holds no placeholder"),
                )
            }
            COMP_VAL_ESP => {
                self.add_column(e, &stem, DataType::Text);
                (RuleKind::NotNull, format!("{stem} is present"))
            }
            FAL_COMP_FICH => {
                columns.clear();
                self.add_column(e, &stem, DataType::Text);
                (
                    RuleKind::Unique {
                        key: vec![stem.clone()],
                    },
                    format!("{stem} identifies one record"),
                )
            }
            CONS_FORM if k % 2 == 0 => {
                self.add_column(e, &stem, DataType::Text);
                self.generator(
                    e,
                    &stem,
                    ColumnGen::Template {
                        template: "aaaaaa@aaaa.com".into(),
                    },
                );
                (
                    RuleKind::Syntax {
                        pattern: pattern("[a-z]+@[a-z]+\\.com"),
                    },
                    format!("{stem} is an e-mail address"),
                )
            }
            CONS_FORM => {
                self.add_column(e, &stem, DataType::Text);
                self.generator(
                    e,
                    &stem,
                    ColumnGen::Template {
                        template: "+34 #########".into(),
                    },
                );
                let class = self
                    .classes
                    .entry("phone".into())
                    .or_insert_with(|| pattern("\\+34 [0-9]{9}"))
                    .clone();
                (
                    RuleKind::FormatClass {
                        class: "phone".into(),
                        pattern: class,
                        extra_targets: Vec::new(),
                    },
                    format!("{stem} follows the phone format"),
                )
            }
            INT_REF => {
                self.add_column(e, &stem, DataType::Text);
                let parent = self.entity(0);
                (
                    RuleKind::ForeignKey {
                        references: ColumnRef::new(parent, "id"),
                    },
                    format!("{stem} refers to an existing {parent}"),
                )
            }
            RIES_INCO => {
                columns.clear();
                let (a, b) = (format!("{stem}_main"), format!("{stem}_copy"));
                self.add_column(e, &a, DataType::Text);
                self.add_column(e, &b, DataType::Text);
                plan.comply.insert(a.clone(), Scalar::Text("X".into()));
                plan.comply.insert(b.clone(), Scalar::Text("X".into()));
                plan.violate.insert(a.clone(), Scalar::Text("X".into()));
                plan.violate.insert(b.clone(), Scalar::Text("Y".into()));
                let src = format!("{a} = {b}");
                (
                    RuleKind::Predicate {
                        expr: parse_expr(&src).expect("literal expression"),
                    },
                    format!("{b} repeats {a}"),
                )
            }
            CRED_FUEN => {
                columns.clear();
                self.add_column(e, &stem, DataType::Text);
                plan.comply
                    .insert(stem.clone(), Scalar::Text("official".into()));
                plan.violate
                    .insert(stem.clone(), Scalar::Text("unverified".into()));
                let src = format!("{stem} = 'official'");
                (
                    RuleKind::Predicate {
                        expr: parse_expr(&src).expect("literal expression"),
                    },
                    format!("{stem} names an official source"),
                )
            }
            CRED_VAL_DAT if k % 2 == 0 => {
                self.add_column(e, &stem, DataType::Text);
                (
                    RuleKind::Domain(DomainSource::Values(vec![
                        text("EUR"),
                        text("USD"),
                        text("GBP"),
                    ])),
                    format!("{stem} is an accepted currency"),
                )
            }
            CRED_VAL_DAT => {
                self.add_column(e, &stem, DataType::Text);
                let parent = self.entity(0);
                (
                    RuleKind::Domain(DomainSource::Reference(ColumnRef::new(parent, "country"))),
                    format!("{stem} is a country listed in {parent}"),
                )
            }
            CONV_ACT => {
                columns.clear();
                self.add_column(e, &stem, DataType::Timestamp);
                (
                    RuleKind::Freshness {
                        timestamp_column: stem.clone(),
                        max_age: Span::from_days(30),
                        condition: None,
                    },
                    format!("{stem} is at most 30 days old"),
                )
            }
            FREC_ACT => {
                columns.clear();
                self.add_column(e, &stem, DataType::Timestamp);
                (
                    RuleKind::Frequency {
                        timestamp_column: stem.clone(),
                        max_gap: Span::from_days(2),
                    },
                    format!("{stem} is updated at least every 2 days"),
                )
            }
        };
        self.rules.push(Rule {
            id: plan.rule.clone(),
            entity: entity.into(),
            columns,
            property: p,
            kind,
            filter: None,
            skip_null: false,
            description,
        });
        self.plan.push(plan);
    }
}

fn build(bp: &Blueprint, version: usize) -> Scenario {
    let n = bp.entities.len();
    let mut b = Builder {
        bp,
        version,
        columns: vec![Vec::new(); n],
        rules: Vec::new(),
        generators: BTreeMap::new(),
        plan: Vec::new(),
        classes: BTreeMap::new(),
    };
    for e in 0..n {
        b.add_column(e, "id", DataType::Text);
        let prefix = format!("{}-", b.entity(e)[..3].to_ascii_uppercase());
        b.generator(
            e,
            "id",
            ColumnGen::Sequence {
                prefix,
                start: 1,
                width: 6,
            },
        );
    }
    b.add_column(0, "country", DataType::Text);
    let countries = ["ES", "FR", "PT", "IT"]
        .map(|c| Scalar::Text(c.into()))
        .to_vec();
    b.generator(0, "country", ColumnGen::Pool { values: countries });

    let mut slot = 0;
    for (ci, c) in CharacteristicId::ALL.into_iter().enumerate() {
        let props: Vec<PropertyId> = c.properties().collect();
        let total = bp.split[ci];
        for (pi, p) in props.iter().enumerate() {
            let count = total / props.len() + usize::from(pi < total % props.len());
            let level = bp.levels[b.version][PropertyId::ALL.iter().position(|x| x == p).unwrap()];
            let rate = rate_for(level);
            // Entity-level rules are all-or-nothing, so the rate becomes
            // the share of failing rules.
            let entity_level = matches!(p, PropertyId::COMP_FICH | PropertyId::FREC_ACT);
            let failing = if level == 5 {
                0
            } else {
                crate::synth::violation_count(rate, count)
            };
            for k in 0..count {
                let r = if entity_level {
                    f64::from(u8::from(k < failing))
                } else {
                    rate
                };
                b.add_rule(slot % n, *p, k, r);
                slot += 1;
            }
        }
    }

    let entities: Vec<EntitySchema> = bp
        .entities
        .iter()
        .zip(b.columns)
        .map(|(name, columns)| EntitySchema {
            name: name.to_string(),
            columns,
            key: Some(vec!["id".into()]),
        })
        .collect();
    let catalog = SchemaCatalog::new(entities).expect("scenario catalog");
    let ruleset = RuleSet::new(
        bp.name.into(),
        (version + 1).to_string(),
        parse_timestamp(REFERENCE_TIME).expect("reference time"),
        b.classes,
        b.rules,
    )
    .expect("scenario rules");
    let synth = SynthSpec {
        seed: bp.seed + version as u64,
        rows: bp
            .entities
            .iter()
            .map(|e| (e.to_string(), bp.rows))
            .collect(),
        generators: b.generators,
        plan: b.plan,
    };
    let expected_levels = CharacteristicId::ALL
        .into_iter()
        .zip(bp.characteristic_levels[version])
        .collect();
    Scenario {
        name: format!("{}-v{}", bp.name, version + 1),
        catalog,
        ruleset,
        synth,
        expected_levels,
    }
}

/// Builds a scenario by name (see [`SCENARIOS`]).
pub fn scenario(name: &str) -> Option<Scenario> {
    let (base, version) = name.rsplit_once("-v")?;
    let version = match version {
        "1" => 0,
        "2" => 1,
        _ => return None,
    };
    let bp = match base {
        "travel" => &TRAVEL,
        "registry" => &REGISTRY,
        "school" => &SCHOOL,
        _ => return None,
    };
    Some(build(bp, version))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate_ruleset;

    #[test]
    fn rule_counts_follow_the_split() {
        for (name, total) in [("travel-v1", 375), ("registry-v2", 813), ("school-v1", 488)] {
            let s = scenario(name).unwrap();
            assert_eq!(s.ruleset.rules().len(), total);
            assert!(validate_ruleset(&s.ruleset, &s.catalog).is_empty());
            let rows: usize = s.synth.rows.values().sum();
            assert!(rows <= 100_000);
        }
        let counts = scenario("travel-v2")
            .unwrap()
            .ruleset
            .counts_by_characteristic();
        assert_eq!(
            counts.values().copied().collect::<Vec<_>>(),
            [89, 78, 91, 54, 63]
        );
    }

    #[test]
    fn versions_share_rules() {
        let a = scenario("school-v1").unwrap();
        let b = scenario("school-v2").unwrap();
        assert_eq!(a.ruleset.rules(), b.ruleset.rules());
        assert_eq!(a.catalog, b.catalog);
        assert!(scenario("school-v3").is_none());
        assert!(scenario("mall-v1").is_none());
    }
}
