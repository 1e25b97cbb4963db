//! Acceptance criteria 1 to 8. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a criterion fails for a reason other than the
//! machine it runs on.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dq::formats::{parse_catalog, parse_ruleset, parse_synth_spec};
use dq::pipeline::evaluate;
use dq_core::engine::{eval_rule, MeasureSet, RuleMeasure};
use dq_core::report::EvaluationReport;
use dq_core::rules::{ColumnRef, DomainSource, Rule, RuleKind, RuleSet};
use dq_core::scenario::scenario;
use dq_core::scoring::{
    make_profile, profile_to_level, property_value, score_all, Aggregation, LevelThresholds,
    ProfilingTable, Scores, ScoringConfig,
};
use dq_core::synth::generate;
use dq_core::table::{Entity, Repository};
use dq_core::taxonomy::CharacteristicId;
use dq_core::value::{DataType, Value};

struct Check {
    pass: bool,
    /// Failure caused by the host (too few cores), not by the code.
    limited: bool,
    detail: String,
}

impl Check {
    fn of(pass: bool, detail: impl Into<String>) -> Self {
        Check {
            pass,
            limited: false,
            detail: detail.into(),
        }
    }
}

type Outcome = Result<Check, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: u64) -> bool {
    elapsed < Duration::from_secs(budget)
}

// AC-1

/// The example profiling table as printed, rows are ranges 0..=5 and
/// columns levels 1..=4; range 0 has no caps.
const PUBLISHED_TABLE: [[Option<u32>; 4]; 6] = [
    [None, None, None, None],
    [Some(3), Some(3), Some(3), Some(3)],
    [Some(2), Some(3), Some(3), Some(3)],
    [Some(0), Some(1), Some(2), Some(3)],
    [Some(0), Some(0), Some(0), Some(3)],
    [Some(0), Some(0), Some(0), Some(0)],
];

/// Reads the table literally: a range is met when the count at each level
/// is within that level's cap.
fn published_level(levels: &[u8]) -> u8 {
    let mut profile = [0u32; 5];
    for &l in levels {
        profile[usize::from(l) - 1] += 1;
    }
    (1..=5u8)
        .rev()
        .find(|&r| {
            (0..4).all(|l| PUBLISHED_TABLE[usize::from(r)][l].is_none_or(|cap| profile[l] <= cap))
        })
        .unwrap_or(0)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let levels = [4u8, 4, 3];
    let profile = make_profile(levels);
    ensure(profile.0 == [0, 0, 1, 2, 0], || format!("profile {:?}", profile.0))?;
    let oracle = published_level(&levels);
    ensure(oracle == 3, || format!("oracle gives {oracle}"))?;
    let scaled = profile_to_level(&profile, &ProfilingTable::Scaled.caps(3));
    let mut fixed = [[None; 4]; 6];
    for (r, row) in PUBLISHED_TABLE.iter().enumerate().skip(1) {
        fixed[r] = *row;
    }
    let literal = profile_to_level(&profile, &ProfilingTable::Fixed(fixed).caps(3));
    let elapsed = start.elapsed();
    Ok(Check::of(
        scaled == 3 && literal == 3 && within(elapsed, 1),
        format!("profile <0,0,1,2,0>, level {scaled} (literal table {literal}), {elapsed:.2?}"),
    ))
}

// AC-2

fn ac2() -> Outcome {
    let start = Instant::now();
    let probes = [0.0, 19.99, 20.0, 39.99, 40.0, 69.99, 70.0, 84.99, 85.0, 100.0];
    let want = [1u8, 1, 2, 2, 3, 3, 4, 4, 5, 5];
    let th = LevelThresholds::default();
    let got: Vec<u8> = probes
        .iter()
        .map(|&v| th.level(v).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let elapsed = start.elapsed();
    Ok(Check::of(
        got == want && within(elapsed, 1),
        format!("levels {got:?}, {elapsed:.2?}"),
    ))
}

// AC-3

const KIND_NAMES: [&str; 12] = [
    "syntax",
    "range",
    "domain",
    "not_null",
    "no_default",
    "unique",
    "min_count",
    "foreign_key",
    "format_class",
    "predicate",
    "freshness",
    "frequency",
];

struct Fixture {
    catalog: String,
    rules: String,
    spec: String,
    /// Oracle (A, B).
    expected: (u64, u64),
}

/// `round(k/100 · b)` with halves rounded up, in integers.
fn violations(k: u64, b: u64) -> u64 {
    (k * b + 50) / 100
}

fn fixture(kind: usize, seed: u64) -> Fixture {
    let n = 10 + (seed * 7919 + kind as u64 * 131) % 991;
    let np = 5 + seed % 20;
    let mut k = (seed * 31 + kind as u64 * 17) % 101;

    let (vtype, property, columns, params, gens, extra_plan): (&str, &str, &str, String, String, String) =
        match kind {
            0 => ("text", "EXAC_SINT", r#"["v"]"#, r#"{"pattern": "[A-Z]{2}[0-9]{3}"}"#.into(),
                  r#""m.v": {"type": "template", "template": "AA###"}"#.into(), String::new()),
            1 => ("integer", "RAN_EXAC", r#"["v"]"#, r#"{"min": 0, "max": 100}"#.into(), String::new(), String::new()),
            2 => ("text", "EXAC_SEMAN", r#"["v"]"#, r#"{"values": ["red", "green", "blue"]}"#.into(),
                  String::new(), String::new()),
            3 => ("text", "COMP_REG", r#"["v"]"#, "{}".into(),
                  r#""m.v": {"type": "template", "template": "aaaa"}"#.into(), String::new()),
            4 => ("text", "COMP_VAL_ESP", r#"["v"]"#, r#"{"placeholders": ["N/A", "-"]}"#.into(),
                  r#""m.v": {"type": "template", "template": "aaaa"}"#.into(), String::new()),
            5 => ("text", "FAL_COMP_FICH", r#"["v"]"#, "{}".into(), String::new(), String::new()),
            6 => {
                let threshold = if seed % 2 == 0 { n / 2 } else { n + 1 + seed };
                ("text", "COMP_FICH", "[]", format!(r#"{{"threshold": {threshold}}}"#), String::new(), String::new())
            }
            7 => ("text", "INT_REF", r#"["v"]"#, r#"{"references": "p.code"}"#.into(),
                  r#""p.code": {"type": "template", "template": "P####"}"#.into(), String::new()),
            8 => ("text", "CONS_FORM", r#"["v"]"#, r#"{"class": "cc", "extra_targets": ["p.code"]}"#.into(),
                  r#""m.v": {"type": "template", "template": "AAA"}, "p.code": {"type": "template", "template": "AAA"}"#.into(),
                  String::new()),
            9 => ("integer", "CONS_SEMAN", r#"["v", "w"]"#, r#"{"expr": "v <= w"}"#.into(), String::new(),
                  r#", "comply": {"v": 1, "w": 2}, "violate": {"v": 3, "w": 2}"#.into()),
            10 => ("timestamp", "CONV_ACT", "[]", r#"{"timestamp_column": "v", "max_age": "10d"}"#.into(),
                   String::new(), String::new()),
            11 => ("timestamp", "FREC_ACT", "[]", r#"{"timestamp_column": "v", "max_gap": "2d"}"#.into(),
                   String::new(), String::new()),
            _ => unreachable!(),
        };

    let b = match kind {
        6 | 11 => 1,
        8 => n + np,
        _ => n,
    };
    let expected = if kind == 6 {
        let threshold = if seed % 2 == 0 { n / 2 } else { n + 1 + seed };
        k = if n < threshold { 100 } else { 0 };
        (u64::from(n >= threshold), 1)
    } else {
        // Exact halves depend on how the rate rounds as a float; step past
        // them. A single duplicate row cannot exist.
        while k < 100 && ((k * b) % 100 == 50 || (kind == 5 && violations(k, b) == 1)) {
            k += 1;
        }
        (b - violations(k, b), b)
    };

    let catalog = format!(
        r#"{{"entities": [
  {{"name": "p", "columns": [{{"name": "code", "datatype": "text"}}]}},
  {{"name": "m", "key": ["id"], "columns": [
    {{"name": "id", "datatype": "text"}},
    {{"name": "v", "datatype": "{vtype}", "nullable": true}},
    {{"name": "w", "datatype": "integer", "nullable": true}}
  ]}}
]}}"#
    );
    let rules = format!(
        r#"{{"name": "ac3", "version": "1", "reference_time": "2024-01-01T00:00:00Z",
  "format_classes": {{"cc": "[A-Z]{{3}}"}},
  "rules": [{{"id": "x", "entity": "m", "columns": {columns}, "property": "{property}",
    "kind": "{}", "params": {params}}}]}}"#,
        KIND_NAMES[kind]
    );
    let sep = if gens.is_empty() { "" } else { ", " };
    let spec = format!(
        r#"{{"seed": {seed}, "rows": {{"m": {n}, "p": {np}}},
  "generators": {{"m.id": {{"type": "sequence", "prefix": "M", "width": 5}}{sep}{gens}}},
  "plan": [{{"rule": "x", "rate": {}{extra_plan}}}]}}"#,
        k as f64 / 100.0
    );
    Fixture {
        catalog,
        rules,
        spec,
        expected,
    }
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut max_rows = 0;
    for (kind, name) in KIND_NAMES.iter().enumerate() {
        let mut measures: Vec<RuleMeasure> = Vec::new();
        for seed in 0..100u64 {
            let f = fixture(kind, seed);
            let catalog = parse_catalog(&f.catalog).map_err(|e| e.to_string())?;
            let rs = parse_ruleset(&f.rules).map_err(|e| e.to_string())?;
            let spec = parse_synth_spec(&f.spec).map_err(|e| e.to_string())?;
            let g = generate(&spec, &catalog, &rs).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            let repo = Repository::new(catalog, g.entities).map_err(|e| e.to_string())?;
            max_rows = max_rows.max(repo.entities().map(Entity::len).max().unwrap_or(0));
            let m = eval_rule(&rs.rules()[0], &repo, &rs).map_err(|e| e.to_string())?;
            let synth = g.expected["x"];
            ensure((m.a, m.b) == f.expected && (synth.a, synth.b) == f.expected, || {
                format!(
                    "{name} seed {seed}: engine ({}, {}), synth ({}, {}), oracle {:?}",
                    m.a, m.b, synth.a, synth.b, f.expected
                )
            })?;
            let alone = property_value(&[&m], Aggregation::Micro).map_err(|e| e.to_string())?;
            if m.b > 0 {
                let v = alone.ok_or("missing value")?;
                let want = 100.0 * m.a as f64 / m.b as f64;
                ensure((v - want).abs() < 1e-9, || format!("{name} seed {seed}: {v} vs {want}"))?;
            }
            measures.push(m);
            checked += 1;
        }
        let refs: Vec<&RuleMeasure> = measures.iter().collect();
        let pooled = property_value(&refs, Aggregation::Micro).map_err(|e| e.to_string())?;
        let sum_a: u64 = measures.iter().map(|m| m.a).sum();
        let sum_b: u64 = measures.iter().map(|m| m.b).sum();
        let want = 100.0 * sum_a as f64 / sum_b as f64;
        let v = pooled.ok_or("missing pooled value")?;
        ensure((v - want).abs() < 1e-9, || format!("{name} pooled: {v} vs {want}"))?;
    }
    let elapsed = start.elapsed();
    Ok(Check::of(
        within(elapsed, 60) && max_rows <= 1000,
        format!("{checked} fixtures over 12 kinds, up to {max_rows} rows, {elapsed:.2?}"),
    ))
}

// AC-4

/// Every column a rule reads.
fn touched(rule: &Rule) -> Vec<ColumnRef> {
    let own = |c: &str| ColumnRef::new(&rule.entity, c);
    let mut out = rule.targets();
    if let Some(f) = &rule.filter {
        out.extend(f.columns().into_iter().map(own));
    }
    match &rule.kind {
        RuleKind::Predicate { expr } => out.extend(expr.columns().into_iter().map(own)),
        RuleKind::Freshness {
            condition: Some(c), ..
        } => out.extend(c.columns().into_iter().map(own)),
        RuleKind::ForeignKey { references } | RuleKind::Domain(DomainSource::Reference(references)) => {
            out.push(references.clone())
        }
        _ => {}
    }
    out
}

/// Columns of `entity` that a failing item of `rule` is repaired in.
fn repair_columns(rule: &Rule, entity: &str) -> Vec<ColumnRef> {
    match &rule.kind {
        RuleKind::MinCount { .. } | RuleKind::Frequency { .. } => Vec::new(),
        RuleKind::Unique { key } => vec![ColumnRef::new(&rule.entity, &key[0])],
        RuleKind::Predicate { expr } => expr
            .columns()
            .into_iter()
            .map(|c| ColumnRef::new(&rule.entity, c))
            .collect(),
        _ => {
            let t: Vec<ColumnRef> = rule.targets().into_iter().filter(|c| c.entity == entity).collect();
            if t.len() == 1 {
                t
            } else {
                Vec::new()
            }
        }
    }
}

fn replace_entity(repo: &Repository, name: &str, columns: Vec<Vec<Value>>) -> Result<Repository, String> {
    let entities: Vec<Entity> = repo
        .entities()
        .map(|e| {
            if e.name() == name {
                Entity::new(e.schema().clone(), columns.clone()).map_err(|e| e.to_string())
            } else {
                Ok(e.clone())
            }
        })
        .collect::<Result<_, _>>()?;
    Repository::new(repo.catalog().clone(), entities).map_err(|e| e.to_string())
}

fn no_decrease(before: &Scores, after: &Scores) -> Result<(), String> {
    for (b, a) in before.properties.iter().zip(&after.properties) {
        ensure(b.property == a.property, || "property order changed".into())?;
        ensure(a.value >= b.value && a.level >= b.level, || {
            format!("{}: {:?}/{:?} -> {:?}/{:?}", b.property, b.value, b.level, a.value, a.level)
        })?;
    }
    for (b, a) in before.characteristics.iter().zip(&after.characteristics) {
        ensure(a.level >= b.level, || {
            format!("{}: level {:?} -> {:?}", b.characteristic, b.level, a.level)
        })?;
    }
    Ok(())
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let s = scenario("travel-v1").ok_or("no travel-v1")?;
    let g = generate(&s.synth, &s.catalog, &s.ruleset).map_err(|e| e.to_string())?;
    let mut repo = Repository::new(s.catalog.clone(), g.entities).map_err(|e| e.to_string())?;
    let rs: &RuleSet = &s.ruleset;
    let config = ScoringConfig::default();
    let mut ms: MeasureSet = evaluate(rs, &repo, 1).map_err(|e| e.to_string())?;
    let mut scores = score_all(&ms, rs, &config).map_err(|e| e.to_string())?;

    let mut readers: BTreeMap<ColumnRef, usize> = BTreeMap::new();
    for rule in rs.rules() {
        for c in touched(rule).into_iter().collect::<BTreeSet<_>>() {
            *readers.entry(c).or_default() += 1;
        }
    }
    let mut rng = StdRng::seed_from_u64(25_012);
    let mut level_ups = 0;
    for step in 0..100 {
        // Items whose repair only touches columns no other rule reads.
        let mut candidates = Vec::new();
        for rule in rs.rules() {
            let m = &ms.measures[&rule.id];
            for r in &m.failing {
                let cols = repair_columns(rule, &r.entity);
                if !cols.is_empty() && cols.iter().all(|c| readers.get(c) == Some(&1)) {
                    candidates.push((rule, r.clone(), cols));
                }
            }
        }
        ensure(!candidates.is_empty(), || format!("step {step}: nothing left to repair"))?;
        let (rule, target, cols) = candidates.swap_remove(rng.gen_range(0..candidates.len()));
        let entity = repo.entity(&target.entity).ok_or("missing entity")?;
        let schema = entity.schema().clone();
        let mut columns: Vec<Vec<Value>> =
            (0..schema.columns.len()).map(|i| entity.column(i).to_vec()).collect();
        let idx = |c: &ColumnRef| schema.column_index(&c.column).ok_or("missing column");
        let failing: BTreeSet<usize> = ms.measures[&rule.id]
            .failing
            .iter()
            .filter(|r| r.entity == target.entity)
            .map(|r| r.ordinal)
            .collect();
        if let RuleKind::Unique { .. } = rule.kind {
            let i = idx(&cols[0])?;
            columns[i][target.ordinal] = match schema.columns[i].datatype {
                DataType::Text => Value::Text(format!("repaired-{step}")),
                DataType::Integer => Value::Integer(i64::MAX - step),
                other => return Err(format!("no fresh {other} value")),
            };
        } else {
            let donor = (0..entity.len())
                .find(|o| !failing.contains(o))
                .ok_or_else(|| format!("{}: every row fails", rule.id))?;
            for c in &cols {
                let i = idx(c)?;
                columns[i][target.ordinal] = columns[i][donor].clone();
            }
        }
        repo = replace_entity(&repo, &target.entity, columns)?;

        let before_m = ms.measures[&rule.id].clone();
        for r in rs.rules() {
            if touched(r).iter().any(|c| c.entity == target.entity) || r.entity == target.entity {
                let m = eval_rule(r, &repo, rs).map_err(|e| e.to_string())?;
                ms.measures.insert(r.id.clone(), m);
            }
        }
        let after_m = &ms.measures[&rule.id];
        ensure(after_m.a > before_m.a && after_m.b == before_m.b, || {
            format!("{}: ({}, {}) -> ({}, {})", rule.id, before_m.a, before_m.b, after_m.a, after_m.b)
        })?;
        let next = score_all(&ms, rs, &config).map_err(|e| e.to_string())?;
        no_decrease(&scores, &next).map_err(|e| format!("step {step}, rule {}: {e}", rule.id))?;
        level_ups += next
            .properties
            .iter()
            .zip(&scores.properties)
            .filter(|(a, b)| a.level > b.level)
            .count();
        scores = next;
    }
    let elapsed = start.elapsed();
    Ok(Check::of(
        within(elapsed, 60),
        format!("100 repairs on travel-v1, no decrease, {level_ups} property level rises, {elapsed:.2?}"),
    ))
}

// AC-5, AC-6, AC-7 through the command line

fn dq(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dq::cli::run(std::iter::once("dq").chain(args.iter().copied()), &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes, evaluates and certifies a scenario; returns the report and
/// the `certify` exit code.
fn replay(name: &str, dir: &Path) -> Result<(EvaluationReport, RuleSet, usize, i32), String> {
    let data = dir.join(name);
    let (code, _, err) = dq(&["synth", "--scenario", name, "--out", s(&data)]);
    ensure(code == 0, || format!("synth {name}: {code} {err}"))?;
    let out = dir.join(format!("{name}-report"));
    let (code, _, err) = dq(&[
        "evaluate",
        "--rules",
        s(&data.join("rules.json")),
        "--schema",
        s(&data.join("schema.json")),
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--format",
        "json",
    ]);
    ensure(code == 0, || format!("evaluate {name}: {code} {err}"))?;
    let report_path = out.join("report.json");
    let text = std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?;
    let report: EvaluationReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let (certify, _, _) = dq(&["certify", s(&report_path)]);
    let rules = std::fs::read_to_string(data.join("rules.json")).map_err(|e| e.to_string())?;
    let rs = parse_ruleset(&rules).map_err(|e| e.to_string())?;
    let schema = std::fs::read_to_string(data.join("schema.json")).map_err(|e| e.to_string())?;
    let catalog = parse_catalog(&schema).map_err(|e| e.to_string())?;
    let repo = dq::snapshot::load_snapshot(&data, &catalog).map_err(|e| e.to_string())?;
    let rows = repo.entities().map(Entity::len).sum();
    Ok((report, rs, rows, certify))
}

fn levels_of(report: &EvaluationReport) -> BTreeMap<CharacteristicId, u8> {
    report
        .characteristics
        .iter()
        .filter_map(|c| c.level.map(|l| (c.characteristic, l)))
        .collect()
}

fn show(levels: &BTreeMap<CharacteristicId, u8>) -> String {
    levels
        .iter()
        .map(|(c, l)| format!("{}:{l}", &c.to_string()[..4]))
        .collect::<Vec<_>>()
        .join(" ")
}

use CharacteristicId::{Accuracy, Completeness, Consistency, Credibility, Currentness};

fn ac5() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (v1, rs, rows1, cert1) = replay("travel-v1", dir.path())?;
    let (v2, _, rows2, cert2) = replay("travel-v2", dir.path())?;
    let counts = rs.counts_by_characteristic();
    let split: Vec<usize> = CharacteristicId::ALL.iter().map(|c| counts[c]).collect();
    ensure(rs.rules().len() == 375 && split == [89, 78, 91, 54, 63], || {
        format!("{} rules split {split:?}", rs.rules().len())
    })?;
    ensure(rows1 <= 100_000 && rows2 <= 100_000, || format!("{rows1}/{rows2} rows"))?;
    let (l1, l2) = (levels_of(&v1), levels_of(&v2));
    let want1 = BTreeMap::from([
        (Accuracy, 1),
        (Completeness, 2),
        (Consistency, 2),
        (Credibility, 3),
        (Currentness, 2),
    ]);
    let pass = l1 == want1
        && l2.get(&Accuracy) == Some(&5)
        && l2.get(&Completeness) == Some(&4)
        && l2.get(&Consistency) == Some(&3)
        && l2.get(&Currentness) == Some(&5)
        && l2.values().all(|&l| l >= 3)
        && cert1 == 2
        && cert2 == 0;
    let elapsed = start.elapsed();
    Ok(Check::of(
        pass && within(elapsed, 120),
        format!(
            "v1 [{}] certify {cert1}; v2 [{}] certify {cert2}; {rows1} rows, {elapsed:.2?}",
            show(&l1),
            show(&l2)
        ),
    ))
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (v1, _, _, cert1) = replay("registry-v1", dir.path())?;
    let (v2, _, _, cert2) = replay("registry-v2", dir.path())?;
    let (l1, l2) = (levels_of(&v1), levels_of(&v2));
    let at = |l: &BTreeMap<CharacteristicId, u8>, c| l.get(&c).copied();
    let pass = at(&l1, Accuracy) == Some(1)
        && at(&l1, Consistency) == Some(1)
        && at(&l2, Accuracy) == Some(5)
        && at(&l2, Consistency) == Some(3)
        && at(&l2, Currentness) == Some(5)
        && [&l1, &l2]
            .iter()
            .all(|l| at(l, Completeness) == Some(5) && at(l, Credibility) == Some(5))
        && cert1 == 2
        && cert2 == 0;
    let elapsed = start.elapsed();
    Ok(Check::of(
        pass && within(elapsed, 120),
        format!("v1 [{}]; v2 [{}]; {elapsed:.2?}", show(&l1), show(&l2)),
    ))
}

fn dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        let name = e.file_name().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(e.path()).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    for out in ["a", "b"] {
        let (code, _, err) = dq(&["synth", "--scenario", "registry-v1", "--seed", "77", "--out", s(&d.join(out))]);
        ensure(code == 0, || format!("synth: {err}"))?;
    }
    let (code, _, err) = dq(&["synth", "--scenario", "registry-v1", "--seed", "78", "--out", s(&d.join("c"))]);
    ensure(code == 0, || format!("synth: {err}"))?;
    let (a, b, c) = (dir_bytes(&d.join("a"))?, dir_bytes(&d.join("b"))?, dir_bytes(&d.join("c"))?);
    let same_snapshot = a == b;
    let seed_matters = a != c;

    let data = d.join("a");
    let mut reports = Vec::new();
    for (out, jobs) in [("r1", "1"), ("r2", "3")] {
        let (code, _, err) = dq(&[
            "evaluate",
            "--rules",
            s(&data.join("rules.json")),
            "--schema",
            s(&data.join("schema.json")),
            "--data",
            s(&data),
            "--out",
            s(&d.join(out)),
            "--format",
            "json",
            "--jobs",
            jobs,
        ]);
        ensure(code == 0, || format!("evaluate: {err}"))?;
        reports.push(std::fs::read(d.join(out).join("report.json")).map_err(|e| e.to_string())?);
    }
    let same_report = reports[0] == reports[1];
    let elapsed = start.elapsed();
    Ok(Check::of(
        same_snapshot && seed_matters && same_report && within(elapsed, 60),
        format!(
            "snapshots identical: {same_snapshot}, other seed differs: {seed_matters}, \
             reports identical: {same_report} ({} bytes), {elapsed:.2?}",
            reports[0].len()
        ),
    ))
}

// AC-8 through the built binary

const AC8_ROWS: usize = 1_000_000;

fn ac8_inputs(dir: &Path) -> Result<(), String> {
    let schema = r#"{"entities": [{"name": "big", "key": ["id"], "columns": [
  {"name": "id", "datatype": "text"},
  {"name": "s1", "datatype": "text"}, {"name": "s2", "datatype": "text"},
  {"name": "s3", "datatype": "text"}, {"name": "r1", "datatype": "integer"},
  {"name": "r2", "datatype": "integer"}, {"name": "r3", "datatype": "integer"},
  {"name": "r4", "datatype": "integer"}, {"name": "d1", "datatype": "text"},
  {"name": "d2", "datatype": "text"}, {"name": "d3", "datatype": "text"}
]}]}"#;
    let syntax = |c: &str, p: &str| {
        format!(
            r#"{{"id": "{c}", "entity": "big", "columns": ["{c}"], "property": "EXAC_SINT", "kind": "syntax", "params": {{"pattern": "{p}"}}}}"#
        )
    };
    let range = |c: &str, lo: i64, hi: i64| {
        format!(
            r#"{{"id": "{c}", "entity": "big", "columns": ["{c}"], "property": "RAN_EXAC", "kind": "range", "params": {{"min": {lo}, "max": {hi}}}}}"#
        )
    };
    let domain = |c: &str, v: &str| {
        format!(
            r#"{{"id": "{c}", "entity": "big", "columns": ["{c}"], "property": "EXAC_SEMAN", "kind": "domain", "params": {{"values": {v}}}}}"#
        )
    };
    let rules = [
        syntax("s1", "[A-Z]{3}-[0-9]{4}"),
        syntax("s2", "[0-9]{8}[A-Z]"),
        syntax("s3", "[a-z]+@[a-z]+\\\\.com"),
        range("r1", 0, 120),
        range("r2", 1, 1_000_000),
        range("r3", -50, 50),
        range("r4", 1900, 2024),
        domain("d1", r#"["A", "B", "C", "D"]"#),
        domain("d2", r#"["red", "green", "blue"]"#),
        domain("d3", r#"["ES", "PT", "FR", "IT", "DE"]"#),
    ];
    let rules = format!(
        r#"{{"name": "scale", "version": "1", "reference_time": "2024-01-01T00:00:00Z", "rules": [{}]}}"#,
        rules.join(",\n")
    );
    let plan: Vec<serde_json::Value> = ["s1", "s2", "s3", "r1", "r2", "r3", "r4", "d1", "d2", "d3"]
        .iter()
        .enumerate()
        .map(|(i, r)| serde_json::json!({"rule": r, "rate": (i + 1) as f64 / 100.0}))
        .collect();
    let template = |t: &str| serde_json::json!({"type": "template", "template": t});
    let spec = serde_json::json!({
        "seed": 8,
        "rows": {"big": AC8_ROWS},
        "generators": {
            "big.id": {"type": "sequence", "prefix": "B", "width": 7},
            "big.s1": template("AAA-####"),
            "big.s2": template("########A"),
            "big.s3": template("aaaaa@aaaa.com"),
        },
        "plan": plan,
    })
    .to_string();
    for (f, body) in [("schema.json", schema.to_string()), ("rules.json", rules), ("spec.json", spec)] {
        std::fs::write(dir.join(f), body).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn binary(args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dq"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.status.success(), || {
        format!("dq {}: {}", args[0], String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(elapsed)
}

fn ac8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    ac8_inputs(d)?;
    let data = d.join("data");
    binary(&[
        "synth",
        "--spec",
        s(&d.join("spec.json")),
        "--rules",
        s(&d.join("rules.json")),
        "--schema",
        s(&d.join("schema.json")),
        "--out",
        s(&data),
    ])?;
    let run = |jobs: &str, out: &str| {
        binary(&[
            "evaluate",
            "--rules",
            s(&d.join("rules.json")),
            "--schema",
            s(&d.join("schema.json")),
            "--data",
            s(&data),
            "--out",
            s(&d.join(out)),
            "--format",
            "json",
            "--jobs",
            jobs,
        ])
    };
    let t1 = run("1", "j1")?;
    let t4 = run("4", "j4")?;
    let r1 = std::fs::read(d.join("j1/report.json")).map_err(|e| e.to_string())?;
    let r4 = std::fs::read(d.join("j4/report.json")).map_err(|e| e.to_string())?;
    let identical = r1 == r4;
    let speedup = t1.as_secs_f64() / t4.as_secs_f64();
    let cores = std::thread::available_parallelism().map_or(1, usize::from);
    let fast = within(t1, 120);
    let scaled = speedup >= 1.5;
    let mut check = Check::of(
        fast && identical && scaled,
        format!(
            "{AC8_ROWS} rows x 10 rules: 1 job {t1:.2?} (budget 120 s), 4 jobs {t4:.2?}, \
             speedup {speedup:.2}x (need 1.5x), identical bytes: {identical}, {cores} core(s)"
        ),
    );
    if fast && identical && !scaled && cores < 4 {
        check.limited = true;
        check.detail.push_str("; speedup needs at least 4 cores");
    }
    Ok(check)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("worked profile example", ac1),
        ("threshold mapping", ac2),
        ("oracle equivalence", ac3),
        ("monotonicity under repair", ac4),
        ("travel scenario replay", ac5),
        ("registry scenario replay", ac6),
        ("determinism", ac7),
        ("performance at desk scale", ac8),
    ];
    let mut hard_failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let check = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(c)) => c,
            Ok(Err(msg)) => Check::of(false, msg),
            Err(_) => Check::of(false, "panicked"),
        };
        let tag = if check.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] AC-{} {name}: {}", i + 1, check.detail);
        if !check.pass && !check.limited {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
