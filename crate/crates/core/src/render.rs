//! Fixed-width text rendering of reports and comparisons.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt::Write;

use crate::report::{ComparisonReport, EvaluationReport, VerdictStatus};
use crate::scoring::{Verdict, CERTIFICATION_LEVEL};

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

fn value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

fn signed_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:+.2}"))
}

fn signed(v: Option<i8>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:+}"))
}

fn status(s: VerdictStatus) -> &'static str {
    match s {
        VerdictStatus::Eligible => "ELIGIBLE",
        VerdictStatus::NotEligible => "NOT ELIGIBLE",
    }
}

pub fn render_report(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let m = &r.metadata;
    let _ = writeln!(
        out,
        "Evaluation of {} (version {})",
        m.ruleset_name, m.ruleset_version
    );
    let _ = writeln!(out, "Reference time: {}", m.reference_time);
    let _ = writeln!(out, "Ruleset:  {}", m.ruleset_fingerprint);
    let _ = writeln!(out, "Snapshot: {}", m.snapshot_fingerprint);
    let rows: usize = r.scope.row_counts.values().sum();
    let rules: usize = r.scope.rule_counts.values().sum();
    let _ = writeln!(
        out,
        "Scope: {} entities, {rows} rows, {rules} rules",
        r.scope.entity_count
    );
    out.push('\n');

    let _ = writeln!(
        out,
        "{:<14} {:>5}  {:<15} {:>5}",
        "CHARACTERISTIC", "LEVEL", "PROFILE", "RULES"
    );
    for c in &r.characteristics {
        let p = c.profile.0;
        let profile = format!("<{},{},{},{},{}>", p[0], p[1], p[2], p[3], p[4]);
        let n = r
            .scope
            .rule_counts
            .get(&c.characteristic)
            .copied()
            .unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<14} {:>5}  {:<15} {:>5}",
            c.characteristic.name(),
            opt(c.level),
            profile,
            n
        );
    }
    out.push('\n');

    let _ = writeln!(
        out,
        "{:<14} {:<14} {:>7} {:>5} {:>5}  {:>12}",
        "PROPERTY", "CHARACTERISTIC", "VALUE", "LEVEL", "RULES", "A/B"
    );
    for p in &r.properties {
        let ab = format!("{}/{}", p.sum_a, p.sum_b);
        let _ = writeln!(
            out,
            "{:<14} {:<14} {:>7} {:>5} {:>5}  {:>12}",
            p.property.acronym(),
            p.property.characteristic().name(),
            value(p.value),
            opt(p.level),
            p.rule_count,
            ab
        );
    }
    out.push('\n');

    match &r.verdict {
        Verdict::Eligible => {
            let _ = writeln!(
                out,
                "VERDICT: ELIGIBLE (min level {CERTIFICATION_LEVEL} rule)"
            );
        }
        Verdict::NotEligible { reasons } => {
            for s in reasons {
                let _ = writeln!(
                    out,
                    "  {} at level {} (< {CERTIFICATION_LEVEL})",
                    s.characteristic.name(),
                    s.level
                );
            }
            let _ = writeln!(
                out,
                "VERDICT: NOT ELIGIBLE (min level {CERTIFICATION_LEVEL} rule)"
            );
        }
    }
    out
}

pub fn render_comparison(c: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Comparison of {}: version {} -> version {}",
        c.ruleset_name, c.first_version, c.second_version
    );
    out.push('\n');

    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>6} {:>6}",
        "CHARACTERISTIC", "FIRST", "SECOND", "DELTA"
    );
    for d in &c.characteristics {
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>6} {:>6}",
            d.characteristic.name(),
            opt(d.first_level),
            opt(d.second_level),
            signed(d.level_delta)
        );
    }
    out.push('\n');

    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>7} {:>8}  {:>6}",
        "PROPERTY", "FIRST", "SECOND", "DELTA", "LEVELS"
    );
    for d in &c.properties {
        let levels = format!("{}->{}", opt(d.first_level), opt(d.second_level));
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>7} {:>8}  {:>6}",
            d.property.acronym(),
            value(d.first_value),
            value(d.second_value),
            signed_value(d.value_delta),
            levels
        );
    }
    out.push('\n');

    let list = |items: alloc::vec::Vec<String>| {
        if items.is_empty() {
            "none".into()
        } else {
            items.join(", ")
        }
    };
    let _ = writeln!(
        out,
        "Added: {}",
        list(
            c.added_properties
                .iter()
                .map(|p| p.to_string())
                .chain(c.added_characteristics.iter().map(|x| x.to_string()))
                .collect()
        )
    );
    let _ = writeln!(
        out,
        "Removed: {}",
        list(
            c.removed_properties
                .iter()
                .map(|p| p.to_string())
                .chain(c.removed_characteristics.iter().map(|x| x.to_string()))
                .collect()
        )
    );
    let _ = writeln!(out, "Regressions: {}", list(c.regressions.clone()));
    let _ = writeln!(
        out,
        "VERDICT: {} -> {}",
        status(c.verdict[0]),
        status(c.verdict[1])
    );
    out
}
