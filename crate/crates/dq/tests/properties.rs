use std::collections::BTreeMap;

use proptest::prelude::*;

use dq::formats::{parse_ruleset, write_ruleset};
use dq::pipeline::evaluate;
use dq_core::engine::{eval_rule, MeasureSet};

mod common;
use common::*;

fn rule_set_json(cfgs: &[RuleCfg], order: &[usize]) -> String {
    let objs: Vec<String> = order
        .iter()
        .map(|&i| rule_obj(&format!("r{i}"), &cfgs[i]))
        .collect();
    ruleset_json(&objs)
}

type Outcome = BTreeMap<String, (u64, u64, Vec<(String, usize)>)>;

fn outcome(ms: &MeasureSet) -> Outcome {
    ms.measures
        .iter()
        .map(|(id, m)| {
            let refs = m.failing.iter().map(|r| (r.entity.clone(), r.ordinal)).collect();
            (id.clone(), (m.a, m.b, refs))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rule_files_round_trip(cfgs in prop::collection::vec(rule_cfg(), 1..12)) {
        let order: Vec<usize> = (0..cfgs.len()).collect();
        let rs = parse_ruleset(&rule_set_json(&cfgs, &order)).unwrap();
        let text = write_ruleset(&rs);
        let back = parse_ruleset(&text).unwrap();
        prop_assert_eq!(&back, &rs);
        prop_assert_eq!(write_ruleset(&back), text);
    }

    /// Rule order and thread count change nothing but the ruleset
    /// fingerprint.
    #[test]
    fn measures_ignore_rule_order_and_jobs(
        cfgs in prop::collection::vec(rule_cfg(), 1..10),
        keys in prop::collection::vec(any::<u32>(), 10),
        rows in prop::collection::vec(row(), 0..50),
        refs in prop::collection::vec(opt(code()), 0..6),
        jobs in 2usize..5,
    ) {
        let repo = repository(&rows, &refs);
        let order: Vec<usize> = (0..cfgs.len()).collect();
        let mut shuffled = order.clone();
        shuffled.sort_by_key(|&i| (keys[i], i));
        let rs = parse_ruleset(&rule_set_json(&cfgs, &order)).unwrap();
        let permuted = parse_ruleset(&rule_set_json(&cfgs, &shuffled)).unwrap();
        let base = evaluate(&rs, &repo, 1).unwrap();
        let par = evaluate(&permuted, &repo, jobs).unwrap();
        prop_assert_eq!(outcome(&base), outcome(&par));
        prop_assert_eq!(&base.snapshot_fingerprint, &par.snapshot_fingerprint);
        prop_assert_eq!(base, evaluate(&rs, &repo, jobs).unwrap());
    }

    /// Fixing the offending cell of one failing row raises A by exactly one
    /// and leaves B alone; for unique keys the former partners may pass too.
    #[test]
    fn repairing_one_row_raises_a(
        cfg in rule_cfg().prop_filter("row-scoped kinds", |c| !matches!(c.kind, 8 | 13)),
        mut rows in prop::collection::vec(row(), 1..50),
        mut refs in prop::collection::vec(opt(code()), 1..6),
        pick in any::<prop::sample::Index>(),
    ) {
        refs[0] = Some("A1".into());
        let rs = parse_ruleset(&rule_json(&cfg)).unwrap();
        let before = eval_rule(&rs.rules()[0], &repository(&rows, &refs), &rs).unwrap();
        prop_assume!(!before.failing.is_empty());
        let target = &before.failing[pick.index(before.failing.len())];
        let i = target.ordinal;
        if target.entity == "r" {
            refs[i] = Some("B2".into());
        } else {
            let row = &mut rows[i];
            match cfg.kind {
                0 | 3 | 9 | 10 => row.code = Some("A1".into()),
                1 | 4 => row.n = Some(25),
                2 | 5 => row.status = Some("A".into()),
                6 | 7 => {
                    row.code = Some(format!("Z{i}"));
                    row.n = Some(row.n.unwrap_or(25));
                }
                11 => {
                    let n = row.n.unwrap_or(25);
                    row.n = Some(n);
                    row.copy = Some(n);
                }
                12 => row.age = Some(0),
                _ => unreachable!(),
            }
        }
        let after = eval_rule(&rs.rules()[0], &repository(&rows, &refs), &rs).unwrap();
        prop_assert_eq!(after.b, before.b);
        if matches!(cfg.kind, 6 | 7) {
            prop_assert!(after.a > before.a);
        } else {
            prop_assert_eq!(after.a, before.a + 1);
        }
        prop_assert!(!after.failing.iter().any(|r| r.entity == target.entity && r.ordinal == i));
    }
}
