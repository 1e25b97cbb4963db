use std::collections::BTreeMap;

use dq_core::engine::eval_all;
use dq_core::scenario::{scenario, SCENARIOS};
use dq_core::scoring::{score_all, ScoringConfig, Verdict};
use dq_core::synth::{expected_vs_actual, generate};
use dq_core::table::Repository;

#[test]
fn every_scenario_reaches_its_levels() {
    for name in SCENARIOS {
        let s = scenario(name).unwrap();
        let g = generate(&s.synth, &s.catalog, &s.ruleset).unwrap();
        let repo = Repository::new(s.catalog.clone(), g.entities).unwrap();
        let ms = eval_all(&s.ruleset, &repo, String::new(), String::new()).unwrap();
        assert!(expected_vs_actual(&g.expected, &ms).is_empty(), "{name}");
        let scores = score_all(&ms, &s.ruleset, &ScoringConfig::default()).unwrap();
        let levels: BTreeMap<_, _> = scores
            .characteristics
            .iter()
            .map(|c| (c.characteristic, c.level.unwrap()))
            .collect();
        assert_eq!(levels, s.expected_levels, "{name}");
        let eligible = s.expected_levels.values().all(|&l| l >= 3);
        assert_eq!(scores.verdict == Verdict::Eligible, eligible, "{name}");
    }
}
