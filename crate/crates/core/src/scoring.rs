//! From base measures to property values, levels, characteristic levels
//! and the certification verdict.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{MeasureSet, RuleMeasure};
use crate::rules::RuleSet;
use crate::taxonomy::{CharacteristicId, PropertyId};

/// Certification floor: every evaluated characteristic must reach it.
pub const CERTIFICATION_LEVEL: u8 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("measures span several properties ({0} and {1})")]
    MixedProperty(PropertyId, PropertyId),
    #[error("quality value {0} is outside [0, 100]")]
    OutOfRange(f64),
    #[error("thresholds must be strictly increasing and inside (0, 100), got {0:?}")]
    InvalidThresholds([f64; 4]),
    #[error("profiling table for {0}: caps must not increase from one range to the next")]
    InvalidProfile(CharacteristicId),
    #[error("no characteristic could be evaluated")]
    NothingEvaluated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// `100·ΣA/ΣB`, weighting every item equally.
    #[default]
    Micro,
    /// `100·mean(A/B)`, weighting every rule equally.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct LevelThresholds([f64; 4]);

impl LevelThresholds {
    pub fn new(t: [f64; 4]) -> Result<Self, ScoringError> {
        let inside = t.iter().all(|&x| x > 0.0 && x < 100.0);
        let increasing = t.windows(2).all(|w| w[0] < w[1]);
        if inside && increasing {
            Ok(LevelThresholds(t))
        } else {
            Err(ScoringError::InvalidThresholds(t))
        }
    }

    pub fn bounds(&self) -> [f64; 4] {
        self.0
    }

    /// Bands are closed below and open above; the top band includes 100.
    pub fn level(&self, v: f64) -> Result<u8, ScoringError> {
        if !(0.0..=100.0).contains(&v) {
            return Err(ScoringError::OutOfRange(v));
        }
        Ok(1 + self.0.iter().filter(|&&t| v >= t).count() as u8)
    }
}

impl Default for LevelThresholds {
    fn default() -> Self {
        LevelThresholds([20.0, 40.0, 70.0, 85.0])
    }
}

impl TryFrom<[f64; 4]> for LevelThresholds {
    type Error = ScoringError;

    fn try_from(t: [f64; 4]) -> Result<Self, Self::Error> {
        LevelThresholds::new(t)
    }
}

impl From<LevelThresholds> for [f64; 4] {
    fn from(t: LevelThresholds) -> Self {
        t.0
    }
}

/// Count of evaluated properties at each level 1..=5.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile(pub [u32; 5]);

impl Profile {
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

pub fn make_profile(levels: impl IntoIterator<Item = u8>) -> Profile {
    let mut p = Profile::default();
    for l in levels {
        assert!((1..=5).contains(&l), "property level {l} outside 1..=5");
        p.0[usize::from(l - 1)] += 1;
    }
    p
}

/// Caps for levels 1..=4 in ranges 0..=5; `None` is unbounded. Range 0 is
/// unconditional and its row is never consulted.
pub type Caps = [[Option<u32>; 4]; 6];

/// The published example table, written for a three-property
/// characteristic.
pub const EXAMPLE_CAPS: [[u32; 4]; 6] = [
    [0, 0, 0, 0],
    [3, 3, 3, 3],
    [2, 3, 3, 3],
    [0, 1, 2, 3],
    [0, 0, 0, 3],
    [0, 0, 0, 0],
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub enum ProfilingTable {
    /// The example table with each cap of 3 replaced by the number of
    /// evaluated properties `n`, and every cap clamped to `n`.
    #[default]
    Scaled,
    Fixed(Caps),
}

/// JSON form: the string `"scaled"` or a 6×4 cap matrix.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TableRepr {
    Name(alloc::string::String),
    Caps(Caps),
}

impl TryFrom<TableRepr> for ProfilingTable {
    type Error = alloc::string::String;

    fn try_from(r: TableRepr) -> Result<Self, Self::Error> {
        match r {
            TableRepr::Caps(c) => Ok(ProfilingTable::Fixed(c)),
            TableRepr::Name(n) if n == "scaled" => Ok(ProfilingTable::Scaled),
            TableRepr::Name(n) => Err(alloc::format!("unknown profiling table `{n}`")),
        }
    }
}

impl From<ProfilingTable> for TableRepr {
    fn from(t: ProfilingTable) -> Self {
        match t {
            ProfilingTable::Scaled => TableRepr::Name("scaled".into()),
            ProfilingTable::Fixed(c) => TableRepr::Caps(c),
        }
    }
}

impl ProfilingTable {
    pub fn caps(&self, n: u32) -> Caps {
        match self {
            ProfilingTable::Fixed(c) => *c,
            ProfilingTable::Scaled => {
                EXAMPLE_CAPS.map(|row| row.map(|c| Some(if c == 3 { n } else { c.min(n) })))
            }
        }
    }

    /// Checks that no cap grows as the range index grows.
    pub fn validate(&self, characteristic: CharacteristicId) -> Result<(), ScoringError> {
        let ProfilingTable::Fixed(c) = self else {
            return Ok(());
        };
        let as_limit = |x: Option<u32>| x.map_or(u64::MAX, u64::from);
        for r in 2..6 {
            for l in 0..4 {
                if as_limit(c[r][l]) > as_limit(c[r - 1][l]) {
                    return Err(ScoringError::InvalidProfile(characteristic));
                }
            }
        }
        Ok(())
    }
}

/// Highest range `r` in 5..=1 whose caps bound the cumulative counts
/// `c_1 + … + c_l` for every level `l` in 1..=4, else 0.
pub fn profile_to_level(p: &Profile, caps: &Caps) -> u8 {
    let mut cumulative = [0u32; 4];
    let mut acc = 0;
    for l in 0..4 {
        acc += p.0[l];
        cumulative[l] = acc;
    }
    (1..=5u8)
        .rev()
        .find(|&r| {
            caps[usize::from(r)]
                .iter()
                .zip(cumulative)
                .all(|(cap, count)| cap.is_none_or(|c| count <= c))
        })
        .unwrap_or(0)
}

/// Quality value in `[0, 100]` of one property; `None` when no measure is
/// applicable.
pub fn property_value(
    measures: &[&RuleMeasure],
    mode: Aggregation,
) -> Result<Option<f64>, ScoringError> {
    if let Some(first) = measures.first() {
        if let Some(other) = measures.iter().find(|m| m.property != first.property) {
            return Err(ScoringError::MixedProperty(first.property, other.property));
        }
    }
    let applicable: Vec<&&RuleMeasure> = measures.iter().filter(|m| m.b > 0).collect();
    if applicable.is_empty() {
        return Ok(None);
    }
    Ok(Some(match mode {
        Aggregation::Micro => {
            let a: u64 = applicable.iter().map(|m| m.a).sum();
            let b: u64 = applicable.iter().map(|m| m.b).sum();
            (100 * a) as f64 / b as f64
        }
        Aggregation::Macro => {
            let sum: f64 = applicable.iter().map(|m| m.a as f64 / m.b as f64).sum();
            100.0 * sum / applicable.len() as f64
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyScore {
    pub property: PropertyId,
    pub value: Option<f64>,
    pub level: Option<u8>,
    pub sum_a: u64,
    pub sum_b: u64,
    pub rule_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicResult {
    pub characteristic: CharacteristicId,
    pub profile: Profile,
    pub level: Option<u8>,
    pub strengths: Vec<PropertyId>,
    pub weaknesses: Vec<PropertyId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub characteristic: CharacteristicId,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Eligible,
    NotEligible { reasons: Vec<Shortfall> },
}

impl Verdict {
    pub fn is_eligible(&self) -> bool {
        matches!(self, Verdict::Eligible)
    }
}

pub fn certification_eligibility(
    results: &[CharacteristicResult],
) -> Result<Verdict, ScoringError> {
    let evaluated: Vec<(CharacteristicId, u8)> = results
        .iter()
        .filter_map(|r| r.level.map(|l| (r.characteristic, l)))
        .collect();
    if evaluated.is_empty() {
        return Err(ScoringError::NothingEvaluated);
    }
    let reasons: Vec<Shortfall> = evaluated
        .into_iter()
        .filter(|&(_, l)| l < CERTIFICATION_LEVEL)
        .map(|(characteristic, level)| Shortfall {
            characteristic,
            level,
        })
        .collect();
    Ok(if reasons.is_empty() {
        Verdict::Eligible
    } else {
        Verdict::NotEligible { reasons }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub thresholds: LevelThresholds,
    /// Overrides per characteristic; others use [`ProfilingTable::Scaled`].
    pub profiles: BTreeMap<CharacteristicId, ProfilingTable>,
    pub aggregation: Aggregation,
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        for (c, t) in &self.profiles {
            t.validate(*c)?;
        }
        Ok(())
    }

    pub fn table(&self, c: CharacteristicId) -> &ProfilingTable {
        const SCALED: ProfilingTable = ProfilingTable::Scaled;
        self.profiles.get(&c).unwrap_or(&SCALED)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub properties: Vec<PropertyScore>,
    pub characteristics: Vec<CharacteristicResult>,
    pub verdict: Verdict,
}

/// Scores every property and characteristic that has rules in `rs`.
pub fn score_all(
    ms: &MeasureSet,
    rs: &RuleSet,
    config: &ScoringConfig,
) -> Result<Scores, ScoringError> {
    config.validate()?;
    let mut by_property: BTreeMap<PropertyId, Vec<&RuleMeasure>> = BTreeMap::new();
    for rule in rs.rules() {
        let entry = by_property.entry(rule.property).or_default();
        if let Some(m) = ms.get(&rule.id) {
            entry.push(m);
        }
    }
    let mut properties = Vec::new();
    for (&property, measures) in &by_property {
        let value = property_value(measures, config.aggregation)?;
        let level = value.map(|v| config.thresholds.level(v)).transpose()?;
        properties.push(PropertyScore {
            property,
            value,
            level,
            sum_a: measures.iter().map(|m| m.a).sum(),
            sum_b: measures.iter().map(|m| m.b).sum(),
            rule_count: measures.len(),
        });
    }
    let mut characteristics = Vec::new();
    for c in CharacteristicId::ALL {
        let scored: Vec<&PropertyScore> = properties
            .iter()
            .filter(|p| p.property.characteristic() == c)
            .collect();
        if scored.is_empty() {
            continue;
        }
        let levelled: Vec<(PropertyId, u8)> = scored
            .iter()
            .filter_map(|p| p.level.map(|l| (p.property, l)))
            .collect();
        let profile = make_profile(levelled.iter().map(|&(_, l)| l));
        let level = (profile.total() > 0)
            .then(|| profile_to_level(&profile, &config.table(c).caps(profile.total())));
        characteristics.push(CharacteristicResult {
            characteristic: c,
            profile,
            level,
            strengths: levelled
                .iter()
                .filter(|&&(_, l)| l >= 4)
                .map(|&(p, _)| p)
                .collect(),
            weaknesses: levelled
                .iter()
                .filter(|&&(_, l)| l <= 2)
                .map(|&(p, _)| p)
                .collect(),
        });
    }
    let verdict = certification_eligibility(&characteristics)?;
    Ok(Scores {
        properties,
        characteristics,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::KindTag;
    use alloc::string::String;
    use alloc::vec;

    fn measure(property: PropertyId, a: u64, b: u64) -> RuleMeasure {
        RuleMeasure {
            rule_id: String::new(),
            entity: String::new(),
            property,
            kind: KindTag::Syntax,
            a,
            b,
            failing: vec![],
            elapsed: core::time::Duration::ZERO,
        }
    }

    #[test]
    fn micro_and_macro_values() {
        let ms = [
            measure(PropertyId::EXAC_SINT, 3, 4),
            measure(PropertyId::EXAC_SINT, 9, 16),
        ];
        let refs: Vec<&RuleMeasure> = ms.iter().collect();
        assert_eq!(
            property_value(&refs, Aggregation::Micro).unwrap(),
            Some(60.0)
        );
        // mean(0.75, 0.5625) = 0.65625
        assert_eq!(
            property_value(&refs, Aggregation::Macro).unwrap(),
            Some(65.625)
        );
        let na = [measure(PropertyId::EXAC_SINT, 0, 0)];
        assert_eq!(property_value(&[&na[0]], Aggregation::Micro).unwrap(), None);
        let mixed = [
            measure(PropertyId::EXAC_SINT, 1, 1),
            measure(PropertyId::RAN_EXAC, 1, 1),
        ];
        assert!(matches!(
            property_value(&[&mixed[0], &mixed[1]], Aggregation::Micro),
            Err(ScoringError::MixedProperty(..))
        ));
    }

    #[test]
    fn default_bands() {
        let t = LevelThresholds::default();
        let probes = [
            (0.0, 1),
            (19.99, 1),
            (20.0, 2),
            (39.99, 2),
            (40.0, 3),
            (69.99, 3),
            (70.0, 4),
            (84.99, 4),
            (85.0, 5),
            (90.0, 5),
            (100.0, 5),
        ];
        for (v, l) in probes {
            assert_eq!(t.level(v).unwrap(), l, "value {v}");
        }
        assert!(t.level(100.5).is_err());
        assert!(LevelThresholds::new([20.0, 20.0, 70.0, 85.0]).is_err());
        assert!(LevelThresholds::new([0.0, 20.0, 70.0, 85.0]).is_err());
    }

    #[test]
    fn worked_profile() {
        let p = make_profile([4, 4, 3]);
        assert_eq!(p, Profile([0, 0, 1, 2, 0]));
        let caps = ProfilingTable::Scaled.caps(3);
        assert_eq!(profile_to_level(&p, &caps), 3);
        assert_eq!(profile_to_level(&Profile([0, 0, 0, 0, 3]), &caps), 5);
        assert_eq!(profile_to_level(&Profile([1, 0, 0, 0, 2]), &caps), 2);
        assert_eq!(profile_to_level(&Profile([0, 0, 0, 3, 0]), &caps), 4);
        assert_eq!(profile_to_level(&Profile([3, 0, 0, 0, 0]), &caps), 1);
    }

    #[test]
    fn scaled_table_keeps_invariant() {
        for n in 0..8 {
            let t = ProfilingTable::Fixed(ProfilingTable::Scaled.caps(n));
            assert!(t.validate(CharacteristicId::Accuracy).is_ok(), "n = {n}");
        }
        let one = ProfilingTable::Scaled.caps(1);
        assert_eq!(profile_to_level(&make_profile([3]), &one), 3);
    }

    #[test]
    fn verdicts() {
        let r = |c, l: Option<u8>| CharacteristicResult {
            characteristic: c,
            profile: Profile::default(),
            level: l,
            strengths: vec![],
            weaknesses: vec![],
        };
        use CharacteristicId::*;
        let v = certification_eligibility(&[
            r(Accuracy, Some(1)),
            r(Completeness, Some(5)),
            r(Consistency, Some(1)),
            r(Credibility, Some(5)),
            r(Currentness, Some(5)),
        ])
        .unwrap();
        assert_eq!(
            v,
            Verdict::NotEligible {
                reasons: vec![
                    Shortfall {
                        characteristic: Accuracy,
                        level: 1
                    },
                    Shortfall {
                        characteristic: Consistency,
                        level: 1
                    }
                ]
            }
        );
        let threes: Vec<_> = CharacteristicId::ALL
            .into_iter()
            .map(|c| r(c, Some(3)))
            .collect();
        assert!(certification_eligibility(&threes).unwrap().is_eligible());
        assert_eq!(
            certification_eligibility(&[r(Accuracy, None)]),
            Err(ScoringError::NothingEvaluated)
        );
    }

    #[test]
    fn config_json_shape() {
        let c: ScoringConfig = serde_json::from_str(
            r#"{"thresholds":[10,30,60,80],"aggregation":"macro",
                "profiles":{"Accuracy":[[null,null,null,null],[null,null,null,null],[2,3,3,3],[0,1,2,3],[0,0,0,3],[0,0,0,0]]}}"#,
        )
        .unwrap();
        assert_eq!(c.thresholds.bounds(), [10.0, 30.0, 60.0, 80.0]);
        assert_eq!(c.aggregation, Aggregation::Macro);
        assert!(c.validate().is_ok());
        assert!(serde_json::from_str::<ScoringConfig>(r#"{"thresholds":[50,40,60,80]}"#).is_err());
    }
}
