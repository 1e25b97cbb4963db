//! Inherent data quality characteristics and the quality properties that
//! measure them.
//!
//! The property set is closed: fifteen properties, each belonging to exactly
//! one of the five characteristics. Acronyms are the canonical identifiers
//! used in rule files and reports.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CharacteristicId {
    Accuracy,
    Completeness,
    Consistency,
    Credibility,
    Currentness,
}

impl CharacteristicId {
    pub const ALL: [CharacteristicId; 5] = [
        CharacteristicId::Accuracy,
        CharacteristicId::Completeness,
        CharacteristicId::Consistency,
        CharacteristicId::Credibility,
        CharacteristicId::Currentness,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            CharacteristicId::Accuracy => "Accuracy",
            CharacteristicId::Completeness => "Completeness",
            CharacteristicId::Consistency => "Consistency",
            CharacteristicId::Credibility => "Credibility",
            CharacteristicId::Currentness => "Currentness",
        }
    }

    /// Properties of this characteristic, in taxonomy order.
    pub fn properties(self) -> impl Iterator<Item = PropertyId> {
        PropertyId::ALL
            .into_iter()
            .filter(move |p| p.characteristic() == self)
    }
}

impl fmt::Display for CharacteristicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CharacteristicId {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CharacteristicId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownName(s.into()))
    }
}

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyId {
    EXAC_SINT,
    EXAC_SEMAN,
    RAN_EXAC,
    COMP_FICH,
    COMP_REG,
    COMP_VAL_ESP,
    FAL_COMP_FICH,
    CONS_FORM,
    CONS_SEMAN,
    INT_REF,
    RIES_INCO,
    CRED_FUEN,
    CRED_VAL_DAT,
    CONV_ACT,
    FREC_ACT,
}

impl PropertyId {
    pub const ALL: [PropertyId; 15] = [
        PropertyId::EXAC_SINT,
        PropertyId::EXAC_SEMAN,
        PropertyId::RAN_EXAC,
        PropertyId::COMP_FICH,
        PropertyId::COMP_REG,
        PropertyId::COMP_VAL_ESP,
        PropertyId::FAL_COMP_FICH,
        PropertyId::CONS_FORM,
        PropertyId::CONS_SEMAN,
        PropertyId::INT_REF,
        PropertyId::RIES_INCO,
        PropertyId::CRED_FUEN,
        PropertyId::CRED_VAL_DAT,
        PropertyId::CONV_ACT,
        PropertyId::FREC_ACT,
    ];

    pub const fn characteristic(self) -> CharacteristicId {
        use PropertyId::*;
        match self {
            EXAC_SINT | EXAC_SEMAN | RAN_EXAC => CharacteristicId::Accuracy,
            COMP_FICH | COMP_REG | COMP_VAL_ESP | FAL_COMP_FICH => CharacteristicId::Completeness,
            CONS_FORM | CONS_SEMAN | INT_REF | RIES_INCO => CharacteristicId::Consistency,
            CRED_FUEN | CRED_VAL_DAT => CharacteristicId::Credibility,
            CONV_ACT | FREC_ACT => CharacteristicId::Currentness,
        }
    }

    pub const fn acronym(self) -> &'static str {
        use PropertyId::*;
        match self {
            EXAC_SINT => "EXAC_SINT",
            EXAC_SEMAN => "EXAC_SEMAN",
            RAN_EXAC => "RAN_EXAC",
            COMP_FICH => "COMP_FICH",
            COMP_REG => "COMP_REG",
            COMP_VAL_ESP => "COMP_VAL_ESP",
            FAL_COMP_FICH => "FAL_COMP_FICH",
            CONS_FORM => "CONS_FORM",
            CONS_SEMAN => "CONS_SEMAN",
            INT_REF => "INT_REF",
            RIES_INCO => "RIES_INCO",
            CRED_FUEN => "CRED_FUEN",
            CRED_VAL_DAT => "CRED_VAL_DAT",
            CONV_ACT => "CONV_ACT",
            FREC_ACT => "FREC_ACT",
        }
    }

    /// English name of the property.
    pub const fn title(self) -> &'static str {
        use PropertyId::*;
        match self {
            EXAC_SINT => "Syntactic Accuracy",
            EXAC_SEMAN => "Semantic Accuracy",
            RAN_EXAC => "Range of Accuracy",
            COMP_FICH => "File Completeness",
            COMP_REG => "Record Completeness",
            COMP_VAL_ESP => "Data Value Completeness",
            FAL_COMP_FICH => "False Completeness of File",
            CONS_FORM => "Format Consistency",
            CONS_SEMAN => "Semantic Consistency",
            INT_REF => "Referential Integrity",
            RIES_INCO => "Risk of Inconsistency",
            CRED_FUEN => "Data Source Credibility",
            CRED_VAL_DAT => "Data Values Credibility",
            CONV_ACT => "Timeliness of Update",
            FREC_ACT => "Update Frequency",
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.acronym())
    }
}

impl FromStr for PropertyId {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyId::ALL
            .into_iter()
            .find(|p| p.acronym() == s)
            .ok_or_else(|| UnknownName(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownName(pub alloc::string::String);

impl fmt::Display for UnknownName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown name `{}`", self.0)
    }
}

macro_rules! serde_via_str {
    ($ty:ty, $expecting:literal) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&alloc::string::ToString::to_string(self))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(|_| {
                    serde::de::Error::custom(alloc::format!(
                        concat!("unknown ", $expecting, " `{}`"),
                        s
                    ))
                })
            }
        }
    };
}

serde_via_str!(CharacteristicId, "characteristic");
serde_via_str!(PropertyId, "property");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_properties_partition_five_characteristics() {
        let counts: alloc::vec::Vec<usize> = CharacteristicId::ALL
            .iter()
            .map(|c| c.properties().count())
            .collect();
        assert_eq!(counts, [3, 4, 4, 2, 2]);
        assert_eq!(counts.iter().sum::<usize>(), 15);
    }

    #[test]
    fn acronyms_round_trip() {
        for p in PropertyId::ALL {
            assert_eq!(p.acronym().parse::<PropertyId>().unwrap(), p);
        }
        assert!("XXXX".parse::<PropertyId>().is_err());
        assert_eq!(
            "accuracy".parse::<CharacteristicId>().unwrap(),
            CharacteristicId::Accuracy
        );
    }
}
