use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Every agent role in the framework.
///
/// The first eight are specialists who vote in the consultation; the last
/// four are auxiliary roles that route, summarize and review but never vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoleId {
    GeneralInternalMedicine,
    GeneralSurgeon,
    Pediatrician,
    ObstetricianGynecologist,
    Radiologist,
    Neurologist,
    Pathologist,
    Pharmacist,
    PrimaryCareDoctor,
    LeadPhysician,
    ChainOfThoughtReviewer,
    SafetyEthicsReviewer,
}

impl RoleId {
    pub const SPECIALISTS: [RoleId; 8] = [
        RoleId::GeneralInternalMedicine,
        RoleId::GeneralSurgeon,
        RoleId::Pediatrician,
        RoleId::ObstetricianGynecologist,
        RoleId::Radiologist,
        RoleId::Neurologist,
        RoleId::Pathologist,
        RoleId::Pharmacist,
    ];

    pub const AUXILIARY: [RoleId; 4] = [
        RoleId::PrimaryCareDoctor,
        RoleId::LeadPhysician,
        RoleId::ChainOfThoughtReviewer,
        RoleId::SafetyEthicsReviewer,
    ];

    /// Specialists that triage must always include.
    pub const MANDATORY: [RoleId; 3] =
        [RoleId::Radiologist, RoleId::Pathologist, RoleId::Pharmacist];

    pub fn all() -> impl Iterator<Item = RoleId> {
        Self::SPECIALISTS.into_iter().chain(Self::AUXILIARY)
    }

    pub fn name(self) -> &'static str {
        match self {
            RoleId::GeneralInternalMedicine => "General Internal Medicine Doctor",
            RoleId::GeneralSurgeon => "General Surgeon",
            RoleId::Pediatrician => "Pediatrician",
            RoleId::ObstetricianGynecologist => "Obstetrician and Gynecologist",
            RoleId::Radiologist => "Radiologist",
            RoleId::Neurologist => "Neurologist",
            RoleId::Pathologist => "Pathologist",
            RoleId::Pharmacist => "Pharmacist",
            RoleId::PrimaryCareDoctor => "Primary Care Doctor",
            RoleId::LeadPhysician => "Lead Physician",
            RoleId::ChainOfThoughtReviewer => "Chain-of-Thought Reviewer",
            RoleId::SafetyEthicsReviewer => "Safety and Ethics Reviewer",
        }
    }

    pub fn is_specialist(self) -> bool {
        Self::SPECIALISTS.contains(&self)
    }

    pub fn is_mandatory(self) -> bool {
        Self::MANDATORY.contains(&self)
    }

    /// Exact name match after trimming, collapsing whitespace and case-folding.
    /// No synonyms are recognized.
    pub fn from_name(raw: &str) -> Option<RoleId> {
        let key = fold_name(raw);
        RoleId::all().find(|r| fold_name(r.name()) == key)
    }
}

fn fold_name(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role name {0:?}")]
pub struct UnknownRole(pub String);

impl FromStr for RoleId {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoleId::from_name(s).ok_or_else(|| UnknownRole(s.to_string()))
    }
}

impl Serialize for RoleId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RoleId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_are_disjoint_and_cover_all_roles() {
        for role in RoleId::all() {
            let in_s = RoleId::SPECIALISTS.contains(&role);
            let in_a = RoleId::AUXILIARY.contains(&role);
            assert!(in_s ^ in_a, "{role} must be in exactly one set");
        }
        assert_eq!(RoleId::all().count(), 12);
    }

    #[test]
    fn name_round_trips() {
        for role in RoleId::all() {
            assert_eq!(RoleId::from_name(role.name()), Some(role));
            let json = serde_json::to_string(&role).unwrap();
            assert_eq!(serde_json::from_str::<RoleId>(&json).unwrap(), role);
        }
    }

    #[test]
    fn matching_is_exact_modulo_case_and_spacing() {
        assert_eq!(
            RoleId::from_name("  obstetrician   and gynecologist "),
            Some(RoleId::ObstetricianGynecologist)
        );
        assert_eq!(RoleId::from_name("Cardiologist"), None);
        assert_eq!(RoleId::from_name("OB/GYN"), None);
        assert_eq!(RoleId::from_name("Pharmacists"), None);
    }
}
