use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::case::PatientCase;
use crate::error::{Error, Result};
use crate::role::RoleId;

/// One specialist's output for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub round: u32,
    pub role: RoleId,
    pub reasoning: String,
    pub choice_id: String,
    pub choice_text: String,
}

impl Statement {
    pub fn new(
        case: &PatientCase,
        round: u32,
        role: RoleId,
        reasoning: impl Into<String>,
        raw_choice: &str,
        choice_text: impl Into<String>,
    ) -> Result<Self> {
        if round == 0 {
            return Err(Error::InvalidStatement("round must be >= 1".into()));
        }
        if !role.is_specialist() {
            return Err(Error::NotASpecialist(role));
        }
        let choice_id = case.resolve_option(raw_choice).ok_or_else(|| {
            Error::InvalidStatement(format!(
                "choice {raw_choice:?} is not an option of case {}",
                case.case_id
            ))
        })?;
        Ok(Statement {
            round,
            role,
            reasoning: reasoning.into(),
            choice_id: choice_id.to_string(),
            choice_text: choice_text.into(),
        })
    }

    /// `"E: Nitrofurantoin"`, the shape the lead physician receives.
    pub fn choice_label(&self) -> String {
        format!("{}: {}", self.choice_id, self.choice_text)
    }
}

fn choice_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)choice[\s:*]*\{?\s*([A-Za-z0-9]+)\s*\}?[ \t:]*(?:\{([^}\n]*)\}|([^\n]*))")
            .unwrap()
    })
}

/// Pieces of a specialist reply that carry a valid option.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedChoice {
    pub reasoning: String,
    pub choice_id: String,
    pub choice_text: String,
}

/// Extract the `Choice: {ID}: {Content}` line from a specialist reply.
///
/// The last `Choice` marker whose id resolves to an option wins; text before
/// it is the reasoning. Returns `None` when no marker names a valid option.
pub fn parse_choice(reply: &str, case: &PatientCase) -> Option<ParsedChoice> {
    let matches: Vec<_> = choice_re().captures_iter(reply).collect();
    for caps in matches.iter().rev() {
        let raw_id = caps.get(1).map_or("", |m| m.as_str());
        let Some(id) = case.resolve_option(raw_id) else {
            continue;
        };
        let echoed = caps
            .get(2)
            .or_else(|| caps.get(3))
            .map(|m| m.as_str().trim().trim_matches(|c| c == '{' || c == '}').trim())
            .unwrap_or("");
        let choice_text = if echoed.is_empty() {
            case.option_text(id).unwrap_or_default().to_string()
        } else {
            echoed.to_string()
        };
        let start = caps.get(0).unwrap().start();
        let mut reasoning = reply[..start].trim().to_string();
        if reasoning.is_empty() {
            reasoning = reply.trim().to_string();
        }
        return Some(ParsedChoice {
            reasoning,
            choice_id: id.to_string(),
            choice_text,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uti_case() -> PatientCase {
        PatientCase::new(
            "uti",
            "",
            "Best treatment?",
            [
                ("A", "Ampicillin"),
                ("B", "Ceftriaxone"),
                ("C", "Ciprofloxacin"),
                ("D", "Doxycycline"),
                ("E", "Nitrofurantoin"),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn parses_braced_format() {
        let p = parse_choice(
            "Nitrofurantoin is safe in pregnancy.\nChoice: {E}: {Nitrofurantoin}",
            &uti_case(),
        )
        .unwrap();
        assert_eq!(p.choice_id, "E");
        assert_eq!(p.choice_text, "Nitrofurantoin");
        assert_eq!(p.reasoning, "Nitrofurantoin is safe in pregnancy.");
    }

    #[test]
    fn parses_bold_space_separated_format() {
        let p = parse_choice("• **Choice:** {D} {Doxycycline}", &uti_case()).unwrap();
        assert_eq!(p.choice_id, "D");
        assert_eq!(p.choice_text, "Doxycycline");
    }

    #[test]
    fn lower_case_id_resolves() {
        let p = parse_choice("Choice: e: Nitrofurantoin", &uti_case()).unwrap();
        assert_eq!(p.choice_id, "E");
        assert_eq!(p.choice_text, "Nitrofurantoin");
    }

    #[test]
    fn prose_mention_of_choice_is_skipped() {
        let p = parse_choice(
            "The choice is hard.\nChoice: {C}: {Ciprofloxacin}\nmy choice is final",
            &uti_case(),
        )
        .unwrap();
        assert_eq!(p.choice_id, "C");
    }

    #[test]
    fn missing_or_invalid_choice_is_none() {
        assert!(parse_choice("I think E.", &uti_case()).is_none());
        assert!(parse_choice("Choice: {Z}: {Zinc}", &uti_case()).is_none());
    }

    #[test]
    fn word_ids_resolve() {
        let case =
            PatientCase::new("p", "", "q", [("yes", "yes"), ("no", "no"), ("maybe", "maybe")], None)
                .unwrap();
        let p = parse_choice("Choice: {Yes}: {yes}", &case).unwrap();
        assert_eq!(p.choice_id, "yes");
    }

    #[test]
    fn statement_requires_specialist_and_valid_choice() {
        let case = uti_case();
        assert!(Statement::new(&case, 1, RoleId::LeadPhysician, "", "E", "").is_err());
        assert!(Statement::new(&case, 0, RoleId::Pharmacist, "", "E", "").is_err());
        assert!(Statement::new(&case, 1, RoleId::Pharmacist, "", "Q", "").is_err());
        let s = Statement::new(&case, 1, RoleId::Pharmacist, "r", "{e}", "Nitrofurantoin").unwrap();
        assert_eq!(s.choice_id, "E");
        assert_eq!(s.choice_label(), "E: Nitrofurantoin");
    }
}
