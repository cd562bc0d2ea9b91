//! Prompt templates for every agent role.
//!
//! Defaults are compiled in from `templates/`; a directory holding files with
//! the same names overrides them one by one. Placeholders are written
//! `{{name}}`; single braces pass through untouched so the output formats the
//! agents are asked for (`Choice: {E}: {...}`) survive rendering.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::role::RoleId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub triage_system: String,
    pub triage_user: String,
    pub specialist_system: String,
    pub specialist_user: String,
    pub lead_physician_system: String,
    pub lead_physician_user: String,
    pub cot_reviewer_correct: String,
    pub cot_reviewer_chain: String,
    pub cot_reviewer_user: String,
    pub safety_reviewer_system: String,
    pub safety_reviewer_user: String,
}

macro_rules! builtin {
    ($name:literal) => {
        include_str!(concat!("../templates/", $name, ".txt"))
    };
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            triage_system: builtin!("triage_system").into(),
            triage_user: builtin!("triage_user").into(),
            specialist_system: builtin!("specialist_system").into(),
            specialist_user: builtin!("specialist_user").into(),
            lead_physician_system: builtin!("lead_physician_system").into(),
            lead_physician_user: builtin!("lead_physician_user").into(),
            cot_reviewer_correct: builtin!("cot_reviewer_correct").into(),
            cot_reviewer_chain: builtin!("cot_reviewer_chain").into(),
            cot_reviewer_user: builtin!("cot_reviewer_user").into(),
            safety_reviewer_system: builtin!("safety_reviewer_system").into(),
            safety_reviewer_user: builtin!("safety_reviewer_user").into(),
        }
    }
}

impl Templates {
    /// Built-in templates with any `<name>.txt` found in `dir` swapped in.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut t = Templates::default();
        let slots: [(&str, &mut String); 11] = [
            ("triage_system", &mut t.triage_system),
            ("triage_user", &mut t.triage_user),
            ("specialist_system", &mut t.specialist_system),
            ("specialist_user", &mut t.specialist_user),
            ("lead_physician_system", &mut t.lead_physician_system),
            ("lead_physician_user", &mut t.lead_physician_user),
            ("cot_reviewer_correct", &mut t.cot_reviewer_correct),
            ("cot_reviewer_chain", &mut t.cot_reviewer_chain),
            ("cot_reviewer_user", &mut t.cot_reviewer_user),
            ("safety_reviewer_system", &mut t.safety_reviewer_system),
            ("safety_reviewer_user", &mut t.safety_reviewer_user),
        ];
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(&path)?;
            }
        }
        Ok(t)
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").unwrap())
}

/// Substitute `{{name}}` placeholders. Every placeholder must have a value.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String> {
    let vars: HashMap<&str, &str> = vars.iter().copied().collect();
    let mut missing = Vec::new();
    let out = placeholder_re().replace_all(template, |caps: &regex::Captures<'_>| {
        let key = caps.get(1).unwrap().as_str();
        match vars.get(key) {
            Some(v) => (*v).to_string(),
            None => {
                missing.push(key.to_string());
                String::new()
            }
        }
    });
    if !missing.is_empty() {
        return Err(Error::Template(format!("no value for {}", missing.join(", "))));
    }
    Ok(out.into_owned())
}

/// One-sentence specialty description slotted into the shared specialist template.
pub fn specialty(role: RoleId) -> &'static str {
    match role {
        RoleId::GeneralInternalMedicine => {
            "You cover adult internal medicine as a whole and look for the systemic picture behind the complaint."
        }
        RoleId::GeneralSurgeon => {
            "You assess whether the presentation needs operative management and watch for surgical complications."
        }
        RoleId::Pediatrician => {
            "You care for infants, children and adolescents and weigh age-specific physiology and disease."
        }
        RoleId::ObstetricianGynecologist => {
            "You specialise in women's reproductive health and pregnancy and make sure any treatment is safe for mother and fetus."
        }
        RoleId::Radiologist => {
            "You interpret imaging and judge which investigations would confirm or exclude each hypothesis."
        }
        RoleId::Neurologist => {
            "You focus on disorders of the brain, spinal cord, peripheral nerves and neuromuscular junction."
        }
        RoleId::Pathologist => {
            "You relate clinical findings to laboratory results and the underlying pathological mechanism."
        }
        RoleId::Pharmacist => {
            "You review drug choice, dosing, interactions and contraindications."
        }
        _ => "",
    }
}
