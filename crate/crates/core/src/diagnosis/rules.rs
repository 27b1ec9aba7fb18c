use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::DiagnosisError;
use crate::vqa::Vocabulary;

/// A candidate cause: when `trigger_damage` is found, look for
/// `related_member` around it and for any of `events` on that member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauseRule {
    pub cause_name: String,
    pub trigger_damage: String,
    pub related_member: String,
    /// Member the related member stands in for, when the real one cannot be
    /// photographed (e.g. an abutment below an expansion joint).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy_for: Option<String>,
    pub events: Vec<String>,
}

impl CauseRule {
    pub fn new<I, S>(
        cause_name: &str,
        trigger_damage: &str,
        related_member: &str,
        events: I,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            cause_name: cause_name.to_string(),
            trigger_damage: trigger_damage.to_string(),
            related_member: related_member.to_string(),
            proxy_for: None,
            events: events.into_iter().map(Into::into).collect(),
        }
    }

    pub fn proxy_for(mut self, member: &str) -> Self {
        self.proxy_for = Some(member.to_string());
        self
    }

    /// Canonical names; repeated events collapse, order otherwise kept.
    pub fn validated(&self, vocab: &Vocabulary) -> Result<CauseRule, String> {
        let cause_name = self.cause_name.trim();
        if cause_name.is_empty() {
            return Err("cause_name is empty".into());
        }
        let trigger_damage = vocab
            .damage(&self.trigger_damage)
            .ok_or_else(|| format!("unknown trigger damage {:?}", self.trigger_damage))?;
        let related_member = vocab
            .member(&self.related_member)
            .ok_or_else(|| format!("unknown related member {:?}", self.related_member))?;
        let proxy_for = match &self.proxy_for {
            Some(p) => Some(
                vocab
                    .member(p)
                    .ok_or_else(|| format!("unknown proxy_for member {p:?}"))?
                    .to_string(),
            ),
            None => None,
        };
        if self.events.is_empty() {
            return Err("events must not be empty".into());
        }
        let mut events: Vec<String> = Vec::new();
        for e in &self.events {
            let d = vocab
                .damage(e)
                .ok_or_else(|| format!("unknown event damage {e:?}"))?;
            if !events.iter().any(|x| x == d) {
                events.push(d.to_string());
            }
        }
        Ok(CauseRule {
            cause_name: cause_name.to_string(),
            trigger_damage: trigger_damage.to_string(),
            related_member: related_member.to_string(),
            proxy_for,
            events,
        })
    }
}

/// Validates a rule list; cause names must be unique.
pub fn validate_rules(
    rules: &[CauseRule],
    vocab: &Vocabulary,
) -> Result<Vec<CauseRule>, DiagnosisError> {
    let mut seen = HashSet::new();
    rules
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let fail = |message: String| DiagnosisError::Rule {
                index,
                cause_name: r.cause_name.clone(),
                message,
            };
            let v = r.validated(vocab).map_err(fail)?;
            if !seen.insert(v.cause_name.clone()) {
                return Err(fail("duplicate cause_name".into()));
            }
            Ok(v)
        })
        .collect()
}

/// Parses a JSON rule file (a list of rules) and validates it.
pub fn parse_rules(bytes: &[u8], vocab: &Vocabulary) -> Result<Vec<CauseRule>, DiagnosisError> {
    let rules: Vec<CauseRule> =
        serde_json::from_slice(bytes).map_err(DiagnosisError::RuleSyntax)?;
    validate_rules(&rules, vocab)
}

/// Moisture sources behind corrosion on a steel girder bridge. The
/// expansion joint is observed through the abutment below it.
pub fn default_rules() -> Vec<CauseRule> {
    vec![
        CauseRule::new(
            "leaking from cracking on the slab",
            "corrosion",
            "slab",
            ["cracking", "leaking"],
        ),
        CauseRule::new(
            "leaking from the expansion joint",
            "corrosion",
            "abutment",
            ["leaking"],
        )
        .proxy_for("expansion joint"),
        CauseRule::new(
            "leaking from the drainage pipe",
            "corrosion",
            "drainage pipe",
            ["corrosion", "fissure", "fracture", "leaking"],
        ),
        CauseRule::new(
            "leaking from cracking on the wheel guard",
            "corrosion",
            "wheel guard",
            ["leaking"],
        ),
    ]
}
